import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from machian import relational as rel
from machian.errors import DegenerateInertia
from machian.potentials import PairPotential


def dumbbell():
    return rel.SystemState([1.0, 1.0], [[1, 0, 0], [-1, 0, 0]], [[0, 1, 0], [0, -1, 0]])


def boost():
    return rel.SystemState([1.0, 1.0], [[1, 2, 0], [-1, 0, 3]], [[3, 0, 0], [3, 0, 0]])


def lattice():
    x = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]]
    return rel.SystemState([1.0, 2.0, 3.0, 1.5, 0.5], x, np.zeros((5, 3)))


def as_state(m, x, v):
    return rel.SystemState(m, x, v)


def relerr(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# centre of mass

def test_dumbbell_center_of_mass_is_origin():
    xc, uc = rel.center_of_mass(dumbbell())
    assert np.array_equal(xc, np.zeros(3)) and np.array_equal(uc, np.zeros(3))


def test_single_body_center_of_mass():
    xc, uc = rel.center_of_mass(rel.SystemState([2.0], [[3, 0, 0]], [[1, 0, 0]]))
    assert np.allclose(xc, [3, 0, 0], rtol=0, atol=0) and np.allclose(uc, [1, 0, 0], rtol=0, atol=0)


def test_center_of_mass_matches_direct_sum():
    m, x, v = oracles.states(np.random.default_rng(1), 1, (5, 5))[0]
    xc, uc = rel.center_of_mass(as_state(m, x, v))
    ox, ou = oracles.com(m, x, v)
    assert relerr(xc, ox) < 1e-14 and relerr(uc, ou) < 1e-14


def test_state_rejects_bad_input():
    with pytest.raises(ValueError):
        rel.SystemState([1.0, -1.0], np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        rel.SystemState([1.0, 1.0], [[0, 0, np.nan], [1, 0, 0]], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        rel.SystemState([1.0, 1.0], np.zeros((3, 3)), np.zeros((2, 3)))


# inertia

def test_rod_inertia_in_both_forms():
    for form in ("single_body", "pairwise"):
        assert np.allclose(rel.inertia_tensor(dumbbell(), form), np.diag([0, 2, 2]), atol=1e-15)


def test_single_body_has_zero_inertia():
    s = rel.SystemState([2.0], [[3, 1, 0]], [[1, 0, 0]])
    assert np.array_equal(rel.inertia_tensor(s), np.zeros((3, 3)))


def test_inertia_forms_match_oracle_and_parallel_axis_identity():
    m, x, v = oracles.states(np.random.default_rng(2), 1, (4, 4))[0]
    s = as_state(m, x, v)
    I1, I2 = rel.inertia_tensor(s, "single_body"), rel.inertia_tensor(s, "pairwise")
    assert relerr(I1, oracles.inertia(m, x)) < 1e-12
    assert relerr(I2, oracles.inertia_pairs(m, x)) < 1e-12
    assert relerr(I1, I2) < 1e-12
    xc, _ = oracles.com(m, x, v)
    M = sum(m)
    shift = M * (np.dot(xc, xc) * np.eye(3) - np.outer(xc, xc))
    assert relerr(rel.inertia_tensor(s, "absolute"), I1 + shift) < 1e-12


def test_pseudo_inverse_examples():
    assert np.allclose(rel.inertia_inverse(np.diag([0.0, 2.0, 2.0])), np.diag([0, 0.5, 0.5]), atol=1e-15)
    assert np.allclose(rel.inertia_inverse(5 * np.eye(3)), 0.2 * np.eye(3), atol=1e-15)


def test_pseudo_inverse_matches_adjugate_for_full_rank():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3))
    t = a @ a.T + 0.5 * np.eye(3)
    assert relerr(rel.inertia_inverse(t), oracles.inverse_adjugate(t)) < 1e-12


def test_pseudo_inverse_of_zero_raises():
    with pytest.raises(DegenerateInertia):
        rel.inertia_inverse(np.zeros((3, 3)))


# angular momentum and omega

def test_dumbbell_angular_momentum_all_forms():
    for form in ("absolute_minus_cm", "cm_relative", "pairwise"):
        assert np.allclose(rel.angular_momentum(dumbbell(), form), [0, 0, 2], atol=1e-15)


def test_pure_boost_has_no_intrinsic_angular_momentum():
    for form in ("absolute_minus_cm", "cm_relative", "pairwise"):
        assert np.allclose(rel.angular_momentum(boost(), form), 0, atol=1e-14)


def test_angular_momentum_forms_match_oracle():
    m, x, v = oracles.states(np.random.default_rng(4), 1, (6, 6))[0]
    s = as_state(m, x, v)
    ref = oracles.angular_momentum(m, x, v)
    forms = [rel.angular_momentum(s, f) for f in ("absolute_minus_cm", "cm_relative", "pairwise")]
    for J in forms:
        assert relerr(J, ref) < 1e-12


def test_omega_examples():
    assert np.allclose(rel.omega(dumbbell()), [0, 0, 1], atol=1e-15)
    assert np.array_equal(rel.omega(boost()), np.zeros(3))


def test_planar_inertia_times_omega_reproduces_J():
    rng = np.random.default_rng(5)
    x = np.c_[rng.normal(size=(3, 2)), np.zeros(3)]
    v = np.c_[rng.normal(size=(3, 2)), np.zeros(3)]
    s = rel.SystemState([1.0, 2.0, 0.7], x, v)
    assert relerr(rel.inertia_tensor(s) @ rel.omega(s), s.frame.J) < 1e-12


# kinetic energies

def test_dumbbell_kinetic_energies():
    s = dumbbell()
    assert rel.kinetic_energy(s, "absolute") == pytest.approx(1.0, abs=1e-15)
    assert rel.kinetic_energy(s, "cm") == pytest.approx(1.0, abs=1e-15)
    assert rel.kinetic_energy(s, "relational") == pytest.approx(0.0, abs=1e-15)


def test_boost_kinetic_energies():
    s = rel.SystemState([1.0, 1.0], [[1, 0, 0], [-1, 0, 0]], [[3, 0, 0], [3, 0, 0]])
    assert rel.kinetic_energy(s, "absolute") == pytest.approx(9.0, abs=1e-14)
    assert rel.kinetic_energy(s, "cm") == pytest.approx(0.0, abs=1e-14)
    assert rel.kinetic_energy(s, "relational") == pytest.approx(0.0, abs=1e-14)


def test_kinetic_forms_match_double_sum_oracle():
    m, x, v = oracles.states(np.random.default_rng(6), 1, (4, 4))[0]
    s = as_state(m, x, v)
    ref = oracles.kinetic_cm(m, x, v)
    for form in ("direct", "pairwise"):
        assert relerr(rel.kinetic_energy(s, "cm", form), ref) < 1e-13
    t_star = rel.kinetic_energy(s, "relational")
    assert relerr(t_star, oracles.kinetic_relational(m, x, v)) < 1e-12
    assert t_star <= ref


def test_unknown_form_raises():
    with pytest.raises(ValueError):
        rel.kinetic_energy(dumbbell(), "cm", "other")
    with pytest.raises(ValueError):
        rel.angular_momentum(dumbbell(), "other")


# potentials and lagrangian

def test_gravity_pair_energy():
    s = rel.SystemState([1.0, 1.0], [[1, 0, 0], [-1, 0, 0]], np.zeros((2, 3)))
    assert rel.potential_energy(s, PairPotential.gravity(1.0)) == pytest.approx(-0.5, rel=1e-15)
    assert rel.potential_energy(s, PairPotential.none()) == 0.0


def test_gravity_matches_pair_loop():
    m, x, v = oracles.states(np.random.default_rng(7), 1, (3, 3))[0]
    V = rel.potential_energy(as_state(m, x, v), PairPotential.gravity(2.5))
    assert relerr(V, oracles.gravity_energy(m, x, 2.5)) < 1e-14


def test_forces_are_minus_gradient():
    m, x, v = oracles.states(np.random.default_rng(8), 1, (4, 4))[0]
    pot = PairPotential.gravity(1.0)
    s = as_state(m, x, v)
    F = rel.potential_forces(s, pot)
    h = 1e-6
    for i in range(4):
        for k in range(3):
            xp, xm = np.array(x), np.array(x)
            xp[i, k] += h
            xm[i, k] -= h
            g = (oracles.gravity_energy(m, xp.tolist()) - oracles.gravity_energy(m, xm.tolist())) / (2 * h)
            assert F[i, k] == pytest.approx(-g, rel=1e-6, abs=1e-8)
    assert np.allclose(F.sum(axis=0), 0, atol=1e-12 * np.abs(F).max())


def test_lagrangian_examples():
    for form in ("relational", "cm_decomposed", "absolute"):
        assert rel.lagrangian(dumbbell(), PairPotential.none(), form) == pytest.approx(0.0, abs=1e-15)
    s, pot = lattice(), PairPotential.gravity()
    assert rel.lagrangian(s, pot) == pytest.approx(-rel.potential_energy(s, pot), rel=1e-15)


def test_lagrangian_forms_agree():
    m, x, v = oracles.states(np.random.default_rng(9), 1, (5, 5))[0]
    s, pot = as_state(m, x, v), PairPotential.gravity()
    ref = oracles.kinetic_relational(m, x, v) - oracles.gravity_energy(m, x)
    for form in ("relational", "cm_decomposed", "absolute"):
        assert relerr(rel.lagrangian(s, pot, form), ref) < 1e-12


# canonical momenta, constraints, hamiltonian

def test_dumbbell_canonical_momenta_vanish():
    assert np.allclose(rel.canonical_momenta(dumbbell()), 0, atol=1e-15)


def test_canonical_momenta_without_rotation():
    s = rel.SystemState([1.0, 3.0], [[1, 0, 0], [-1, 0, 0]], [[2, 0, 0], [0, 0, 0]])
    f = s.frame
    assert np.allclose(rel.canonical_momenta(s), s.masses[:, None] * f.v_ic, atol=1e-15)


@pytest.mark.parametrize("state", [dumbbell(), boost()], ids=["dumbbell", "boost"])
def test_constraints_exact_on_special_states(state):
    a, b = rel.constraint_residuals(state)
    assert np.allclose(a, 0, atol=1e-15) and np.allclose(b, 0, atol=1e-15)


def test_constraints_vanish_on_random_states():
    for m, x, v in oracles.states(np.random.default_rng(10), 50, (6, 6)):
        s = as_state(m, x, v)
        a, b = rel.constraint_residuals(s)
        scale = rel.constraint_scale(s)
        assert np.linalg.norm(a) < 1e-11 * scale and np.linalg.norm(b) < 1e-11 * scale


def test_hamiltonian_examples():
    for form in ("canonical", "kinematic", "legendre"):
        assert rel.hamiltonian(dumbbell(), PairPotential.none(), form) == pytest.approx(0.0, abs=1e-15)
    s, pot = lattice(), PairPotential.gravity()
    assert rel.hamiltonian(s, pot) == pytest.approx(rel.potential_energy(s, pot), rel=1e-15)


def test_hamiltonian_is_relational_kinetic_plus_potential():
    m, x, v = oracles.states(np.random.default_rng(11), 1, (5, 5))[0]
    s, pot = as_state(m, x, v), PairPotential.gravity()
    ref = oracles.kinetic_relational(m, x, v) + oracles.gravity_energy(m, x)
    for form in ("canonical", "kinematic", "legendre"):
        assert relerr(rel.hamiltonian(s, pot, form), ref) < 1e-12


# properties

coords = st.floats(-5, 5, allow_nan=False)
vec = st.lists(coords, min_size=3, max_size=3)


@st.composite
def systems(draw, n_min=3, n_max=6):
    n = draw(st.integers(n_min, n_max))
    m = draw(st.lists(st.floats(0.1, 10), min_size=n, max_size=n))
    x = draw(st.lists(vec, min_size=n, max_size=n))
    v = draw(st.lists(vec, min_size=n, max_size=n))
    return rel.SystemState(m, x, v)


def _well_conditioned(s):
    lam = np.linalg.eigvalsh(rel.inertia_tensor(s))
    return lam[0] > 1e-3 * lam[-1]


@settings(max_examples=60, deadline=None)
@given(systems(), vec, vec)
def test_translation_boost_invariance(s, c, u):
    if not _well_conditioned(s):
        return
    moved = s.replace(positions=s.positions + np.array(c), velocities=s.velocities + np.array(u))
    pot = PairPotential.harmonic()
    T = rel.kinetic_energy(s, "cm")
    for a, b in [
        (rel.kinetic_energy(moved, "cm"), T),
        (rel.kinetic_energy(moved, "relational"), rel.kinetic_energy(s, "relational")),
        (rel.lagrangian(moved, pot), rel.lagrangian(s, pot)),
        (rel.hamiltonian(moved, pot), rel.hamiltonian(s, pot)),
    ]:
        assert abs(a - b) <= 1e-11 * max(T, abs(rel.potential_energy(s, pot)), 1e-12)
    assert relerr(rel.inertia_tensor(moved), rel.inertia_tensor(s)) < 1e-11
    assert np.linalg.norm(moved.frame.J - s.frame.J) <= 1e-11 * max(np.linalg.norm(s.frame.J), T, 1e-12)


@settings(max_examples=60, deadline=None)
@given(systems(), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_rotation_covariance(s, angles):
    from machian.dynamics import rotation_about

    R = rotation_about(np.array(angles))
    rot = s.replace(positions=s.positions @ R.T, velocities=s.velocities @ R.T)
    T = rel.kinetic_energy(s, "cm")
    assert abs(rel.kinetic_energy(rot, "cm") - T) <= 1e-11 * max(T, 1e-12)
    assert abs(rel.kinetic_energy(rot, "relational") - rel.kinetic_energy(s, "relational")) <= 1e-10 * max(T, 1e-12)
    I = rel.inertia_tensor(s)
    assert relerr(rel.inertia_tensor(rot), R @ I @ R.T) < 1e-11
    J = s.frame.J
    L = float(np.sum(s.masses * np.linalg.norm(s.frame.x_ic, axis=1) * np.linalg.norm(s.frame.v_ic, axis=1)))
    assert np.linalg.norm(rot.frame.J - R @ J) <= 1e-11 * max(L, 1e-12)
    if _well_conditioned(s):
        W = s.frame.Omega
        assert np.linalg.norm(rot.frame.Omega - R @ W) <= 1e-9 * max(np.linalg.norm(W), 1e-12)


@settings(max_examples=60, deadline=None)
@given(systems(2, 6), vec)
def test_rigid_rotation_has_zero_relational_kinetic_energy(s, w):
    f = s.frame
    rigid = s.replace(velocities=np.cross(np.array(w), f.x_ic) + np.array([1.0, -2.0, 0.5]))
    T = rel.kinetic_energy(rigid, "cm")
    assert abs(rel.kinetic_energy(rigid, "relational")) <= 1e-9 * max(T, 1e-12)


@settings(max_examples=60, deadline=None)
@given(systems(2, 7))
def test_relational_kinetic_energy_is_bounded_by_cm(s):
    T = rel.kinetic_energy(s, "cm")
    Ts = rel.kinetic_energy(s, "relational")
    assert -1e-12 * max(T, 1) <= Ts <= T * (1 + 1e-12) + 1e-300
