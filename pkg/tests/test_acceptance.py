"""Acceptance battery. Each test prints one PASS/FAIL line; the lines are also
repeated in the pytest terminal summary (see conftest.py).

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they happen.
"""

import math
import time

import numpy as np
import pytest

from machian import bucket
from machian import dynamics as dyn
from machian import relational as rel
from machian.bucket import BucketConfig
from machian.cli import main
from machian.potentials import PairPotential
from machian.quantum import checks
from machian.quantum.evolution import evolve
from machian.quantum.grid import Grid, gaussian_packet
from machian.quantum.operators import QuantumSystem, canonical_momentum_operator, hamiltonian_operator

RESULTS = []


def report(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}"
    print(line)
    RESULTS.append(line)
    return passed


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@pytest.fixture(scope="module")
def battery():
    rng = np.random.default_rng(20240611)
    return [rel.random_state(rng, int(rng.integers(2, 9))) for _ in range(10_000)]


def test_01_form_equivalence(battery):
    pot = PairPotential.gravity()
    worst = dict.fromkeys(("T_cm", "J", "I", "I_shift", "L"), 0.0)
    t0 = time.perf_counter()
    for s in battery:
        f = s.frame
        shift = f.total_mass * (np.dot(f.x_c, f.x_c) * np.eye(3) - np.outer(f.x_c, f.x_c))
        J = [rel.angular_momentum(s, form) for form in ("absolute_minus_cm", "cm_relative", "pairwise")]
        errs = {
            "T_cm": rel_err(rel.kinetic_energy(s, "cm", "pairwise"), rel.kinetic_energy(s, "cm", "direct")),
            "J": max(rel_err(J[0], J[1]), rel_err(J[2], J[1])),
            "I": rel_err(rel.inertia_tensor(s, "pairwise"), rel.inertia_tensor(s, "single_body")),
            "I_shift": rel_err(f.inertia + shift, rel.inertia_tensor(s, "absolute")),
            "L": rel_err(rel.lagrangian(s, pot, "cm_decomposed"), rel.lagrangian(s, pot, "relational")),
        }
        for k, v in errs.items():
            worst[k] = max(worst[k], v)
    wall = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < 1e-11 and wall < 10.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(1, "form equivalence", ok, f"{detail} (< 1e-11) over {len(battery)} states in {wall:.1f}s (< 10s)")
    assert ok


def _harmonic_trajectories(rng, count=5):
    pot = PairPotential.harmonic()
    out = []
    for _ in range(count):
        s0 = rel.SystemState(rng.uniform(0.5, 2.0, 3), rng.normal(0, 1, (3, 3)), rng.normal(0, 0.3, (3, 3)))
        out.append(dyn.integrate_newtonian_gauge(s0, pot, 0.01, 200))
    return pot, out


def test_02_gauge_program(battery):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    h = 1e-6
    first = 0.0
    for s in battery[:200]:
        e = rng.normal(size=3)
        e /= np.linalg.norm(e)
        P, J = rel.total_momentum(s), s.frame.J
        boost = dyn.lagrangian_gauge_variation(s, h * e, np.zeros(3))
        spin = dyn.lagrangian_gauge_variation(s, np.zeros(3), h * e)
        first = max(first, abs(boost.dT / h - e @ P) / np.linalg.norm(P), abs(spin.dT_cm / h - e @ J) / np.linalg.norm(J))

    pot, trajs = _harmonic_trajectories(rng)
    quantities = {
        "T*": lambda z: rel.kinetic_energy(z, "relational"),
        "L": lambda z: rel.lagrangian(z, pot),
        "H": lambda z: rel.hamiltonian(z, pot),
    }
    worst = dict.fromkeys(quantities, 0.0)
    samples = range(0, 201, 10)
    for traj in trajs:
        base = {k: np.array([q(traj.state(i)) for i in samples]) for k, q in quantities.items()}
        for _ in range(20):
            dressed = dyn.apply_gauge(traj, dyn.GaugePath.random(rng))
            for k, q in quantities.items():
                moved = np.array([q(dressed.state(i)) for i in samples])
                worst[k] = max(worst[k], float(np.max(np.abs(moved - base[k]) / np.abs(base[k]))))
    wall = time.perf_counter() - t0
    ok = first < 1e-4 and max(worst.values()) < 1e-9 and wall < 30.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(2, "gauge program", ok,
           f"first-order dT, dT_cm {first:.1e} (< 1e-4); finite gauges {detail} (< 1e-9); {wall:.1f}s (< 30s)")
    assert ok


def _body(seed):
    rng = np.random.default_rng(seed)
    x = np.array([[1.0, 0.0, 0.2], [-0.6, 1.1, -0.1], [-0.4, -1.2, 0.3]]) + rng.normal(0, 0.05, (3, 3))
    return rel.SystemState([1.0, 1.5, 0.8], x, rng.normal(0, 0.3, (3, 3)))


def _residuals(potential, seed, dt, span=0.4):
    steps = int(round(span / dt))
    traj = dyn.integrate_newtonian_gauge(_body(seed), potential, dt, steps)
    # a fast gauge keeps the stencil truncation error above round-off, so the order is observable
    gauge = dyn.GaugePath.random(np.random.default_rng(seed + 100), frequency=5.0)
    dressed = dyn.apply_gauge(traj, gauge)
    idx = [steps // 4, steps // 2, 3 * steps // 4]
    return dressed, idx, dyn.eom_residual_series(dressed, indices=idx)


def test_03_mach_newton_residual():
    t0 = time.perf_counter()
    worst, order, margin = 0.0, math.inf, math.inf
    for potential in (PairPotential.none(), PairPotential.harmonic()):
        for seed in range(3):
            _, _, coarse = _residuals(potential, seed, 2e-3)
            dressed, idx, fine = _residuals(potential, seed, 1e-3)
            worst = max(worst, fine.max())
            order = min(order, math.log2(coarse.max() / fine.max()))
            V = dressed.velocities.copy()
            V[idx[1] + 1, 0] *= 1.01
            bad = dyn.eom_residual(dressed.with_arrays(dressed.positions, V), idx[1]).max_norm
            margin = min(margin, bad / fine[1])
    wall = time.perf_counter() - t0
    ok = worst < 1e-6 and order >= 2.0 and margin >= 1e3 and wall < 60.0
    report(3, "Mach-Newton residual", ok,
           f"max {worst:.1e} (< 1e-6) at dt=1e-3, observed order {order:.2f} (>= 2), "
           f"corrupted/clean {margin:.1e} (>= 1e3); {wall:.1f}s (< 60s)")
    assert ok


def test_04_constraint_identity(battery):
    worst = 0.0
    for s in battery:
        a, b = rel.constraint_residuals(s)
        scale = rel.constraint_scale(s)
        worst = max(worst, np.linalg.norm(a) / scale, np.linalg.norm(b) / scale)
    ok = worst < 1e-11
    report(4, "constraint identity", ok, f"max normalized residual {worst:.1e} (< 1e-11) over {len(battery)} states")
    assert ok


def test_05_energy_conservation():
    period = 2 * math.pi / math.sqrt(2.0)
    s0 = rel.SystemState([1.0, 1.0], [[0.5, 0.1, 0], [-0.5, 0, 0]], [[0, 0.3, 0], [0, -0.3, 0]])
    harmonic = dyn.energy_drift(dyn.integrate_newtonian_gauge(s0, PairPotential.harmonic(), period / 1000, 1000))
    fall0 = rel.SystemState([1.0, 1.0], [[1, 0, 0], [-1, 0, 0]], np.zeros((2, 3)))
    stop = lambda s: np.linalg.norm(s.positions[0] - s.positions[1]) < 0.2
    fall = dyn.energy_drift(dyn.integrate_newtonian_gauge(fall0, PairPotential.gravity(), 5e-4, 10**6, stop=stop))
    ok = harmonic < 1e-9 and fall < 1e-7
    report(5, "energy conservation", ok,
           f"harmonic one period {harmonic:.1e} (< 1e-9), gravity free fall to 10% separation {fall:.1e} (< 1e-7)")
    assert ok


def test_06_bucket_analytic():
    t0 = time.perf_counter()
    cfg = BucketConfig(m=1.0, R=1.0, G=1.0, I0=100.0)
    g = bucket.g_eff(cfg)
    omega_b = bucket.bucket_balance(cfg).omega_b
    newton = BucketConfig(infinite_shell=True)
    limit = bucket.bucket_balance(newton)
    far = max(abs(bucket.g_eff(BucketConfig(I0=I0)) - 1.0) for I0 in (1e17, 1e20, 1e300))
    wall = time.perf_counter() - t0
    ok = (g == 1.0404 and omega_b == 0.51 and bucket.g_eff(newton) == 1.0 and limit.omega_b == limit.omega == 0.5
          and far <= np.finfo(float).eps and wall < 1.0)
    report(6, "bucket analytic", ok,
           f"G_eff={g!r}, Omega_b={omega_b!r}, I0=inf gives G_eff=1 and Omega_b=0.5, "
           f"|G_eff-1| at I0>=1e17 {far:.1e}; {wall * 1e3:.1f}ms (< 1s)")
    assert ok


def test_07_bucket_dynamic():
    t0 = time.perf_counter()
    cfg = BucketConfig(I0=100.0)
    errors = {Rs: bucket.simulate_bucket(cfg, 64, Rs, orbits=4).relative_error for Rs in (25.0, 50.0, 100.0)}
    wall = time.perf_counter() - t0
    e = list(errors.values())
    ok = e[-1] < 0.01 and e[0] > e[1] > e[2] and wall < 300.0
    detail = ", ".join(f"R_s={Rs:g}: {v:.1e}" for Rs, v in errors.items())
    report(7, "bucket ring-shell simulation", ok, f"relative frequency error {detail} (< 1e-2, monotone); {wall:.1f}s")
    assert ok


def test_08_quantum_hermiticity():
    t0 = time.perf_counter()
    grid = Grid(2, 128, 3.2)
    system = QuantumSystem()
    rng = np.random.default_rng(8)
    composed = [canonical_momentum_operator(system, grid, i, k) for i in (0, 1) for k in (0, 1)]
    composed.append(hamiltonian_operator(system, grid))
    naive = [canonical_momentum_operator(system, grid, i, k, naive=True) for i in (0, 1) for k in (0, 1)]
    good, bad = 0.0, math.inf
    for _ in range(20):
        a = checks.random_probe(grid, rng, width_range=(0.3, 0.45))
        b = checks.random_probe(grid, rng, width_range=(0.3, 0.45))
        good = max(good, max(checks.hermiticity_residual(op, a, b) for op in composed))
        bad = min(bad, min(checks.hermiticity_residual(op, a, b) for op in naive))
    wall = time.perf_counter() - t0
    ok = good <= 1e-9 and bad >= 1e6 * 1e-9 and bad >= 1e6 * good and wall < 60.0
    report(8, "quantum hermiticity", ok,
           f"composed P, H worst {good:.1e} (<= 1e-9); naive P best {bad:.1e} (>= 1e-3), "
           f"ratio {bad / good:.1e}; {wall:.1f}s (< 60s)")
    assert ok


def test_09_commutators_and_truncation():
    t0 = time.perf_counter()
    grid = Grid(2, 512, 12.8)
    system = QuantumSystem.with_shell(20.0, 20.0)
    psi = gaussian_packet(grid, [0.4, -0.3], 1.8, [0.1, 0.15])
    idx = [(j, k, i, n) for j in (0, 1) for k in (0, 1) for i in (0, 1) for n in (0, 1)]
    x_p = max(checks.commutator_residual("x_P", q, psi, system) for q in idx)
    p_p = max(checks.commutator_residual("p_P", q, psi, system) for q in idx)
    probe = checks.random_probe(Grid(2, 128, 6.4), np.random.default_rng(9), n_packets=1,
                                width_range=(0.6, 0.8), k_max=1.0)
    gaps, slope = checks.shell_scaling(probe, [10.0, 20.0, 40.0, 80.0], 1.0)
    wall = time.perf_counter() - t0
    ok = x_p < 1e-6 and p_p < 1e-6 and abs(slope + 4.0) <= 0.5 and wall < 300.0
    report(9, "commutators and truncation", ok,
           f"[x,P] {x_p:.1e}, [p,P] {p_p:.1e} (< 1e-6, h={grid.h:.2f}, L=20); "
           f"composed-truncated slope {slope:.2f} (-4 +- 0.5); {wall:.1f}s")
    assert ok


def test_10_evolution():
    t0 = time.perf_counter()
    grid = Grid(2, 128, 6.4)
    probe = checks.random_probe(grid, np.random.default_rng(10), n_packets=1, width_range=(0.4, 0.5))
    norms = []
    evolve(probe, QuantumSystem.with_shell(1.0, 3.0), 1e-3, 1000, observer=lambda k, p: norms.append(p.norm2))
    drift = max(abs(n - norms[0]) for n in norms) / norms[0]

    fine = Grid(2, 512, 25.6)
    free = QuantumSystem(machian=False)
    k0 = 0.2
    y = fine.coordinate(0)
    means = []
    evolve(gaussian_packet(fine, [0.0, 0.0], 5.0, [k0, 0.0]), free, 0.005, 40,
           observer=lambda k, p: means.append(float(np.sum(np.abs(p.amplitudes) ** 2 * y) * fine.cell_volume)))
    target = free.hbar * k0 / free.pair_mass(0, 1)
    velocity = abs((means[-1] - means[0]) / 0.2 / target - 1.0)

    mach = QuantumSystem.with_shell(20.0, 20.0)
    packet = gaussian_packet(Grid(2, 320, 8.0), [0.8, 0.0], 1.4, [0.0, 0.6])
    ehrenfest = checks.ehrenfest_check(packet, mach, 1e-3).residual("exact")
    wall = time.perf_counter() - t0
    ok = drift < 1e-7 and velocity < 1e-6 and ehrenfest < 1e-5 and wall < 600.0
    report(10, "evolution", ok,
           f"CN norm drift {drift:.1e} over 1000 steps (< 1e-7), free velocity {velocity:.1e} (< 1e-6), "
           f"Machian Ehrenfest {ehrenfest:.1e} (< 1e-5); {wall:.1f}s (< 600s)")
    assert ok


def test_11_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.txt", tmp_path / "b.txt"]
    codes = [main(["check", "--seed", "11", "--output", str(p)]) for p in paths]
    capsys.readouterr()
    first, second = (p.read_bytes() for p in paths)
    ok = first == second and len(first) > 0 and codes == [0, 0]
    with capsys.disabled():
        report(11, "determinism", ok, f"two check reports identical ({len(first)} bytes), exit codes {codes}")
    assert ok
