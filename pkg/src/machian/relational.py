"""Relational kinematics of N point bodies.

Every quantity is available in each of its equivalent forms (absolute-space,
centre-of-mass, pairwise) so the forms can be cross-checked against each other.
Calligraphic quantities of the theory live in the CM frame: intrinsic inertia
``I``, CM angular momentum ``J`` and the Machian angular velocity ``Omega``
defined by ``J = I . Omega``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInertia
from .potentials import PairPotential

NULL_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Body:
    mass: float
    label: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"body mass must be positive, got {self.mass!r}")


def _frozen(a, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemState:
    """Masses, positions and velocities of N bodies at one instant.

    Arrays are copied and made read-only; derived CM-frame data is cached on
    first use in :attr:`frame`.
    """

    masses: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0
    labels: Optional[tuple] = None

    def __post_init__(self):
        m = _frozen(self.masses)
        if m.ndim != 1 or m.size < 1:
            raise ValueError("masses must be a non-empty 1-d sequence")
        if not np.all(m > 0):
            raise ValueError("all masses must be positive")
        n = m.size
        x = _frozen(self.positions, (n, 3))
        v = _frozen(self.velocities, (n, 3))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.all(np.isfinite(m))):
            raise ValueError("state components must be finite")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "time", float(self.time))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != n:
                raise ValueError("labels must match number of bodies")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_bodies(cls, bodies: Sequence[Body], positions, velocities, time=0.0):
        return cls(
            [b.mass for b in bodies], positions, velocities, time, tuple(b.label for b in bodies)
        )

    @property
    def n_bodies(self) -> int:
        return self.masses.size

    @property
    def bodies(self):
        labels = self.labels or tuple(str(i) for i in range(self.n_bodies))
        return [Body(float(m), lab) for m, lab in zip(self.masses, labels)]

    def replace(self, positions=None, velocities=None, time=None, masses=None) -> "SystemState":
        return SystemState(
            self.masses if masses is None else masses,
            self.positions if positions is None else positions,
            self.velocities if velocities is None else velocities,
            self.time if time is None else time,
            self.labels,
        )

    @cached_property
    def frame(self) -> "FrameData":
        return FrameData.from_state(self)


@dataclass(frozen=True, eq=False)
class FrameData:
    x_c: np.ndarray
    u_c: np.ndarray
    total_mass: float
    pair_masses: np.ndarray
    x_ic: np.ndarray
    v_ic: np.ndarray
    inertia: np.ndarray
    inertia_inverse: np.ndarray
    J: np.ndarray
    Omega: np.ndarray

    @classmethod
    def from_state(cls, state: SystemState) -> "FrameData":
        m = state.masses
        M = m.sum()
        x_c = m @ state.positions / M
        u_c = m @ state.velocities / M
        x_ic = state.positions - x_c
        v_ic = state.velocities - u_c
        inertia = _inertia_single(m, x_ic)
        J = np.einsum("i,ij->j", m, cross(x_ic, v_ic))
        try:
            inv = inertia_inverse(inertia)
        except DegenerateInertia:
            inv = np.zeros((3, 3))
            if np.linalg.norm(J) > 0:
                raise
        Omega = inv @ J
        return cls(x_c, u_c, float(M), np.outer(m, m) / M, x_ic, v_ic, inertia, inv, J, Omega)


@lru_cache(maxsize=None)
def _pairs(n):
    i, j = np.triu_indices(n, 1)
    i.flags.writeable = False
    j.flags.writeable = False
    return i, j


def cross(a, b):
    """Cross product over the last axis (broadcasting); much cheaper than np.cross for small arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def _inertia_single(m, x):
    r2 = np.einsum("ij,ij->i", x, x)
    return np.eye(3) * np.dot(m, r2) - np.einsum("i,ij,ik->jk", m, x, x)


def center_of_mass(state: SystemState):
    """CM position and velocity ``(x_c, u_c)``."""
    f = state.frame
    return f.x_c.copy(), f.u_c.copy()


def total_momentum(state: SystemState):
    return state.masses @ state.velocities


def inertia_tensor(state: SystemState, form: str = "single_body"):
    """Intrinsic (CM-frame) moment of inertia tensor.

    ``single_body`` sums over bodies about the CM, ``pairwise`` sums over pairs
    with pair masses m_i m_j / M, ``absolute`` returns the tensor about the
    coordinate origin (which differs from the intrinsic one by the CM term).
    """
    m = state.masses
    if form == "single_body":
        return _inertia_single(m, state.positions - state.frame.x_c)
    if form == "pairwise":
        i, j = _pairs(m.size)
        xij = state.positions[i] - state.positions[j]
        mij = m[i] * m[j] / m.sum()
        return _inertia_single(mij, xij)
    if form == "absolute":
        return _inertia_single(m, state.positions)
    raise ValueError(f"unknown inertia form {form!r}")


def inertia_inverse(tensor, null_threshold: float = NULL_THRESHOLD):
    """Moore-Penrose pseudo-inverse of a symmetric PSD 3x3 tensor.

    Eigenvalues below ``null_threshold`` times the largest are treated as exact
    zeros. Raises :class:`DegenerateInertia` when no eigenvalue survives.
    """
    t = np.asarray(tensor, dtype=float)
    t = 0.5 * (t + t.T)
    lam, vec = np.linalg.eigh(t)
    top = lam[-1]
    if not top > 0:
        raise DegenerateInertia("inertia tensor has no positive eigenvalue")
    keep = lam > null_threshold * top
    inv_lam = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    return (vec * inv_lam) @ vec.T


def angular_momentum(state: SystemState, form: str = "cm_relative"):
    """CM-frame angular momentum J in one of its three equivalent forms."""
    m, x, v = state.masses, state.positions, state.velocities
    if form == "absolute_minus_cm":
        x_c = m @ x / m.sum()
        return np.einsum("i,ij->j", m, cross(x, v)) - cross(x_c, m @ v)
    if form == "cm_relative":
        f = state.frame
        return np.einsum("i,ij->j", m, cross(f.x_ic, f.v_ic))
    if form == "pairwise":
        i, j = _pairs(m.size)
        mij = m[i] * m[j] / m.sum()
        return np.einsum("p,pj->j", mij, cross(x[i] - x[j], v[i] - v[j]))
    raise ValueError(f"unknown angular momentum form {form!r}")


def omega(state: SystemState):
    """Machian angular velocity Omega = I^+ J (null-space component zero)."""
    return state.frame.Omega.copy()


def kinetic_energy(state: SystemState, level: str = "cm", form: str = "direct") -> float:
    """Kinetic energy at ``level`` absolute (T), cm (T_cm) or relational (T*).

    ``form`` selects the direct single-body sum or the pairwise double sum.
    For the relational level the pairwise form is
    ``sum m_ij v_ij^2 / 2 - J.I^+.J / 2`` with every factor evaluated pairwise.
    """
    m, v = state.masses, state.velocities
    if level == "absolute":
        return 0.5 * float(np.einsum("i,ij,ij->", m, v, v))
    if form == "direct":
        f = state.frame
        t_cm = 0.5 * float(np.einsum("i,ij,ij->", m, f.v_ic, f.v_ic))
        if level == "cm":
            return t_cm
        if level == "relational":
            return t_cm - 0.5 * float(f.J @ f.Omega)
    elif form == "pairwise":
        i, j = _pairs(m.size)
        mij = m[i] * m[j] / m.sum()
        vij = v[i] - v[j]
        t_cm = 0.5 * float(np.einsum("p,pj,pj->", mij, vij, vij))
        if level == "cm":
            return t_cm
        if level == "relational":
            J = angular_momentum(state, "pairwise")
            I = inertia_tensor(state, "pairwise")
            try:
                inv = inertia_inverse(I)
            except DegenerateInertia:
                inv = np.zeros((3, 3))
            return t_cm - 0.5 * float(J @ inv @ J)
    else:
        raise ValueError(f"unknown kinetic form {form!r}")
    raise ValueError(f"unknown kinetic level {level!r}")


def potential_energy(state: SystemState, potential: PairPotential) -> float:
    """V = sum over pairs i<j of V_ij(x_ij)."""
    m, x = state.masses, state.positions
    if m.size < 2:
        return 0.0
    i, j = _pairs(m.size)
    return float(np.sum(potential.pair_values(x[i] - x[j], m[i], m[j])))


def potential_forces(state: SystemState, potential: PairPotential):
    """-grad_i V for every body, shape (N, 3)."""
    m, x = state.masses, state.positions
    out = np.zeros_like(x)
    if m.size < 2:
        return out
    i, j = _pairs(m.size)
    grad = potential.pair_gradients(x[i] - x[j], m[i], m[j])
    np.add.at(out, i, -grad)
    np.add.at(out, j, grad)
    return out


def lagrangian(state: SystemState, potential: PairPotential, form: str = "relational") -> float:
    """Relational Lagrangian T* - V.

    ``relational`` uses the pairwise kinetic and inertia sums,
    ``cm_decomposed`` the body sum of m_i |v_ic - Omega x x_ic|^2 / 2,
    ``absolute`` subtracts M u_c^2/2 + J.Omega/2 from the absolute-space L.
    """
    V = potential_energy(state, potential)
    if form == "relational":
        return kinetic_energy(state, "relational", "pairwise") - V
    f = state.frame
    if form == "cm_decomposed":
        w = f.v_ic - cross(f.Omega, f.x_ic)
        return 0.5 * float(np.einsum("i,ij,ij->", state.masses, w, w)) - V
    if form == "absolute":
        L = kinetic_energy(state, "absolute") - V
        return L - 0.5 * f.total_mass * float(f.u_c @ f.u_c) - 0.5 * float(f.J @ f.Omega)
    raise ValueError(f"unknown lagrangian form {form!r}")


def canonical_momenta(state: SystemState):
    """P_i = m_i (v_ic - Omega x x_ic), shape (N, 3)."""
    f = state.frame
    return state.masses[:, None] * (f.v_ic - cross(f.Omega, f.x_ic))


def constraint_residuals(state: SystemState):
    """(sum_i P_i, sum_i x_ic x P_i); both vanish identically."""
    P = canonical_momenta(state)
    return P.sum(axis=0), cross(state.frame.x_ic, P).sum(axis=0)


def constraint_scale(state: SystemState) -> float:
    """Magnitude scale sum_i |P_i| (1 + |x_ic|) used to normalise the residuals."""
    P = canonical_momenta(state)
    f = state.frame
    scale = np.linalg.norm(P, axis=1) @ (1.0 + np.linalg.norm(f.x_ic, axis=1))
    kin = state.masses @ (np.linalg.norm(f.v_ic, axis=1) * (1.0 + np.linalg.norm(f.x_ic, axis=1)))
    return float(max(scale, kin))


def hamiltonian(state: SystemState, potential: PairPotential, form: str = "canonical") -> float:
    """Relational Hamiltonian.

    ``canonical``: sum P_i^2 / 2 m_i + V. ``kinematic``: the same written with
    p_ic - m_i Omega x x_ic. ``legendre``: T* + V.
    """
    V = potential_energy(state, potential)
    m = state.masses
    if form == "canonical":
        P = canonical_momenta(state)
        return 0.5 * float(np.einsum("ij,ij->", P, P / m[:, None])) + V
    if form == "kinematic":
        f = state.frame
        q = m[:, None] * f.v_ic - m[:, None] * cross(f.Omega, f.x_ic)
        return 0.5 * float(np.sum(np.einsum("ij,ij->i", q, q) / m)) + V
    if form == "legendre":
        return kinetic_energy(state, "relational") + V
    raise ValueError(f"unknown hamiltonian form {form!r}")


def random_state(rng: np.random.Generator, n: int, box=10.0, mass_range=(0.1, 10.0), time=0.0):
    """Random state: components uniform in [-box, box], masses uniform in ``mass_range``."""
    m = rng.uniform(*mass_range, size=n)
    x = rng.uniform(-box, box, size=(n, 3))
    v = rng.uniform(-box, box, size=(n, 3))
    return SystemState(m, x, v, time)
