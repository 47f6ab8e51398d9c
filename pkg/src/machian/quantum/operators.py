"""Position, momentum, canonical-momentum and Hamiltonian operators on a reduced grid.

Everything is planar. For in-plane indices the epsilon contractions in the
canonical momentum collapse onto the zz element of the inverse inertia, so the
only geometric ingredients are

* ``g`` = 1 / (I_bg + sum_{i<j} m_ij |x_ij|^2 + eps_soft), the softened zz inverse inertia,
* ``e_k(i)`` = (x_i^y, -x_i^x), the in-plane part of eps_{klz} x_i^l,
* ``Lambda`` = -i hbar sum_j (x_j x grad_j)_z, the total CM-frame angular momentum.

The symmetrised canonical momentum is

    P_i^k psi = p_i^k psi + (m_i / 2) [ e_k(i) g Lambda psi + Lambda (e_k(i) g psi) ]

CM-frame positions and gradients come from the relative vectors through
x_i = sum_a A_ia y_a and grad_i = sum_a B_ia d/dy_a.

``I_bg`` is the inertia of matter outside the quantum system, for instance a
distant static shell (see :meth:`QuantumSystem.with_shell`). It is what makes
the Machian terms small.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyOperator

from ..potentials import PairPotential
from .grid import Grid, Wavefunction

MODES = ("composed", "truncated")


@dataclass(frozen=True)
class QuantumSystem:
    """Masses, hbar, pair potential and the switches for the Machian terms.

    ``eps_soft=None`` selects the default softening min(m_ij) (2h)^2 once a grid
    is known. ``machian=False`` is the infinite-inertia limit (g = 0).
    ``drop_ordering_term`` only affects the truncated Hamiltonian: it drops the
    c-number ordering term -hbar^2 m_i g C_ii that the symmetrised operator
    produces at first order.
    """

    masses: tuple = (1.0, 1.0)
    hbar: float = 1.0
    potential: PairPotential = field(default_factory=PairPotential.none)
    eps_soft: Optional[float] = None
    background_inertia: float = 0.0
    machian: bool = True
    hamiltonian_mode: str = "composed"
    drop_ordering_term: bool = False

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "masses", masses)
        if len(masses) not in (2, 3):
            raise ValueError("quantum systems have 2 or 3 bodies")
        if any(not m > 0 for m in masses):
            raise ValueError("masses must be positive")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.eps_soft is not None and self.eps_soft < 0:
            raise ValueError("eps_soft must be non-negative")
        if self.background_inertia < 0:
            raise ValueError("background_inertia must be non-negative")
        if self.hamiltonian_mode not in MODES:
            raise ValueError(f"hamiltonian_mode must be one of {MODES}")

    @classmethod
    def with_shell(cls, shell_mass: float, shell_radius: float, **kw) -> "QuantumSystem":
        """Background inertia of a thin static spherical shell, (2/3) M_s L^2."""
        if not (shell_mass > 0 and shell_radius > 0):
            raise ValueError("shell mass and radius must be positive")
        return cls(background_inertia=2.0 * shell_mass * shell_radius**2 / 3.0, **kw)

    def replace(self, **kw) -> "QuantumSystem":
        from dataclasses import replace

        return replace(self, **kw)

    @property
    def n_particles(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(sum(self.masses))

    def pair_mass(self, i: int, j: int) -> float:
        return self.masses[i] * self.masses[j] / self.total_mass

    def softening(self, grid: Grid) -> float:
        if self.eps_soft is not None:
            return self.eps_soft
        n = self.n_particles
        mij = min(self.pair_mass(i, j) for i in range(n) for j in range(i + 1, n))
        return mij * (2.0 * grid.h) ** 2


def reduced_maps(masses):
    """Matrices (A, B) with x_ic = sum_a A_ia y_a and grad_ic = sum_a B_ia d/dy_a."""
    m = np.asarray(masses, dtype=float)
    n = m.size
    upper = np.triu(np.ones((n, n - 1)))
    upper[n - 1] = 0.0
    A = upper - (m @ upper) / m.sum()
    B = np.zeros((n, n - 1))
    for a in range(n - 1):
        B[a, a] = 1.0
        B[a + 1, a] = -1.0
    return A, B


def derivative(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order centred first derivative with zero (hard-wall) padding.

    The stencil matrix is exactly antisymmetric, so -i hbar times it is
    exactly hermitian.
    """
    src = np.moveaxis(f, axis, 0)
    out = np.zeros_like(src)
    out[:-1] += 8.0 * src[1:]
    out[1:] -= 8.0 * src[:-1]
    out[:-2] -= src[2:]
    out[2:] += src[:-2]
    out *= 1.0 / (12.0 * h)
    return np.moveaxis(out, 0, axis)


class MachOperators:
    """Precomputed fields and operator actions for one (system, grid) pair.

    Methods act on raw amplitude arrays of shape ``grid.shape``; particle and
    component indices are zero-based.
    """

    def __init__(self, system: QuantumSystem, grid: Grid):
        if grid.n_particles != system.n_particles:
            raise ValueError("grid and system disagree on the number of bodies")
        self.system = system
        self.grid = grid
        self.hbar = system.hbar
        self.masses = system.masses
        n = system.n_particles
        self.A, self.B = reduced_maps(system.masses)
        self.W = self.A.T @ self.B
        self.C = self.A @ self.B.T
        self.Y = [grid.relative(a) for a in range(n - 1)]
        self.X = []
        for i in range(n):
            xs = [sum(self.A[i, a] * self.Y[a][c] for a in range(n - 1)) for c in (0, 1)]
            self.X.append(tuple(np.ascontiguousarray(x) for x in xs))
        izz = np.zeros(grid.shape)
        V = np.zeros(grid.shape)
        for i in range(n):
            for j in range(i + 1, n):
                dx = self.X[i][0] - self.X[j][0]
                dy = self.X[i][1] - self.X[j][1]
                izz += system.pair_mass(i, j) * (dx * dx + dy * dy)
                if system.potential.kind != "none":
                    V += system.potential.on_relative(np.stack([dx, dy], axis=-1), self.masses[i], self.masses[j])
        self.inertia_zz = izz
        self.eps_soft = system.softening(grid)
        if system.machian:
            self.g = 1.0 / (system.background_inertia + izz + self.eps_soft)
        else:
            self.g = np.zeros(grid.shape)
        self.V = V
        self.e = [((self.X[i][1]), (-self.X[i][0])) for i in range(n)]

    # elementary pieces

    def d(self, f, ax):
        return derivative(f, ax, self.grid.h)

    def grad(self, i, k, f):
        out = None
        for a in range(self.system.n_particles - 1):
            b = self.B[i, a]
            if b == 0.0:
                continue
            term = self.d(f, 2 * a + k)
            if b != 1.0:
                term = b * term
            out = term if out is None else out + term
        return out

    def momentum(self, i, k, f):
        return -1j * self.hbar * self.grad(i, k, f)

    def lam(self, f):
        """sum_j (x_j x grad_j)_z f, i.e. Lambda f / (-i hbar)."""
        n1 = self.system.n_particles - 1
        out = np.zeros_like(f, dtype=complex)
        for b in range(n1):
            dx = self.d(f, 2 * b)
            dy = self.d(f, 2 * b + 1)
            for a in range(n1):
                w = self.W[a, b]
                if abs(w) < 1e-15:
                    continue
                out += w * (self.Y[a][0] * dy - self.Y[a][1] * dx)
        return out

    def angular(self, f):
        return -1j * self.hbar * self.lam(f)

    def canonical_momentum(self, i, k, f, naive=False):
        p = self.momentum(i, k, f)
        if not self.system.machian:
            return p
        eg = self.e[i][k] * self.g
        m = self.masses[i]
        if naive:
            return p + m * eg * self.angular(f)
        return p + 0.5 * m * (eg * self.angular(f) + self.angular(eg * f))

    def machian_velocity_term(self, j, k, f):
        """sum_i sum_n {g e_n(i) e_k(j), P_i^n} / 2, the exact non-canonical part of m_j dx_j/dt."""
        if not self.system.machian:
            return np.zeros_like(f, dtype=complex)
        out = np.zeros_like(f, dtype=complex)
        for i in range(self.system.n_particles):
            for n in (0, 1):
                c = self.g * self.e[i][n] * self.e[j][k]
                out += 0.5 * (c * self.canonical_momentum(i, n, f) + self.canonical_momentum(i, n, c * f))
        return out

    # Hamiltonians

    def hamiltonian(self, f, mode=None):
        mode = mode or self.system.hamiltonian_mode
        if mode == "composed":
            out = self.V * f
            if self.system.n_particles == 2:
                # P_2 = -P_1 identically, so the kinetic term is P_1^2 / 2 m_12
                c = 0.5 / self.system.pair_mass(0, 1)
                for k in (0, 1):
                    out = out + c * self.canonical_momentum(0, k, self.canonical_momentum(0, k, f))
                return out
            for i, m in enumerate(self.masses):
                for k in (0, 1):
                    out = out + self.canonical_momentum(i, k, self.canonical_momentum(i, k, f)) / (2.0 * m)
            return out
        if mode == "truncated":
            return self.V * f + sum(
                self._truncated_square(i, f) / (2.0 * m) for i, m in enumerate(self.masses)
            )
        raise ValueError(f"unknown hamiltonian mode {mode!r}")

    def _truncated_square(self, i, f):
        hb2 = self.hbar**2
        grads = [self.grad(i, k, f) for k in (0, 1)]
        lap = self.grad(i, 0, grads[0]) + self.grad(i, 1, grads[1])
        if not self.system.machian:
            return -hb2 * lap
        m = self.masses[i]
        radial = self.X[i][0] * grads[0] + self.X[i][1] * grads[1]
        cross = self.e[i][0] * self.lam(grads[0]) + self.e[i][1] * self.lam(grads[1])
        out = -hb2 * (lap + 2.0 * m * self.g * (radial + cross))
        if not self.system.drop_ordering_term:
            out = out - hb2 * m * self.g * self.C[i, i] * f
        return out


@lru_cache(maxsize=16)
def operators_for(system: QuantumSystem, grid: Grid) -> MachOperators:
    return MachOperators(system, grid)


class LinearOperator:
    """A matrix-free linear map on wavefunctions of one grid.

    ``hermitian`` records a claim that tests verify; it does not change behaviour.
    """

    def __init__(self, grid: Grid, apply: Callable[[np.ndarray], np.ndarray], hermitian: bool = False,
                 name: str = ""):
        self.grid = grid
        self._apply = apply
        self.hermitian = hermitian
        self.name = name

    def apply_array(self, amplitudes: np.ndarray) -> np.ndarray:
        return self._apply(np.asarray(amplitudes, dtype=complex).reshape(self.grid.shape))

    def __call__(self, psi: Wavefunction) -> Wavefunction:
        return psi.with_amplitudes(self.apply_array(psi.amplitudes))

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.grid, lambda f: self._apply(f) + other._apply(f),
                              self.hermitian and other.hermitian, f"({self.name}+{other.name})")

    def __matmul__(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.grid, lambda f: self._apply(other._apply(f)), False,
                              f"{self.name}{other.name}")

    def scaled(self, c: complex) -> "LinearOperator":
        real = complex(c).imag == 0
        return LinearOperator(self.grid, lambda f: c * self._apply(f), self.hermitian and real,
                              f"{c}*{self.name}")

    def commutator(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.grid, lambda f: self._apply(other._apply(f)) - other._apply(self._apply(f)),
                              False, f"[{self.name},{other.name}]")

    def as_scipy(self) -> ScipyOperator:
        n = self.grid.size
        shape = self.grid.shape
        return ScipyOperator((n, n), matvec=lambda v: self._apply(v.reshape(shape)).ravel(), dtype=complex)

    def __repr__(self):
        return f"LinearOperator({self.name or '?'}, hermitian={self.hermitian})"


def identity_operator(grid: Grid) -> LinearOperator:
    return LinearOperator(grid, lambda f: f.copy(), True, "1")


def position_operator(system: QuantumSystem, grid: Grid, particle: int, component: int) -> LinearOperator:
    x = operators_for(system, grid).X[particle][component]
    return LinearOperator(grid, lambda f: x * f, True, f"x{particle + 1}{'xy'[component]}")


def momentum_operator(system: QuantumSystem, grid: Grid, particle: int, component: int) -> LinearOperator:
    ops = operators_for(system, grid)
    return LinearOperator(grid, lambda f: ops.momentum(particle, component, f), True,
                          f"p{particle + 1}{'xy'[component]}")


def canonical_momentum_operator(system: QuantumSystem, grid: Grid, particle: int, component: int,
                                naive: bool = False) -> LinearOperator:
    ops = operators_for(system, grid)
    return LinearOperator(grid, lambda f: ops.canonical_momentum(particle, component, f, naive), not naive,
                          f"P{particle + 1}{'xy'[component]}{'(naive)' if naive else ''}")


def angular_momentum_operator(system: QuantumSystem, grid: Grid) -> LinearOperator:
    ops = operators_for(system, grid)
    return LinearOperator(grid, ops.angular, True, "Lambda")


def hamiltonian_operator(system: QuantumSystem, grid: Grid, mode: Optional[str] = None) -> LinearOperator:
    ops = operators_for(system, grid)
    mode = mode or system.hamiltonian_mode
    return LinearOperator(grid, lambda f: ops.hamiltonian(f, mode), mode == "composed", f"H[{mode}]")


def apply_momentum(psi: Wavefunction, system: QuantumSystem, particle: int, component: int) -> Wavefunction:
    return psi.with_amplitudes(operators_for(system, psi.grid).momentum(particle, component, psi.amplitudes))


def apply_canonical_momentum(psi: Wavefunction, system: QuantumSystem, particle: int, component: int,
                             naive: bool = False) -> Wavefunction:
    ops = operators_for(system, psi.grid)
    return psi.with_amplitudes(ops.canonical_momentum(particle, component, psi.amplitudes, naive))


def apply_hamiltonian(psi: Wavefunction, system: QuantumSystem, mode: Optional[str] = None) -> Wavefunction:
    return psi.with_amplitudes(operators_for(system, psi.grid).hamiltonian(psi.amplitudes, mode))


def expectation(psi: Wavefunction, op: LinearOperator) -> complex:
    """<psi| op |psi> with the grid measure; psi is assumed normalised."""
    return psi.inner(op(psi))
