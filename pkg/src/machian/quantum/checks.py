"""Numerical checks of the Machian operators: hermiticity, commutators, Ehrenfest
relations, separability and scaling with the background inertia."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .evolution import evolve
from .grid import Grid, Wavefunction, gaussian_packet
from .operators import LinearOperator, QuantumSystem, operators_for

EHRENFEST_VARIANTS = ("exact", "left", "symmetric", "none")


def hermiticity_residual(op: LinearOperator, phi: Wavefunction, psi: Wavefunction) -> float:
    """|<phi|A psi> - <A phi|psi>| / max(||A phi|| ||psi||, ||phi|| ||A psi||)."""
    a_psi, a_phi = op(psi), op(phi)
    diff = abs(phi.inner(a_psi) - a_phi.inner(psi))
    scale = max(a_phi.norm * psi.norm, phi.norm * a_psi.norm)
    return diff / scale if scale > 0 else diff


def linearity_residual(op: LinearOperator, phi: Wavefunction, psi: Wavefunction, a: complex, b: complex) -> float:
    lhs = op(phi * a + psi * b)
    rhs = op(phi) * a + op(psi) * b
    scale = abs(a) * op(phi).norm + abs(b) * op(psi).norm
    return (lhs - rhs).norm / scale if scale > 0 else (lhs - rhs).norm


def random_probe(grid: Grid, rng: np.random.Generator, n_packets: int = 3, width_range=(0.35, 0.6),
                 k_max: float = 1.5) -> Wavefunction:
    """A normalised superposition of random Gaussians sharing the central region of the box."""
    amp = np.zeros(grid.shape, dtype=complex)
    for _ in range(n_packets):
        width = rng.uniform(*width_range)
        room = max(grid.box_half_width - 5.0 * width, 0.0)
        center = rng.uniform(-room, room, grid.dims)
        k0 = rng.uniform(-k_max, k_max, grid.dims)
        coeff = rng.standard_normal() + 1j * rng.standard_normal()
        amp += coeff * gaussian_packet(grid, center, width, k0).amplitudes
    return Wavefunction(grid, amp).normalized()


def machian_fraction(psi: Wavefunction, system: QuantumSystem, particle: int = 0, component: int = 0) -> float:
    """||(P - p) psi|| / ||p psi||."""
    ops = operators_for(system, psi.grid)
    p = ops.momentum(particle, component, psi.amplitudes)
    P = ops.canonical_momentum(particle, component, psi.amplitudes)
    return float(np.linalg.norm(P - p) / np.linalg.norm(p))


def _levi(n, k):
    """eps_{n k z} for in-plane indices."""
    return 0.0 if n == k else (1.0 if (n, k) == (0, 1) else -1.0)


def commutator_residual(kind: str, indices: Sequence[int], psi: Wavefunction, system: QuantumSystem,
                        constrained: bool = True) -> float:
    """Normalised mismatch between a commutator and its first-order closed form.

    ``indices = (j, k, i, n)`` selects [x_j^k, P_i^n] (``kind="x_P"``) or
    [p_j^k, P_i^n] (``kind="p_P"``). The closed forms are

        [x_j^k, P_i^n] = i hbar [ K_ji d_kn - m_i g e_n(i) e_k(j) ]
        [p_j^k, P_i^n] = -hbar^2 m_i g [ e_n(i) f_k(j) + K_ij (eps_nkz lam + d_kn / 2) ]

    with f_k(j) = eps_zkb grad_j^b and lam = sum_l (x_l x grad_l)_z. In CM
    coordinates the canonical pairing is K_ij = d_ij - m_j / M; ``constrained=False``
    uses the free-particle d_ij instead. The first form is exact; the second
    drops gradients of g, which are second order in the inverse inertia.
    The x_P residual is scaled by hbar ||psi||, the p_P residual by ||p psi||^2 / ||psi||.
    """
    j, k, i, n = indices
    ops = operators_for(system, psi.grid)
    f = psi.amplitudes
    hb = system.hbar
    K = ops.C if constrained else np.eye(system.n_particles)
    g = ops.g
    m_i = system.masses[i]
    P = lambda u: ops.canonical_momentum(i, n, u)
    if kind == "x_P":
        x = ops.X[j][k]
        lhs = x * P(f) - P(x * f)
        rhs = 1j * hb * ((K[j, i] if k == n else 0.0) - m_i * g * ops.e[i][n] * ops.e[j][k]) * f
        scale = hb * np.linalg.norm(f)
    elif kind == "p_P":
        p = lambda u: ops.momentum(j, k, u)
        lhs = p(P(f)) - P(p(f))
        fk = ops.grad(j, 1, f) if k == 0 else -ops.grad(j, 0, f)
        rhs = ops.e[i][n] * fk
        if K[i, j] != 0.0:
            rhs = rhs + K[i, j] * (_levi(n, k) * ops.lam(f) + (0.5 * f if k == n else 0.0))
        rhs = -hb**2 * m_i * g * rhs
        scale = np.linalg.norm(ops.momentum(j, k, f)) ** 2 / np.linalg.norm(f)
    else:
        raise ValueError("kind must be 'x_P' or 'p_P'")
    return float(np.linalg.norm(lhs - rhs) / scale)


@dataclass(frozen=True)
class EhrenfestResult:
    """d<x_j^k>/dt from the evolution versus each predicted right-hand side."""

    particle: int
    component: int
    measured: float
    predicted: Dict[str, float]
    scale: float
    time: float

    def residual(self, variant: str = "exact") -> float:
        return abs(self.measured - self.predicted[variant]) / self.scale

    @property
    def residuals(self) -> Dict[str, float]:
        return {v: self.residual(v) for v in self.predicted}


_CENTRAL = {1: np.array([-0.5, 0.0, 0.5]), 2: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0}


def ehrenfest_predictions(psi: Wavefunction, system: QuantumSystem, particle: int, component: int) -> Dict[str, float]:
    """Predicted d<x_j^k>/dt under each treatment of the Machian correction.

    ``none``: <P_j^k>/m_j. ``left``: adds Re<e_k(j) g Lambda>. ``symmetric``: adds
    <(e_k g Lambda + Lambda e_k g)/2>. ``exact``: adds the full symmetrised
    sum over i, n of {g e_n(i) e_k(j), P_i^n}/2 with a minus sign, which is
    what the composed Hamiltonian implies.
    """
    ops = operators_for(system, psi.grid)
    f = psi.amplitudes
    dv = psi.grid.cell_volume
    j, k = particle, component
    ev = lambda u: complex(np.vdot(f, u) * dv)
    base = ev(ops.canonical_momentum(j, k, f)).real / system.masses[j]
    eg = ops.e[j][k] * ops.g
    lam_f = ops.angular(f)
    left = ev(eg * lam_f).real
    sym = 0.5 * (ev(eg * lam_f) + ev(ops.angular(eg * f))).real
    exact = -ev(ops.machian_velocity_term(j, k, f)).real
    return {"none": base, "left": base + left, "symmetric": base + sym, "exact": base + exact}


def ehrenfest_check(psi: Wavefunction, system: QuantumSystem, dt: float, window: int = 2, particle: int = 0,
                    component: int = 0, mode: Optional[str] = None, method: str = "cn") -> EhrenfestResult:
    """Compare centred differences of <x_j^k> along an evolution with the predictions.

    The state is evolved for ``2 * window`` steps; the derivative is taken at
    the middle sample with a 5-point stencil (3-point for ``window=1``) and all
    predictions are evaluated on the middle state. The scale is
    sqrt(<(P_j^k)^2>) / m_j.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    ops = operators_for(system, psi.grid)
    x = ops.X[particle][component]
    dv = psi.grid.cell_volume
    xs = []
    states = {}

    def observe(step, state):
        a = state.amplitudes
        xs.append(float(np.vdot(a, x * a).real * dv))
        if step == window:
            states["mid"] = state

    evolve(psi, system, dt, 2 * window, mode=mode, method=method, observer=observe)
    order = 2 if window >= 2 else 1
    stencil = _CENTRAL[order]
    w = (len(stencil) - 1) // 2
    samples = np.array(xs[window - w: window + w + 1])
    measured = float(stencil @ samples / dt)
    mid = states["mid"]
    predicted = ehrenfest_predictions(mid, system, particle, component)
    Pf = ops.canonical_momentum(particle, component, mid.amplitudes)
    scale = float(np.sqrt(np.vdot(Pf, Pf).real * dv)) / system.masses[particle]
    return EhrenfestResult(particle, component, measured, predicted, scale, mid.time)


def schmidt_rank(amplitudes: np.ndarray, rtol: float = 1e-10) -> int:
    """Number of singular values of the (axis 0) x (rest) reshaping above rtol * s_max."""
    a = np.asarray(amplitudes).reshape(amplitudes.shape[0], -1)
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def separability_ranks(system: QuantumSystem, grid: Grid, width: float = 0.5, rtol: float = 1e-10):
    """Schmidt ranks of H psi for a product state psi(y) = f(y_x) h(y_y), Machian on and off.

    With the Machian terms off the free kinetic operator keeps the rank at 2.
    """
    off_center = np.full(grid.dims, 0.3)
    psi = gaussian_packet(grid, off_center, width, np.full(grid.dims, 0.7))
    on = operators_for(system.replace(machian=True), grid).hamiltonian(psi.amplitudes)
    off = operators_for(system.replace(machian=False), grid).hamiltonian(psi.amplitudes)
    return schmidt_rank(on, rtol), schmidt_rank(off, rtol)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def truncation_gap(psi: Wavefunction, system: QuantumSystem) -> float:
    """||(H_composed - H_truncated) psi|| / ||H_composed psi||."""
    ops = operators_for(system, psi.grid)
    a = ops.hamiltonian(psi.amplitudes, "composed")
    b = ops.hamiltonian(psi.amplitudes, "truncated")
    return float(np.linalg.norm(a - b) / np.linalg.norm(a))


def shell_scaling(psi: Wavefunction, radii: Sequence[float], shell_mass: float = 1.0, base: Optional[QuantumSystem] = None,
                  quantity: str = "truncation"):
    """Evaluate a Machian quantity as the distant shell is dilated; returns (values, slope vs radius)."""
    base = base or QuantumSystem()
    values = []
    for L in radii:
        s = base.replace(background_inertia=2.0 * shell_mass * L**2 / 3.0)
        if quantity == "truncation":
            values.append(truncation_gap(psi, s))
        elif quantity == "machian":
            values.append(machian_fraction(psi, s))
        elif quantity == "p_P":
            values.append(commutator_residual("p_P", (0, 0, 0, 1), psi, s))
        else:
            raise ValueError(f"unknown quantity {quantity!r}")
    return values, loglog_slope(radii, values)
