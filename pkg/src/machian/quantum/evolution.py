"""Time evolution: Crank-Nicolson with a matrix-free GMRES solve, RK4 for cross-checks,
and imaginary-time relaxation for ground states."""

from __future__ import annotations

import warnings
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyOperator
from scipy.sparse.linalg import cg, gmres

from ..errors import NormDriftWarning, SolverDiverged
from .grid import Wavefunction
from .operators import QuantumSystem, operators_for

NORM_DRIFT_WARN = 1e-8
RK4_STABILITY = 2.5


def spectral_radius(system: QuantumSystem, grid, mode: Optional[str] = None, iters: int = 40,
                    seed: int = 0) -> float:
    """Power-iteration estimate of the largest |eigenvalue| of the discrete Hamiltonian."""
    ops = operators_for(system, grid)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = ops.hamiltonian(v, mode)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def _cn_solver(system, grid, dt, mode, rtol, restart, maxiter):
    ops = operators_for(system, grid)
    shape = grid.shape
    a = 0.5j * dt / system.hbar
    n = grid.size

    def lhs(v):
        f = v.reshape(shape)
        return (f + a * ops.hamiltonian(f, mode)).ravel()

    A = ScipyOperator((n, n), matvec=lhs, dtype=complex)

    def step(f):
        Hf = ops.hamiltonian(f, mode)
        b = (f - a * Hf).ravel()
        guess = (f - 2.0 * a * Hf).ravel()
        x, info = gmres(A, b, x0=guess, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter)
        if info != 0:
            raise SolverDiverged(f"GMRES did not reach rtol={rtol:g} (info={info})")
        return x.reshape(shape)

    return step


def _rk4_stepper(system, grid, dt, mode):
    ops = operators_for(system, grid)
    c = -1j / system.hbar

    def rhs(f):
        return c * ops.hamiltonian(f, mode)

    def step(f):
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * dt * k1)
        k3 = rhs(f + 0.5 * dt * k2)
        k4 = rhs(f + dt * k3)
        return f + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    return step


def evolve(
    psi: Wavefunction,
    system: QuantumSystem,
    dt: float,
    steps: int,
    mode: Optional[str] = None,
    method: str = "cn",
    rtol: float = 1e-12,
    restart: int = 40,
    maxiter: int = 50,
    observer: Optional[Callable[[int, Wavefunction], None]] = None,
    max_phase: float = 50.0,
    check_spectrum: bool = True,
) -> Wavefunction:
    """Propagate ``psi`` by ``steps`` steps of size ``dt``.

    ``method="cn"`` solves (1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi by GMRES;
    ``method="rk4"`` is the explicit fallback. ``observer(k, psi_k)`` is called for
    k = 0..steps. Before stepping, a power-iteration estimate rho of the spectral
    radius must satisfy rho dt / hbar <= ``max_phase`` (CN) or the RK4 stability
    bound.
    """
    if not dt > 0 or steps < 0:
        raise ValueError("need dt > 0 and steps >= 0")
    grid = psi.grid
    if check_spectrum and steps:
        phase = spectral_radius(system, grid, mode) * dt / system.hbar
        limit = RK4_STABILITY if method == "rk4" else max_phase
        if phase > limit:
            raise ValueError(f"dt too large: spectral radius * dt / hbar = {phase:.3g} exceeds {limit:g}")
    if method == "cn":
        step = _cn_solver(system, grid, dt, mode, rtol, restart, maxiter)
    elif method == "rk4":
        step = _rk4_stepper(system, grid, dt, mode)
    else:
        raise ValueError(f"unknown method {method!r}")
    f = psi.amplitudes
    t0 = psi.time
    dv = grid.cell_volume
    n_prev = float(np.vdot(f, f).real * dv)
    if observer is not None:
        observer(0, psi)
    for k in range(1, steps + 1):
        f = step(f)
        if not np.all(np.isfinite(f)):
            raise SolverDiverged("non-finite amplitudes after a step")
        n_now = float(np.vdot(f, f).real * dv)
        if abs(n_now - n_prev) > NORM_DRIFT_WARN * max(n_prev, 1e-300):
            warnings.warn(f"norm drift {abs(n_now - n_prev):.2e} at step {k}", NormDriftWarning, stacklevel=2)
        n_prev = n_now
        if observer is not None:
            observer(k, Wavefunction(grid, f, t0 + k * dt))
    return Wavefunction(grid, f, t0 + steps * dt)


def relax_ground_state(
    psi0: Wavefunction,
    system: QuantumSystem,
    dtau: float = 0.1,
    max_steps: int = 5000,
    tol: float = 1e-13,
    mode: Optional[str] = None,
):
    """Imaginary-time relaxation by backward-Euler steps (1 + dtau H / hbar) psi' = psi.

    Each step is a conjugate-gradient solve. Returns ``(psi, energy)`` once the
    energy changes by less than ``tol`` between steps.
    """
    grid = psi0.grid
    ops = operators_for(system, grid)
    shape = grid.shape
    n = grid.size
    c = dtau / system.hbar
    A = ScipyOperator((n, n), matvec=lambda v: (v.reshape(shape) + c * ops.hamiltonian(v.reshape(shape), mode)).ravel(),
                      dtype=complex)
    f = psi0.normalized().amplitudes
    dv = grid.cell_volume
    energy = float(np.vdot(f, ops.hamiltonian(f, mode)).real * dv)
    for _ in range(max_steps):
        x, info = cg(A, f.ravel(), x0=f.ravel(), rtol=1e-13, atol=0.0, maxiter=500)
        if info != 0:
            raise SolverDiverged(f"CG did not converge (info={info})")
        f = x.reshape(shape)
        f = f / np.sqrt(np.vdot(f, f).real * dv)
        e_new = float(np.vdot(f, ops.hamiltonian(f, mode)).real * dv)
        if abs(e_new - energy) < tol * max(1.0, abs(e_new)):
            energy = e_new
            break
        energy = e_new
    return Wavefunction(grid, f, psi0.time), energy
