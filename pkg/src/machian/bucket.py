"""Gravitational bucket experiment: a binary inside a distant rigid shell.

Two point masses m orbit their CM at radius R; the distant matter is an
isotropic shell with moment of inertia I0. In the CM frame the balance between
gravity and the Machian centrifugal term fixes the binary's orbital frequency
relative to the shell:

    G m / 4R^2 = Omega_b^2 R (1 + 2 m R^2 / I0)^-2

equivalently Kepler's law with G_eff = G (1 + 2 m R^2 / I0)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import relational as rel
from .dynamics import Trajectory, rk4_step
from .potentials import PairPotential


@dataclass(frozen=True)
class BucketConfig:
    """Binary mass ``m``, orbital radius ``R``, gravity ``G``, shell inertia ``I0``.

    ``infinite_shell=True`` is the explicit I0 -> infinity limit (``I0`` is then
    ignored). ``I0 = 0`` is the no-shell limit.
    """

    m: float = 1.0
    R: float = 1.0
    G: float = 1.0
    I0: float = 100.0
    infinite_shell: bool = False

    def __post_init__(self):
        if not (self.m > 0 and self.R > 0 and self.G > 0):
            raise ValueError("m, R and G must be positive")
        if not self.infinite_shell:
            if not (math.isfinite(self.I0) and self.I0 >= 0):
                raise ValueError("I0 must be finite and non-negative; use infinite_shell for the limit")

    @classmethod
    def with_I0(cls, base: "BucketConfig", I0) -> "BucketConfig":
        if I0 is None or (isinstance(I0, float) and math.isinf(I0)):
            return cls(base.m, base.R, base.G, 0.0, infinite_shell=True)
        return cls(base.m, base.R, base.G, float(I0), infinite_shell=False)

    @property
    def coupling(self) -> float:
        """2 m R^2 / I0, zero for the infinite shell."""
        if self.infinite_shell:
            return 0.0
        if self.I0 == 0:
            return math.inf
        return 2.0 * self.m * self.R**2 / self.I0

    @property
    def newtonian_frequency(self) -> float:
        return math.sqrt(self.G * self.m / (4.0 * self.R**3))


class BucketBalance(NamedTuple):
    omega_b: float
    omega: float

    @property
    def has_equilibrium(self) -> bool:
        return math.isfinite(self.omega_b)


def bucket_balance(cfg: BucketConfig) -> BucketBalance:
    """Orbital frequency relative to the shell (Omega_b) and the CM-frame Omega.

    Without a shell there is no centrifugal term at all and no finite
    equilibrium exists; this is reported as ``omega_b = inf``, ``omega = 0``.
    """
    if not cfg.infinite_shell and cfg.I0 == 0:
        return BucketBalance(math.inf, 0.0)
    w0 = cfg.newtonian_frequency
    c = cfg.coupling
    omega_b = (1.0 + c) * w0
    if cfg.infinite_shell:
        return BucketBalance(omega_b, omega_b)
    return BucketBalance(omega_b, omega_b * cfg.I0 / (cfg.I0 + 2.0 * cfg.m * cfg.R**2))


def g_eff(cfg: BucketConfig) -> float:
    """Effective gravitational constant G (1 + 2 m R^2 / I0)^2."""
    if not cfg.infinite_shell and cfg.I0 == 0:
        raise ValueError("G_eff needs I0 > 0")
    return cfg.G * (1.0 + cfg.coupling) ** 2


class BucketRow(NamedTuple):
    I0: float
    omega_b: float
    omega: float
    G_eff: float


def bucket_sweep(cfg_base: BucketConfig, I0_values: Sequence) -> list:
    """One :class:`BucketRow` per shell inertia; ``inf``/``None`` means the infinite shell."""
    rows = []
    for I0 in I0_values:
        cfg = BucketConfig.with_I0(cfg_base, I0)
        if not cfg.infinite_shell and cfg.I0 <= 0:
            raise ValueError("sweep values must be positive")
        bal = bucket_balance(cfg)
        rows.append(BucketRow(math.inf if cfg.infinite_shell else cfg.I0, bal.omega_b, bal.omega, g_eff(cfg)))
    return rows


@dataclass(frozen=True, eq=False)
class BucketRun:
    """Outcome of a ring-shell simulation.

    ``state`` has columns x1(3), x2(3), v1(3), v2(3), ring angle, ring rate.
    """

    cfg: BucketConfig
    n_shell: int
    ring_radius: float
    times: np.ndarray
    state: np.ndarray
    relative_frequency: float
    predicted_frequency: float
    max_abs_J: float
    collapsed: bool

    @property
    def relative_error(self) -> float:
        return abs(self.relative_frequency - self.predicted_frequency) / self.predicted_frequency

    def ring_positions(self, k: int):
        theta = self.state[k, 12] + 2.0 * np.pi * np.arange(self.n_shell) / self.n_shell
        return self.ring_radius * np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)

    def as_trajectory(self) -> Trajectory:
        """The binary plus ring as N point bodies (ring omitted when massless)."""
        m = self.cfg.m
        with_ring = not self.cfg.infinite_shell and self.cfg.I0 > 0
        T = self.times.size
        n = 2 + (self.n_shell if with_ring else 0)
        X = np.zeros((T, n, 3))
        V = np.zeros((T, n, 3))
        X[:, 0], X[:, 1] = self.state[:, 0:3], self.state[:, 3:6]
        V[:, 0], V[:, 1] = self.state[:, 6:9], self.state[:, 9:12]
        masses = [m, m]
        if with_ring:
            ring_mass = self.cfg.I0 / (self.n_shell * self.ring_radius**2)
            masses += [ring_mass] * self.n_shell
            for k in range(T):
                P = self.ring_positions(k)
                X[k, 2:] = P
                V[k, 2:] = np.cross([0.0, 0.0, self.state[k, 13]], P)
        dt = float(self.times[1] - self.times[0]) if T > 1 else 1.0
        return Trajectory(
            self.times, np.array(masses), X, V, dt, "rk4-rigid-ring", PairPotential.gravity(self.cfg.G),
            ("bucket: rigid ring, ring self-gravity ignored",),
        )


def _ring_forces(xb, ring, ring_mass, mb, G):
    """Gravitational force of every ring point on each binary body, shape (2, n, 3)."""
    d = ring[None, :, :] - xb[:, None, :]
    r3 = np.linalg.norm(d, axis=2) ** 3
    return G * mb * ring_mass * d / r3[:, :, None]


def simulate_bucket(
    cfg: BucketConfig,
    n_shell: int = 64,
    ring_radius: float = 100.0,
    dt: Optional[float] = None,
    steps: Optional[int] = None,
    orbits: float = 4.0,
    ring_gravity: bool = True,
) -> BucketRun:
    """Integrate the binary and a rigid counter-rotating ring with total J = 0.

    The ring is ``n_shell`` equal point masses at ``ring_radius`` with moment of
    inertia I0 about z. Its points interact with the binary only (toggle with
    ``ring_gravity``); the ring turns rigidly under the binary's torque and its
    centre stays at the origin. The returned frequency is the slope of the
    binary's orbital phase measured against the ring.
    """
    if n_shell < 8:
        raise ValueError("n_shell must be at least 8")
    if cfg.infinite_shell:
        raise ValueError("the dynamic cross-check needs a finite shell")
    m, R, G, I0 = cfg.m, cfg.R, cfg.G, cfg.I0
    no_shell = I0 == 0
    ring_mass = 0.0 if no_shell else I0 / (n_shell * ring_radius**2)
    base = 2.0 * np.pi * np.arange(n_shell) / n_shell
    use_ring = ring_gravity and not no_shell

    def ring_at(theta):
        a = theta + base
        return ring_radius * np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=1)

    def rhs(t, y):
        x1, x2 = y[0:3], y[3:6]
        d = x2 - x1
        f12 = G * m * m * d / np.linalg.norm(d) ** 3
        f = np.array([f12, -f12])
        torque = 0.0
        if use_ring:
            ring = ring_at(y[12])
            fr = _ring_forces(np.array([x1, x2]), ring, ring_mass, m, G)
            f = f + fr.sum(axis=1)
            torque = -np.sum(np.cross(ring[None, :, :], fr)[..., 2])
        out = np.empty_like(y)
        out[0:6] = y[6:12]
        out[6:12] = (f / m).ravel()
        out[12] = y[13]
        out[13] = torque / I0 if not no_shell else 0.0
        return out

    x1 = np.array([R, 0.0, 0.0])
    if no_shell:
        w_bin = 0.0
    else:
        a_out = 0.0
        if use_ring:
            fr = _ring_forces(np.array([x1, -x1]), ring_at(0.0), ring_mass, m, G)
            a_out = fr[0].sum(axis=0)[0] / m
        w_bin = math.sqrt((G * m / (4.0 * R**2) - a_out) / R)
    w_ring = 0.0 if no_shell else -2.0 * m * R**2 * w_bin / I0
    y = np.concatenate([x1, -x1, [0.0, w_bin * R, 0.0], [0.0, -w_bin * R, 0.0], [0.0, w_ring]])

    period = 2.0 * math.pi / cfg.newtonian_frequency
    if dt is None:
        dt = period / 2000.0
    if steps is None:
        steps = int(round(orbits * period / dt))
    ys = [y]
    collapsed = False
    for k in range(steps):
        y = rk4_step(rhs, y, k * dt, dt)
        ys.append(y)
        if np.linalg.norm(y[0:3] - y[3:6]) < 0.2 * R:
            collapsed = True
            break
    Y = np.array(ys)
    times = dt * np.arange(Y.shape[0])
    phase = np.unwrap(np.arctan2(Y[:, 1], Y[:, 0])) - Y[:, 12]
    slope = float(np.polyfit(times, phase, 1)[0]) if Y.shape[0] > 2 else 0.0

    Jb = m * (np.cross(Y[:, 0:3], Y[:, 6:9]) + np.cross(Y[:, 3:6], Y[:, 9:12]))[:, 2]
    J = Jb + I0 * Y[:, 13]
    bal = bucket_balance(cfg)
    return BucketRun(
        cfg, n_shell, ring_radius, times, Y, slope, bal.omega_b, float(np.max(np.abs(J))), collapsed
    )


def bucket_simulation(cfg: BucketConfig, n_shell: int = 64, ring_radius: float = 100.0, dt=None, steps=None) -> float:
    """Measured binary frequency relative to the ring."""
    return simulate_bucket(cfg, n_shell, ring_radius, dt, steps).relative_frequency


def weak_equivalence_slope(cfg: BucketConfig, dm: float = 1e-6) -> float:
    """Centred estimate of dG_eff/dm at fixed R and I0."""
    lo = BucketConfig(cfg.m - dm, cfg.R, cfg.G, cfg.I0, cfg.infinite_shell)
    hi = BucketConfig(cfg.m + dm, cfg.R, cfg.G, cfg.I0, cfg.infinite_shell)
    return (g_eff(hi) - g_eff(lo)) / (2 * dm)


def binary_state(cfg: BucketConfig) -> rel.SystemState:
    """The bare binary at rest in its orbit plane (for relational checks)."""
    return rel.SystemState([cfg.m, cfg.m], [[cfg.R, 0, 0], [-cfg.R, 0, 0]], np.zeros((2, 3)))
