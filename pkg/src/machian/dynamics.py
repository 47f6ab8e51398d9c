"""Time evolution and gauge checks for the Mach-Newton equation of motion.

Integration is performed in the Newtonian gauge (CM at rest, Omega = 0), where
the equation of motion reduces to m_i a_i = -grad_i V. Every other frame is
obtained by dressing a trajectory with a time-dependent translation/rotation
(:class:`GaugePath`); the full Mach-Newton equation is then checked as a
residual identity along the dressed trajectory with :func:`eom_residual`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from . import relational as rel
from .errors import InsufficientSamples, StepRejected
from .potentials import PairPotential


def rk4_step(rhs, y, t, dt):
    """One classical fourth-order Runge-Kutta step for ``y' = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _skew(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def rotation_about(axis_angle):
    """Rotation matrix exp([a]x) for the rotation vector ``axis_angle`` (Rodrigues)."""
    a = np.asarray(axis_angle, dtype=float)
    theta = np.linalg.norm(a)
    if theta == 0.0:
        return np.eye(3)
    K = _skew(a / theta)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


_ZERO = np.zeros(3)


@dataclass(frozen=True)
class GaugePath:
    """Time-dependent rigid translation xi(t) and rotation R(t).

    ``omega(t)`` is the space-frame angular velocity, the axial vector of
    dR/dt R^T. Constant Galilean symmetries are the special case of a linear
    ``xi`` and constant ``R``.
    """

    xi: Callable[[float], np.ndarray] = lambda t: _ZERO
    xi_dot: Callable[[float], np.ndarray] = lambda t: _ZERO
    rotation: Callable[[float], np.ndarray] = lambda t: np.eye(3)
    omega: Callable[[float], np.ndarray] = lambda t: _ZERO
    label: str = "identity"

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def translation(cls, offset, velocity=(0.0, 0.0, 0.0)):
        c = np.asarray(offset, dtype=float)
        u = np.asarray(velocity, dtype=float)
        return cls(xi=lambda t: c + u * t, xi_dot=lambda t: u, label="translation")

    @classmethod
    def uniform_rotation(cls, omega, angle0=(0.0, 0.0, 0.0)):
        w = np.asarray(omega, dtype=float)
        R0 = rotation_about(angle0)
        return cls(
            rotation=lambda t: rotation_about(w * t) @ R0,
            omega=lambda t: w,
            label="uniform_rotation",
        )

    @classmethod
    def euler(cls, alpha, beta, gamma, xi=None, xi_dot=None, label="euler"):
        """Rotation R = Rz(alpha) Ry(beta) Rx(gamma).

        Each angle argument is a pair ``(f, f_dot)`` of callables of time.
        """
        (a, da), (b, db), (g, dg) = alpha, beta, gamma
        ez, ey, ex = np.array([0.0, 0, 1]), np.array([0.0, 1, 0]), np.array([1.0, 0, 0])

        def rot(t):
            return _rz(a(t)) @ _ry(b(t)) @ _rx(g(t))

        def om(t):
            Rz = _rz(a(t))
            return da(t) * ez + db(t) * (Rz @ ey) + dg(t) * (Rz @ _ry(b(t)) @ ex)

        return cls(
            xi=xi or (lambda t: _ZERO),
            xi_dot=xi_dot or (lambda t: _ZERO),
            rotation=rot,
            omega=om,
            label=label,
        )

    @classmethod
    def random(cls, rng: np.random.Generator, rate=0.5, shift=2.0, frequency=1.0):
        """Smooth random path: linear-plus-sinusoid translation and Euler angles."""
        c0, c1, c2 = (rng.uniform(-shift, shift, 3) for _ in range(3))
        fx = rng.uniform(0.2, 1.0, 3) * frequency
        px = rng.uniform(0, 2 * np.pi, 3)

        def xi(t):
            return c0 + c1 * t + c2 * np.sin(fx * t + px)

        def xi_dot(t):
            return c1 + c2 * fx * np.cos(fx * t + px)

        def angle():
            a0 = rng.uniform(-np.pi, np.pi)
            a1 = rng.uniform(-rate, rate)
            a2 = rng.uniform(-rate, rate)
            f = rng.uniform(0.2, 1.0) * frequency
            p = rng.uniform(0, 2 * np.pi)
            return (
                lambda t: a0 + a1 * t + a2 * np.sin(f * t + p),
                lambda t: a1 + a2 * f * np.cos(f * t + p),
            )

        return cls.euler(angle(), angle(), angle(), xi=xi, xi_dot=xi_dot, label="random")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled states of a fixed set of bodies.

    ``positions``/``velocities`` have shape (T, N, 3); ``notes`` records the
    gauge transformations applied to produce the trajectory.
    """

    times: np.ndarray
    masses: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    dt: float
    method: str = "rk4"
    potential: Optional[PairPotential] = None
    notes: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("times must be a non-empty 1-d array")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        shape = (t.size, np.size(self.masses), 3)
        for name in ("positions", "velocities"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    @property
    def potential_descriptor(self) -> str:
        return self.potential.describe() if self.potential is not None else "none"

    def state(self, k: int) -> rel.SystemState:
        return rel.SystemState(self.masses, self.positions[k], self.velocities[k], self.times[k])

    @property
    def samples(self) -> Iterator[tuple]:
        for k in range(len(self)):
            yield self.times[k], self.state(k)

    def with_arrays(self, positions, velocities, note=None) -> "Trajectory":
        notes = self.notes + ((note,) if note else ())
        return Trajectory(
            self.times, self.masses, positions, velocities, self.dt, self.method, self.potential, notes
        )


def _accelerations(masses, potential):
    def rhs(t, y):
        n = masses.size
        x = y[: 3 * n].reshape(n, 3)
        v = y[3 * n :]
        i, j = np.triu_indices(n, 1)
        f = np.zeros((n, 3))
        if n > 1:
            grad = potential.pair_gradients(x[i] - x[j], masses[i], masses[j])
            np.add.at(f, i, -grad)
            np.add.at(f, j, grad)
        return np.concatenate([v, (f / masses[:, None]).ravel()])

    return rhs


def to_newtonian_gauge(state: rel.SystemState):
    """Move ``state`` to CM rest at the origin with Omega removed.

    Returns the transformed state and a list of notes describing what changed.
    """
    f = state.frame
    notes = []
    x = f.x_ic
    v = f.v_ic.copy()
    if np.any(f.x_c != 0.0):
        notes.append(f"shifted CM to origin (x_c={f.x_c.tolist()})")
    if np.any(f.u_c != 0.0):
        notes.append(f"removed CM velocity (u_c={f.u_c.tolist()})")
    if np.linalg.norm(f.Omega) > 0.0:
        v = v - np.cross(f.Omega, x)
        notes.append(f"removed rigid rotation rate (Omega={f.Omega.tolist()})")
    return state.replace(positions=x, velocities=v), notes


def integrate_newtonian_gauge(
    state0: rel.SystemState,
    potential: PairPotential,
    dt: float,
    steps: int,
    stop: Optional[Callable[[rel.SystemState], bool]] = None,
) -> Trajectory:
    """Fixed-step RK4 integration of m_i a_i = -grad_i V in the Newtonian gauge.

    The initial state is first gauge-transformed to CM rest with Omega = 0.
    ``stop`` is evaluated after every step; integration ends once it returns
    True (that sample is kept).
    """
    if dt <= 0 or steps < 0:
        raise ValueError("dt must be positive and steps non-negative")
    s0, notes = to_newtonian_gauge(state0)
    m = s0.masses
    n = m.size
    rhs = _accelerations(m, potential)
    y = np.concatenate([s0.positions.ravel(), s0.velocities.ravel()])
    t0 = s0.time
    ys = [y]
    for k in range(steps):
        y = rk4_step(rhs, y, t0 + k * dt, dt)
        if not np.all(np.isfinite(y)):
            raise StepRejected(f"non-finite state after step {k + 1}")
        ys.append(y)
        if stop is not None:
            if stop(rel.SystemState(m, y[: 3 * n].reshape(n, 3), y[3 * n :].reshape(n, 3), t0 + (k + 1) * dt)):
                break
    Y = np.array(ys)
    T = Y.shape[0]
    return Trajectory(
        t0 + dt * np.arange(T),
        m,
        Y[:, : 3 * n].reshape(T, n, 3),
        Y[:, 3 * n :].reshape(T, n, 3),
        dt,
        "rk4",
        potential,
        tuple(notes),
    )


def apply_gauge(traj: Trajectory, gauge: GaugePath) -> Trajectory:
    """Dress ``traj`` with x -> R x + xi, v -> R v + omega x (R x) + xi_dot."""
    X = np.empty_like(traj.positions)
    V = np.empty_like(traj.velocities)
    for k, t in enumerate(traj.times):
        R = gauge.rotation(t)
        w = gauge.omega(t)
        Rx = traj.positions[k] @ R.T
        X[k] = Rx + gauge.xi(t)
        V[k] = traj.velocities[k] @ R.T + np.cross(w, Rx) + gauge.xi_dot(t)
    return traj.with_arrays(X, V, note=f"gauge:{gauge.label}")


@dataclass(frozen=True)
class EomResidual:
    index: int
    time: float
    per_body: np.ndarray
    norms: np.ndarray

    @property
    def max_norm(self) -> float:
        return float(np.max(self.norms))


_FIRST_DERIV = {
    2: (np.array([-1.0, 1.0]) / 2.0, (-1, 1)),
    4: (np.array([1.0, -8.0, 8.0, -1.0]) / 12.0, (-2, -1, 1, 2)),
}


def eom_residual(traj: Trajectory, index: int, order: int = 4, potential=None) -> EomResidual:
    """Per-body residual of the Mach-Newton equation at sample ``index``.

    r_i = m_i a_ic + grad_i V - m_i [dOmega/dt x x_ic + 2 Omega x v_ic - Omega x (Omega x x_ic)]

    a_ic and dOmega/dt are centred finite differences of the sampled v_ic and
    Omega, of accuracy ``order`` (2 or 4).
    """
    if order not in _FIRST_DERIV:
        raise ValueError("order must be 2 or 4")
    coef, offsets = _FIRST_DERIV[order]
    reach = max(offsets)
    if not reach <= index <= len(traj) - 1 - reach:
        raise InsufficientSamples(
            f"index {index} needs {reach} neighbours on each side in a trajectory of {len(traj)}"
        )
    potential = potential if potential is not None else (traj.potential or PairPotential.none())
    m = traj.masses
    frames = {o: traj.state(index + o).frame for o in offsets + (0,)}
    dt = traj.dt
    acc = sum(c * frames[o].v_ic for c, o in zip(coef, offsets)) / dt
    omega_dot = sum(c * frames[o].Omega for c, o in zip(coef, offsets)) / dt
    f0 = frames[0]
    W, x, v = f0.Omega, f0.x_ic, f0.v_ic
    forces = rel.potential_forces(traj.state(index), potential)
    inertial = (
        np.cross(omega_dot, x) + 2.0 * np.cross(W, v) - np.cross(W, np.cross(W, x))
    )
    r = m[:, None] * acc - forces - m[:, None] * inertial
    return EomResidual(index, float(traj.times[index]), r, np.linalg.norm(r, axis=1))


def eom_residual_series(traj: Trajectory, order: int = 4, potential=None, indices=None):
    """Maximum per-body residual norm at every admissible (or listed) index."""
    reach = max(_FIRST_DERIV[order][1])
    if indices is None:
        indices = range(reach, len(traj) - reach)
    return np.array([eom_residual(traj, k, order, potential).max_norm for k in indices])


@dataclass(frozen=True)
class GaugeVariation:
    dT: float
    dT_cm: float
    dT_rel: float
    predicted_dT: float
    predicted_dT_cm: float


def lagrangian_gauge_variation(state: rel.SystemState, xi_dot, omega, a=None) -> GaugeVariation:
    """First-order variation of T, T_cm and T* under an infinitesimal gauge step.

    Applies x -> x + a x x, v -> v + xi_dot + omega x x + a x v and returns the
    measured differences next to the first-order predictions
    xi_dot . P + omega . L_abs (for T) and omega . J (for T_cm).
    """
    xi_dot = np.asarray(xi_dot, dtype=float)
    w = np.asarray(omega, dtype=float)
    a = np.zeros(3) if a is None else np.asarray(a, dtype=float)
    x, v = state.positions, state.velocities
    moved = state.replace(
        positions=x + np.cross(a, x), velocities=v + xi_dot + np.cross(w, x) + np.cross(a, v)
    )
    levels = [rel.kinetic_energy(s, lvl) for lvl in ("absolute", "cm", "relational") for s in (moved, state)]
    P = rel.total_momentum(state)
    L_abs = np.einsum("i,ij->j", state.masses, np.cross(x, v))
    return GaugeVariation(
        levels[0] - levels[1],
        levels[2] - levels[3],
        levels[4] - levels[5],
        float(xi_dot @ P + w @ L_abs),
        float(w @ state.frame.J),
    )


def energy_drift(traj: Trajectory, potential=None, floor: float = 1e-12) -> float:
    """max_t |H(t) - H(0)| / max(|H(0)|, floor) along a trajectory."""
    if len(traj) < 2:
        raise InsufficientSamples("energy drift needs at least two samples")
    potential = potential if potential is not None else (traj.potential or PairPotential.none())
    H = np.array([rel.hamiltonian(traj.state(k), potential) for k in range(len(traj))])
    return float(np.max(np.abs(H - H[0])) / max(abs(H[0]), floor))


def machian_acceleration(state: rel.SystemState, i: int, omega_dot, potential=None, omega=None):
    """Right-hand side of the Mach-Newton equation divided by m_i, for body ``i``.

    ``omega`` defaults to the state's own Omega; ``omega_dot`` must be supplied
    since it depends on neighbouring instants.
    """
    potential = potential if potential is not None else PairPotential.gravity()
    f = state.frame
    W = f.Omega if omega is None else np.asarray(omega, dtype=float)
    Wd = np.asarray(omega_dot, dtype=float)
    x, v = f.x_ic[i], f.v_ic[i]
    force = rel.potential_forces(state, potential)[i] / state.masses[i]
    return force + np.cross(Wd, x) + 2.0 * np.cross(W, v) - np.cross(W, np.cross(W, x))


def machian_gravity_acceleration(state: rel.SystemState, i: int, omega_dot, G: float = 1.0, omega=None):
    """Mach-Newton acceleration of body ``i`` under Newtonian gravity."""
    return machian_acceleration(state, i, omega_dot, PairPotential.gravity(G), omega)

