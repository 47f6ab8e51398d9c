"""Reduced-coordinate grids and wavefunctions.

A planar N-body wavefunction depends only on the N-1 relative vectors
y_a = x_a - x_{a+1}, so it lives on a 2(N-1)-dimensional grid. Axis ``2a + c``
holds component ``c`` (0 = x, 1 = y) of ``y_a``. Cell centres are offset by half
a cell so the coincidence point y = 0 is never sampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from ..errors import PacketTouchesWall


@dataclass(frozen=True)
class Grid:
    n_particles: int = 2
    points_per_axis: int = 128
    box_half_width: float = 3.2

    def __post_init__(self):
        if self.n_particles not in (2, 3):
            raise ValueError("n_particles must be 2 or 3")
        if self.points_per_axis < 8:
            raise ValueError("points_per_axis must be at least 8")
        if self.points_per_axis % 2:
            raise ValueError("points_per_axis must be even for the half-cell offset")
        if not self.box_half_width > 0:
            raise ValueError("box_half_width must be positive")
        if self.n_particles == 3 and self.points_per_axis > 32:
            raise ValueError("three-body grids are limited to 32 points per axis")

    @classmethod
    def from_spacing(cls, h: float, points_per_axis: int, n_particles: int = 2) -> "Grid":
        return cls(n_particles, points_per_axis, 0.5 * h * points_per_axis)

    @property
    def dims(self) -> int:
        return 2 * (self.n_particles - 1)

    @property
    def h(self) -> float:
        return 2.0 * self.box_half_width / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dims

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dims

    @property
    def cell_volume(self) -> float:
        return self.h**self.dims

    @cached_property
    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return (np.arange(n) + 0.5) * self.h - self.box_half_width

    def coordinate(self, ax: int) -> np.ndarray:
        """Coordinate along grid axis ``ax``, broadcastable to :attr:`shape`."""
        shape = [1] * self.dims
        shape[ax] = self.points_per_axis
        return self.axis.reshape(shape)

    def relative(self, a: int) -> tuple:
        """Full arrays (x, y) for relative vector ``a``."""
        return (
            np.broadcast_to(self.coordinate(2 * a), self.shape),
            np.broadcast_to(self.coordinate(2 * a + 1), self.shape),
        )

    def wall_distance(self, point: Sequence[float]) -> float:
        p = np.asarray(point, dtype=float)
        return float(np.min(self.box_half_width - np.abs(p)))


class Wavefunction:
    """Complex amplitudes on a :class:`Grid` at a given time."""

    __slots__ = ("grid", "amplitudes", "time")

    def __init__(self, grid: Grid, amplitudes, time: float = 0.0):
        amp = np.asarray(amplitudes, dtype=complex)
        if amp.shape != grid.shape:
            amp = amp.reshape(grid.shape)
        self.grid = grid
        self.amplitudes = amp
        self.time = float(time)

    def inner(self, other: "Wavefunction") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_volume)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real * self.grid.cell_volume)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm2))

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes / self.norm, self.time)

    def with_amplitudes(self, amplitudes, time: Optional[float] = None) -> "Wavefunction":
        return Wavefunction(self.grid, amplitudes, self.time if time is None else time)

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes.copy(), self.time)

    def __add__(self, other):
        return self.with_amplitudes(self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        return self.with_amplitudes(self.amplitudes - other.amplitudes)

    def __mul__(self, c):
        return self.with_amplitudes(self.amplitudes * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Wavefunction(shape={self.grid.shape}, h={self.grid.h:g}, t={self.time:g}, norm2={self.norm2:.12g})"


def gaussian_packet(
    grid: Grid,
    center: Sequence[float],
    width,
    k0: Optional[Sequence[float]] = None,
    wall_sigmas: float = 5.0,
) -> Wavefunction:
    """Normalised exp(-(y - c)^2 / 2a^2 + i k0.y) with amplitude width a = ``width``.

    The packet must clear every wall by ``wall_sigmas`` widths.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.size != grid.dims:
        raise ValueError(f"center needs {grid.dims} components")
    width = np.broadcast_to(np.asarray(width, dtype=float), (grid.dims,))
    if np.any(width <= 0):
        raise ValueError("width must be positive")
    k0 = np.zeros(grid.dims) if k0 is None else np.asarray(k0, dtype=float).reshape(-1)
    if k0.size != grid.dims:
        raise ValueError(f"k0 needs {grid.dims} components")
    clearance = grid.box_half_width - (np.abs(center) + wall_sigmas * width)
    if np.any(clearance < 0):
        raise PacketTouchesWall(
            f"packet needs {wall_sigmas:g} widths of clearance; short by {float(-clearance.min()):.3g}"
        )
    log_amp = np.zeros(grid.shape, dtype=complex)
    for ax in range(grid.dims):
        y = grid.coordinate(ax)
        log_amp = log_amp - (y - center[ax]) ** 2 / (2.0 * width[ax] ** 2) + 1j * k0[ax] * y
    psi = Wavefunction(grid, np.exp(log_amp))
    return psi.normalized()


def random_packet(grid: Grid, rng: np.random.Generator, width_range=(0.3, 0.6), k_max: float = 1.5,
                  wall_sigmas: float = 5.0) -> Wavefunction:
    """A random smooth Gaussian probe that clears the walls."""
    width = rng.uniform(*width_range)
    room = grid.box_half_width - wall_sigmas * width
    if room <= 0:
        raise PacketTouchesWall("grid too small for the requested probe width")
    center = rng.uniform(-room, room, grid.dims)
    k0 = rng.uniform(-k_max, k_max, grid.dims)
    psi = gaussian_packet(grid, center, width, k0, wall_sigmas)
    return psi * np.exp(1j * rng.uniform(0, 2 * np.pi))
