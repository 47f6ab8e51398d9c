"""Pair potentials V_ij(x_ij) that depend only on relative separation vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SingularSeparation

KINDS = ("gravity", "harmonic", "none", "custom")


@dataclass(frozen=True)
class PhysicalConstants:
    G: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.G > 0 and self.hbar > 0):
            raise ValueError("G and hbar must be positive")


@dataclass(frozen=True)
class PairPotential:
    """A translation-invariant pair interaction.

    ``gravity``: V_ij = -G m_i m_j / |x_ij| (attractive, negative).
    ``harmonic``: V_ij = k |x_ij|^2 / 2.
    ``custom``: ``value(x_ij, m_i, m_j)`` and optionally ``gradient(x_ij, m_i, m_j)``,
    both vectorised over a leading pair axis. Without a gradient, a centred
    finite difference with step ``fd_step`` is used.
    """

    kind: str = "none"
    G: float = 1.0
    k: float = 1.0
    separation_floor: float = 1e-9
    value: Optional[Callable] = field(default=None, compare=False)
    gradient: Optional[Callable] = field(default=None, compare=False)
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "gravity" and not self.G > 0:
            raise ValueError("gravity needs G > 0")
        if self.kind == "harmonic" and not self.k > 0:
            raise ValueError("harmonic needs k > 0")
        if self.kind == "custom" and self.value is None:
            raise ValueError("custom potential needs a value callable")

    @classmethod
    def gravity(cls, G=1.0, separation_floor=1e-9):
        return cls("gravity", G=G, separation_floor=separation_floor)

    @classmethod
    def harmonic(cls, k=1.0):
        return cls("harmonic", k=k)

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def custom(cls, value, gradient=None):
        return cls("custom", value=value, gradient=gradient)

    def describe(self) -> str:
        if self.kind == "gravity":
            return f"gravity(G={self.G!r})"
        if self.kind == "harmonic":
            return f"harmonic(k={self.k!r})"
        return self.kind

    @property
    def is_singular(self) -> bool:
        return self.kind == "gravity"

    def _check(self, r):
        if self.is_singular and r.size and np.min(r) < self.separation_floor:
            raise SingularSeparation(
                f"pair separation {np.min(r):.3e} below floor {self.separation_floor:.1e}"
            )

    def pair_values(self, xij, mi, mj):
        """V_ij for each row of ``xij`` (shape (P, 3))."""
        xij = np.asarray(xij, dtype=float)
        if self.kind == "none":
            return np.zeros(xij.shape[0])
        if self.kind == "custom":
            return np.asarray(self.value(xij, mi, mj), dtype=float)
        r2 = np.einsum("pk,pk->p", xij, xij)
        if self.kind == "harmonic":
            return 0.5 * self.k * r2
        r = np.sqrt(r2)
        self._check(r)
        return -self.G * mi * mj / r

    def pair_gradients(self, xij, mi, mj):
        """dV_ij/dx_ij for each row of ``xij``."""
        xij = np.asarray(xij, dtype=float)
        if self.kind == "none":
            return np.zeros_like(xij)
        if self.kind == "harmonic":
            return self.k * xij
        if self.kind == "gravity":
            r = np.sqrt(np.einsum("pk,pk->p", xij, xij))
            self._check(r)
            return (self.G * mi * mj / r**3)[:, None] * xij
        if self.gradient is not None:
            return np.asarray(self.gradient(xij, mi, mj), dtype=float)
        out = np.empty_like(xij)
        h = self.fd_step
        for k in range(xij.shape[1]):
            step = np.zeros(xij.shape[1])
            step[k] = h
            out[:, k] = (self.pair_values(xij + step, mi, mj) - self.pair_values(xij - step, mi, mj)) / (2 * h)
        return out

    def on_relative(self, r, m_i, m_j):
        """V_ij evaluated on a grid of relative separation vectors ``r`` (..., d)."""
        r = np.asarray(r, dtype=float)
        flat = r.reshape(-1, r.shape[-1])
        if flat.shape[1] < 3:
            flat = np.concatenate([flat, np.zeros((flat.shape[0], 3 - flat.shape[1]))], axis=1)
        n = flat.shape[0]
        vals = self.pair_values(flat, np.full(n, m_i), np.full(n, m_j))
        return vals.reshape(r.shape[:-1])
