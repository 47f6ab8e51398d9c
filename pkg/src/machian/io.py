"""File formats: trajectories, bucket sweeps, expectation series and wavefunction snapshots.

Numbers in CSV files are written with 17 significant digits, so equal inputs
give byte-identical files. Metadata lines start with ``#``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .dynamics import Trajectory
from .potentials import PairPotential

PathLike = Union[str, os.PathLike]

TRAJECTORY_HEADER = ["t", "body", "x1", "x2", "x3", "v1", "v2", "v3"]
SWEEP_HEADER = ["I0", "Omega_b", "Omega", "G_eff"]
EXPECTATION_HEADER = ["t", "<x1>", "<x2>", "<p1>", "<p2>", "<P1>", "<P2>", "norm", "energy"]

WAVEFUNCTION_MAGIC = b"MWF1"
_WF_HEADER = struct.Struct("<4sIIdd")


def fmt(value: float) -> str:
    """17 significant digits; ``inf``/``-inf``/``nan`` spelled out."""
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _meta_lines(meta: Optional[Dict]) -> List[str]:
    if not meta:
        return []
    return [f"# {k}={meta[k]}" for k in sorted(meta)]


def _write_text(path: PathLike, text: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _csv_text(header, rows, meta=None) -> str:
    buf = io.StringIO()
    for line in _meta_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _read_csv(path: PathLike):
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


# trajectories

def trajectory_meta(traj: Trajectory, extra: Optional[Dict] = None) -> Dict:
    meta = {
        "masses": " ".join(fmt(m) for m in traj.masses),
        "dt": fmt(traj.dt),
        "method": traj.method,
        "potential": traj.potential_descriptor,
    }
    if traj.notes:
        meta["gauge"] = " | ".join(traj.notes)
    meta.update(extra or {})
    return meta


def _trajectory_rows(traj: Trajectory, every: int):
    for k in range(0, len(traj), every):
        t = fmt(traj.times[k])
        for b in range(traj.positions.shape[1]):
            yield [t, str(b)] + [fmt(v) for v in traj.positions[k, b]] + [fmt(v) for v in traj.velocities[k, b]]


def write_trajectory_csv(path: PathLike, traj: Trajectory, every: int = 1, meta: Optional[Dict] = None):
    """One row per body per sample; bodies are numbered from 0."""
    if every < 1:
        raise ValueError("every must be >= 1")
    _write_text(path, _csv_text(TRAJECTORY_HEADER, _trajectory_rows(traj, every), trajectory_meta(traj, meta)))


def write_trajectory_jsonl(path: PathLike, traj: Trajectory, every: int = 1, meta: Optional[Dict] = None):
    """First line holds the metadata object; then one object per body per sample."""
    lines = [json.dumps({"meta": trajectory_meta(traj, meta)}, sort_keys=True)]
    for k in range(0, len(traj), every):
        for b in range(traj.positions.shape[1]):
            lines.append(json.dumps({
                "t": float(traj.times[k]), "body": b,
                "x": [float(v) for v in traj.positions[k, b]],
                "v": [float(v) for v in traj.velocities[k, b]],
            }, sort_keys=True))
    _write_text(path, "\n".join(lines) + "\n")


def _potential_from_descriptor(text: str) -> Optional[PairPotential]:
    if text.startswith("gravity(G="):
        return PairPotential.gravity(float(text[len("gravity(G="):-1]))
    if text.startswith("harmonic(k="):
        return PairPotential.harmonic(float(text[len("harmonic(k="):-1]))
    if text == "none":
        return PairPotential.none()
    return None


def _assemble(meta, records) -> Trajectory:
    masses = np.array([float(m) for m in meta["masses"].split()])
    n = masses.size
    if len(records) % n:
        raise ValueError("row count is not a multiple of the body count")
    T = len(records) // n
    times = np.array([records[k * n][0] for k in range(T)])
    X = np.array([r[2] for r in records]).reshape(T, n, 3)
    V = np.array([r[3] for r in records]).reshape(T, n, 3)
    notes = tuple(meta["gauge"].split(" | ")) if meta.get("gauge") else ()
    return Trajectory(times, masses, X, V, float(meta["dt"]), meta.get("method", "rk4"),
                      _potential_from_descriptor(meta.get("potential", "none")), notes)


def read_trajectory_csv(path: PathLike) -> Trajectory:
    meta, header, rows = _read_csv(path)
    if header != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected trajectory header {header}")
    records = [(float(r[0]), int(r[1]), [float(v) for v in r[2:5]], [float(v) for v in r[5:8]]) for r in rows]
    return _assemble(meta, records)


def read_trajectory_jsonl(path: PathLike) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        objs = [json.loads(line) for line in fh if line.strip()]
    meta = objs[0]["meta"]
    records = [(o["t"], o["body"], o["x"], o["v"]) for o in objs[1:]]
    return _assemble(meta, records)


# bucket sweep

def sweep_csv_text(rows: Iterable, meta: Optional[Dict] = None) -> str:
    return _csv_text(SWEEP_HEADER, ([fmt(r.I0), fmt(r.omega_b), fmt(r.omega), fmt(r.G_eff)] for r in rows), meta)


def write_sweep_csv(path: PathLike, rows: Iterable, meta: Optional[Dict] = None):
    _write_text(path, sweep_csv_text(rows, meta))


def read_sweep_csv(path: PathLike):
    _, header, rows = _read_csv(path)
    if header != SWEEP_HEADER:
        raise ValueError(f"unexpected sweep header {header}")
    return [tuple(float(v) for v in r) for r in rows]


# quantum expectation series

def expectation_record(psi, system) -> List[float]:
    """Row of the expectation CSV: body-0 CM-frame x, p and canonical P components, norm, energy."""
    from .quantum.operators import operators_for

    ops = operators_for(system, psi.grid)
    f = psi.amplitudes
    dv = psi.grid.cell_volume
    ev = lambda u: float(np.vdot(f, u).real * dv)
    norm2 = float(np.vdot(f, f).real * dv)
    row = [psi.time]
    row += [ev(ops.X[0][k] * f) / norm2 for k in (0, 1)]
    row += [ev(ops.momentum(0, k, f)) / norm2 for k in (0, 1)]
    row += [ev(ops.canonical_momentum(0, k, f)) / norm2 for k in (0, 1)]
    row += [norm2, ev(ops.hamiltonian(f)) / norm2]
    return row


def expectation_csv_text(records: Sequence[Sequence[float]], meta: Optional[Dict] = None) -> str:
    return _csv_text(EXPECTATION_HEADER, ([fmt(v) for v in r] for r in records), meta)


def write_expectation_csv(path: PathLike, records: Sequence[Sequence[float]], meta: Optional[Dict] = None):
    _write_text(path, expectation_csv_text(records, meta))


def read_expectation_csv(path: PathLike) -> np.ndarray:
    _, header, rows = _read_csv(path)
    if header != EXPECTATION_HEADER:
        raise ValueError(f"unexpected expectation header {header}")
    return np.array([[float(v) for v in r] for r in rows])


# wavefunction snapshots

def write_wavefunction(path: PathLike, psi):
    """Little-endian header (magic, dims, n_axis, h, time) then (re, im) float64 pairs, row-major."""
    g = psi.grid
    data = np.empty(g.shape + (2,), dtype="<f8")
    data[..., 0] = psi.amplitudes.real
    data[..., 1] = psi.amplitudes.imag
    with open(path, "wb") as fh:
        fh.write(_WF_HEADER.pack(WAVEFUNCTION_MAGIC, g.dims, g.points_per_axis, g.h, psi.time))
        fh.write(np.ascontiguousarray(data).tobytes(order="C"))


def read_wavefunction(path: PathLike):
    from .quantum.grid import Grid, Wavefunction

    with open(path, "rb") as fh:
        raw = fh.read()
    magic, dims, n_axis, h, time = _WF_HEADER.unpack_from(raw)
    if magic != WAVEFUNCTION_MAGIC:
        raise ValueError("not a wavefunction snapshot")
    grid = Grid(dims // 2 + 1, n_axis, 0.5 * h * n_axis)
    data = np.frombuffer(raw, dtype="<f8", offset=_WF_HEADER.size)
    expected = n_axis**dims * 2
    if data.size != expected:
        raise ValueError(f"payload has {data.size} values, expected {expected}")
    data = data.reshape(grid.shape + (2,))
    return Wavefunction(grid, data[..., 0] + 1j * data[..., 1], time)


def write_slice_csv(path: PathLike, psi, fixed: Optional[Sequence[int]] = None):
    """Plot-ready 2D slice over the first two grid axes; other axes held at ``fixed`` indices."""
    g = psi.grid
    amp = psi.amplitudes
    if g.dims > 2:
        idx = list(fixed) if fixed is not None else [g.points_per_axis // 2] * (g.dims - 2)
        amp = amp[(slice(None), slice(None)) + tuple(idx)]
    ax = g.axis
    rows = []
    for a in range(amp.shape[0]):
        for b in range(amp.shape[1]):
            z = amp[a, b]
            rows.append([fmt(ax[a]), fmt(ax[b]), fmt(z.real), fmt(z.imag), fmt(abs(z) ** 2)])
    _write_text(path, _csv_text(["y1", "y2", "re", "im", "abs2"], rows, {"time": fmt(psi.time)}))
