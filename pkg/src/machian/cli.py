"""Command-line harness: ``machian run|check|sweep|version``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 invariant failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__, bucket, dynamics as dyn, invariants, io, relational as rel
from .config import ScenarioConfig, as_inertia, parse_config
from .errors import ConfigError, MachianError
from .potentials import PairPotential

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3


class InvariantFailure(Exception):
    """A scenario's own acceptance check did not hold."""


class Outcome:
    def __init__(self, steps: int, metric: str, value: float, files: List[Path], ok: bool = True):
        self.steps, self.metric, self.value, self.files, self.ok = steps, metric, value, files, ok


def _potential(block, G) -> PairPotential:
    kind = block["kind"]
    if kind == "gravity":
        return PairPotential.gravity(G, block["separation_floor"])
    if kind == "harmonic":
        return PairPotential.harmonic(block["k"])
    return PairPotential.none()


def _meta(cfg: ScenarioConfig, **extra) -> Dict:
    meta = {"scenario": cfg.kind, "seed": cfg.seed, "version": __version__}
    meta.update(extra)
    return meta


def _ensure_dir(cfg):
    Path(cfg.output["dir"]).mkdir(parents=True, exist_ok=True)


def _write_traj(cfg, traj, every=1, **meta) -> Path:
    _ensure_dir(cfg)
    ext = cfg.output["format"]
    path = cfg.output_path(f"trajectory.{ext}")
    writer = io.write_trajectory_csv if ext == "csv" else io.write_trajectory_jsonl
    writer(path, traj, every, _meta(cfg, **meta))
    return path


def _gauge(block, rng) -> dyn.GaugePath:
    kind = block["kind"]
    if kind == "translation":
        return dyn.GaugePath.translation(block["offset"], block["velocity"])
    if kind == "uniform_rotation":
        return dyn.GaugePath.uniform_rotation(block["omega"])
    if kind == "random":
        return dyn.GaugePath.random(rng)
    return dyn.GaugePath.identity()


def run_classical(cfg: ScenarioConfig, rng) -> Outcome:
    p = cfg.params
    pot = _potential(p["potential"], cfg.constants["G"])
    if "bodies" in p:
        b = p["bodies"]
        state = rel.SystemState([x["mass"] for x in b], [x["position"] for x in b], [x["velocity"] for x in b])
    else:
        r = p["random_bodies"]
        state = rel.random_state(rng, r["n"], r["box"], tuple(r["mass_range"]))
    traj = dyn.integrate_newtonian_gauge(state, pot, p["dt"], p["steps"])
    drift = dyn.energy_drift(traj)
    gauge = _gauge(p["gauge"], rng)
    if p["gauge"]["kind"] != "none":
        traj = dyn.apply_gauge(traj, gauge)
    path = _write_traj(cfg, traj)
    metric, value = "energy_drift", drift
    if len(traj) > 4 and p["gauge"]["kind"] != "none":
        res = dyn.eom_residual_series(traj, p["eom_order"])
        metric, value = "max_eom_residual", float(res.max())
    return Outcome(len(traj) - 1, metric, value, [path])


def run_gauge_check(cfg: ScenarioConfig, rng) -> Outcome:
    p = cfg.params
    pot = _potential(p["potential"], cfg.constants["G"])
    rows = []
    worst = 0.0
    for t_idx in range(p["n_trajectories"]):
        s0 = rel.random_state(rng, p["n_bodies"], 2.0, (0.5, 2.0))
        traj = dyn.integrate_newtonian_gauge(s0, pot, p["dt"], p["steps"])
        base = [(rel.kinetic_energy(traj.state(k), "relational"), rel.lagrangian(traj.state(k), pot),
                 rel.hamiltonian(traj.state(k), pot), rel.kinetic_energy(traj.state(k), "cm"))
                for k in range(len(traj))]
        for g_idx in range(p["n_gauges"]):
            dressed = dyn.apply_gauge(traj, dyn.GaugePath.random(rng))
            err = 0.0
            for k in range(len(traj)):
                s = dressed.state(k)
                Ts, L, H, Tc = base[k]
                scale = max(abs(Tc), abs(L), abs(H), 1e-300)
                err = max(err, abs(rel.kinetic_energy(s, "relational") - Ts) / scale,
                          abs(rel.lagrangian(s, pot) - L) / scale, abs(rel.hamiltonian(s, pot) - H) / scale)
            worst = max(worst, err)
            rows.append([str(t_idx), str(g_idx), io.fmt(err)])
    _ensure_dir(cfg)
    path = cfg.output_path("gauge_check.csv")
    io._write_text(path, io._csv_text(["trajectory", "gauge", "max_rel_error"], rows, _meta(cfg)))
    ok = worst < p["tolerance"]
    return Outcome(p["steps"], "max_rel_error", worst, [path], ok)


def _bucket_cfg(p, G, I0) -> bucket.BucketConfig:
    return bucket.BucketConfig.with_I0(bucket.BucketConfig(p["m"], p["R"], G, 1.0), I0)


def run_bucket_analytic(cfg: ScenarioConfig, rng) -> Outcome:
    p = cfg.params
    I0 = as_inertia(p["I0"])
    bc = _bucket_cfg(p, cfg.constants["G"], I0)
    rows = bucket.bucket_sweep(bc, [I0])
    _ensure_dir(cfg)
    path = cfg.output_path("bucket.csv")
    io.write_sweep_csv(path, rows, _meta(cfg, m=io.fmt(p["m"]), R=io.fmt(p["R"])))
    return Outcome(0, "G_eff", rows[0].G_eff, [path])


def run_bucket_sweep(cfg: ScenarioConfig, rng) -> Outcome:
    p = cfg.params
    values = [as_inertia(v) for v in p["I0_values"]]
    rows = bucket.bucket_sweep(_bucket_cfg(p, cfg.constants["G"], 1.0), values)
    _ensure_dir(cfg)
    path = cfg.output_path("sweep.csv")
    io.write_sweep_csv(path, rows, _meta(cfg, m=io.fmt(p["m"]), R=io.fmt(p["R"])))
    return Outcome(len(rows), "rows", float(len(rows)), [path])


def run_bucket_sim(cfg: ScenarioConfig, rng) -> Outcome:
    p = cfg.params
    bc = bucket.BucketConfig(p["m"], p["R"], cfg.constants["G"], float(p["I0"]))
    run = bucket.simulate_bucket(bc, p["n_shell"], p["ring_radius"], p["dt"], orbits=p["orbits"],
                                 ring_gravity=p["ring_gravity"])
    path = _write_traj(cfg, run.as_trajectory(), p["every"],
                       relative_frequency=io.fmt(run.relative_frequency),
                       predicted_frequency=io.fmt(run.predicted_frequency))
    return Outcome(len(run.times) - 1, "relative_frequency", run.relative_frequency, [path])


def _quantum_system(cfg, p):
    from .quantum.operators import QuantumSystem

    bg = p["background_inertia"]
    if "shell" in p:
        bg += 2.0 * p["shell"]["mass"] * p["shell"]["radius"] ** 2 / 3.0
    return QuantumSystem(tuple(p["masses"]), cfg.constants["hbar"], _potential(p["potential"], cfg.constants["G"]),
                         p["eps_soft"], bg, p["machian"], p["mode"], p["drop_ordering_term"])


def run_quantum_evolve(cfg: ScenarioConfig, rng) -> Outcome:
    from .quantum.evolution import evolve
    from .quantum.grid import Grid, gaussian_packet

    p = cfg.params
    system = _quantum_system(cfg, p)
    grid = Grid(2, p["points_per_axis"], p["box_half_width"])
    pk = p["packet"]
    psi = gaussian_packet(grid, pk["center"], pk["width"], pk["k0"])
    records = []

    def observe(k, state):
        if k % p["record_every"] == 0 or k == p["steps"]:
            records.append(io.expectation_record(state, system))

    final = evolve(psi, system, p["dt"], p["steps"], method=p["method"], observer=observe)
    _ensure_dir(cfg)
    path = cfg.output_path("expectations.csv")
    io.write_expectation_csv(path, records, _meta(cfg, dt=io.fmt(p["dt"]), mode=p["mode"], method=p["method"]))
    files = [path]
    if p["snapshot"]:
        snap = cfg.output_path("wavefunction.bin")
        io.write_wavefunction(snap, final)
        files.append(snap)
    norms = np.array([r[7] for r in records])
    return Outcome(p["steps"], "norm_drift", float(np.max(np.abs(norms - norms[0]))), files)


def run_quantum_checks(cfg: ScenarioConfig, rng) -> Outcome:
    from .quantum import checks
    from .quantum.grid import Grid
    from .quantum.operators import canonical_momentum_operator, hamiltonian_operator

    p = cfg.params
    system = _quantum_system(cfg, p)
    grid = Grid(2, p["points_per_axis"], p["box_half_width"])
    width = (0.3, max(0.31, min(0.6, grid.box_half_width / 7.0)))
    ops = {
        "H": hamiltonian_operator(system, grid),
        "P1x": canonical_momentum_operator(system, grid, 0, 0),
        "P1y": canonical_momentum_operator(system, grid, 0, 1),
        "P1x_naive": canonical_momentum_operator(system, grid, 0, 0, naive=True),
    }
    res = {k: [] for k in ops}
    for _ in range(p["n_probes"]):
        a = checks.random_probe(grid, rng, width_range=width)
        b = checks.random_probe(grid, rng, width_range=width)
        for k, op in ops.items():
            res[k].append(checks.hermiticity_residual(op, a, b))
    rows = [[k, io.fmt(max(v)), io.fmt(min(v))] for k, v in res.items()]
    _ensure_dir(cfg)
    path = cfg.output_path("quantum_checks.csv")
    io._write_text(path, io._csv_text(["operator", "max_hermiticity_residual", "min_hermiticity_residual"], rows,
                                      _meta(cfg)))
    worst = max(max(res["H"]), max(res["P1x"]), max(res["P1y"]))
    return Outcome(p["n_probes"], "max_hermiticity_residual", worst, [path], worst < p["tolerance"])


def run_invariant_suite(cfg: ScenarioConfig, rng) -> Outcome:
    results = invariants.run_suite(cfg.seed, cfg.params["select"] or None)
    _ensure_dir(cfg)
    path = cfg.output_path("invariants.txt")
    io._write_text(path, invariants.report(results, cfg.seed))
    failed = sum(not r.passed for r in results)
    return Outcome(len(results), "failed", float(failed), [path], failed == 0)


RUNNERS: Dict[str, Callable[[ScenarioConfig, np.random.Generator], Outcome]] = {
    "classical_run": run_classical,
    "gauge_check": run_gauge_check,
    "bucket_analytic": run_bucket_analytic,
    "bucket_sweep": run_bucket_sweep,
    "bucket_sim": run_bucket_sim,
    "quantum_evolve": run_quantum_evolve,
    "quantum_checks": run_quantum_checks,
    "invariant_suite": run_invariant_suite,
}


def run_scenario(cfg: ScenarioConfig, out=None) -> int:
    """Dispatch ``cfg``, print one summary line, and return the exit code."""
    out = out or sys.stdout
    rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    try:
        outcome = RUNNERS[cfg.kind](cfg, rng)
    except MachianError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - start
    files = ",".join(str(f) for f in outcome.files)
    print(f"scenario={cfg.kind} steps={outcome.steps} wall={wall:.3f}s {outcome.metric}={outcome.value:.6e} "
          f"files={files}", file=out)
    return EXIT_OK if outcome.ok else EXIT_INVARIANT


def _load(path) -> Optional[ScenarioConfig]:
    try:
        return parse_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="machian", description="Relational mechanics scenarios and checks.")
    sub = parser.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--output", "-o", help="also write the report to this file")
    c.add_argument("--select", nargs="*", default=None, help="property name prefixes, e.g. quantum relational.form")
    s = sub.add_parser("sweep", help="run a bucket_sweep config")
    s.add_argument("config")
    sub.add_parser("version", help="print the package version")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "version":
        print(f"machian {__version__}")
        return EXIT_OK
    if args.verb == "check":
        results = invariants.run_suite(args.seed, args.select)
        text = invariants.report(results, args.seed)
        sys.stdout.write(text)
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    if args.verb == "sweep" and cfg.kind != "bucket_sweep":
        print(f"config error: sweep needs a bucket_sweep config, got {cfg.kind!r}", file=sys.stderr)
        return EXIT_CONFIG
    return run_scenario(cfg)


if __name__ == "__main__":
    sys.exit(main())
