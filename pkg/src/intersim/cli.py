"""Command-line front end: simulation runs, analytic curves, validation,
parameter sweeps and region-grid exports.

Outputs are CSV files for curves/grids plus a JSON manifest per run so any
result can be reproduced from its output directory alone.  Exit codes:
0 success, 2 configuration problem, 3 validation failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .core import IntersectionSpec, SpecError
from .ensemble import (DEFAULT_BIN_WIDTH, DEFAULT_PARTICLES, histogram,
                       init_ensemble, l1_distance, mean_total_delay,
                       propagate, run_to_steady_state)
from .stepmap import classify_region
from . import steady_state as ss
from .validation import (compare_eds_vs_analytic, compare_mapping_vs_oracle,
                         compare_policies)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

OUTPUT_ROOT_ENV = "INTERSIM_OUT"

# Asymmetric-load parameters double as the built-in default scenario.
DEFAULT_SPEC = dict(lane_count=2, conflicts=[[1, 2]], delta_d=2.0,
                    delta_s=1.0, lane_rates=[0.1, 0.5])


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_spec(path: str | None) -> IntersectionSpec:
    if path is None:
        return IntersectionSpec.from_json(json.dumps(DEFAULT_SPEC))
    try:
        return IntersectionSpec.from_json(path)
    except OSError as exc:
        raise CliError(f"cannot read spec file {path}: {exc}", EXIT_CONFIG)
    except json.JSONDecodeError as exc:
        raise CliError(f"spec file {path} is not valid JSON: {exc}",
                       EXIT_CONFIG)
    except (SpecError, ValueError, TypeError) as exc:
        raise CliError(f"invalid intersection spec: {exc}", EXIT_CONFIG)


def _out_dir(args) -> str:
    root = args.out or os.environ.get(OUTPUT_ROOT_ENV) or "intersim-out"
    path = os.path.join(root, args.command)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}",
                       EXIT_IO)
    return path


def _write_csv(path: str, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _write_manifest(out: str, args, spec: IntersectionSpec | None,
                    extra: dict | None = None):
    manifest = {
        "tool": "intersim",
        "version": __version__,
        "command": args.command,
        "args": {k: v for k, v in vars(args).items()
                 if k not in ("command", "func")},
    }
    if spec is not None:
        manifest["spec"] = json.loads(spec.to_json())
    if extra:
        manifest.update(extra)
    path = os.path.join(out, "manifest.json")
    try:
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _write_histogram(path: str, hist):
    rows = []
    for i in range(hist.mass.shape[0]):
        for j in range(hist.mass.shape[1]):
            m = hist.mass[i, j]
            if m > 0:
                rows.append((hist.edges_x[i], hist.edges_y[j], m))
    _write_csv(path, ("bin_x", "bin_y", "mass"), rows)


def _grid(text: str, name: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"cannot parse {name} grid {text!r}", EXIT_CONFIG)
    if not values:
        raise CliError(f"{name} grid is empty", EXIT_CONFIG)
    return values


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    out = _out_dir(args)
    ens = init_ensemble(args.particles, spec, args.seed, args.policy)
    if spec.lane_count != 2:
        raise CliError("simulate histograms require a two-lane spec "
                       "(general-K runs are library-level only)", EXIT_CONFIG)
    conv_rows = []
    trace_rows = []
    prev = histogram(ens, args.bin_width)
    _write_histogram(os.path.join(out, "hist_iter001.csv"), prev)
    for it in range(2, args.iterations + 1):
        ens, trace = propagate(ens, 1, record_delays=True)
        cur = histogram(ens, args.bin_width)
        conv_rows.append((it, l1_distance(prev, cur)))
        prev = cur
        _write_histogram(os.path.join(out, f"hist_iter{it:03d}.csv"), cur)
        step = max(1, len(trace.delays) // 1000)
        for p in range(0, len(trace.delays), step):
            trace_rows.append((int(trace.iterations[p]), p,
                               trace.delays[p], int(trace.regions[p])))
    _write_csv(os.path.join(out, "convergence.csv"),
               ("iteration", "l1_distance"), conv_rows)
    _write_csv(os.path.join(out, "delay_trace.csv"),
               ("iteration", "particle", "delay", "region"), trace_rows)
    _write_manifest(out, args, spec,
                    {"mean_total_delay": mean_total_delay(ens)})
    print(f"simulate: {args.iterations} iterations, N={args.particles}, "
          f"policy={args.policy} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    out = _out_dir(args)
    lam_dd = np.arange(0.1, 5.0 + 1e-9, 0.1)
    curves = ss.point_mass_curves(lam_dd)
    _write_csv(os.path.join(out, "point_masses.csv"),
               ("lambda_delta_d", "p_zero_delay", "p_full_gap_delay"),
               [tuple(row) for row in curves])

    for dd in _grid(args.grid_delta_d, "delta-d"):
        sol = ss.solve_steady_state(args.lam, dd)
        ts = np.linspace(0.0, dd, args.cdf_points)
        cdf = ss.delay_cdf(sol, ts)
        _write_csv(os.path.join(out, f"delay_cdf_dd{dd:g}.csv"),
                   ("t", "P_d"), list(zip(ts, cdf)))

    rows = []
    for lam in _grid(args.grid_lambda, "lambda"):
        rows.append((lam, ss.expected_delay(lam, args.delta_d),
                     ss.low_flow_approx(lam, args.delta_d)))
    _write_csv(os.path.join(out, "expected_delay.csv"),
               ("lambda", "expected_delay", "low_flow_approx"), rows)
    _write_manifest(out, args, None)
    print(f"analyze: curves written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    spec = _load_spec(args.spec)
    out = _out_dir(args)
    reports = [
        compare_mapping_vs_oracle(spec, args.policy, seed=args.seed),
        compare_policies(spec, n=args.particles, seed=args.seed),
    ]
    if spec.delta_s == 0 and len(set(spec.lane_rates)) == 1:
        reports.append(compare_eds_vs_analytic(
            spec.total_rate, spec.delta_d, n=args.particles, seed=args.seed))
    payload = [r.to_dict() for r in reports]
    try:
        with open(os.path.join(out, "reports.json"), "w") as fh:
            json.dump(payload, fh, indent=2)
        with open(os.path.join(out, "reports.txt"), "w") as fh:
            fh.write("\n\n".join(r.to_text() for r in reports))
    except OSError as exc:
        raise CliError(f"cannot write reports: {exc}", EXIT_IO)
    _write_manifest(out, args, spec)
    ok = all(r.passed for r in reports)
    for r in reports:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.scenario}")
    print(f"validate: reports in {out}")
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_cell(cell):
    """One (lambda, delta_d, delta_s, policy) run; returns a result row.

    ``lam`` is the total arrival rate, split evenly between the lanes as
    in the analytic steady state.
    """
    index, lam, dd, ds, policy, master_seed, events = cell
    seed = master_seed ^ index
    try:
        spec = IntersectionSpec.two_lane(lam / 2.0, lam / 2.0, dd, ds)
        _, _, converged, _ = run_to_steady_state(spec, policy, seed=seed)
        from .ensemble import ergodic_mean_delay
        mean_d = ergodic_mean_delay(spec, policy, events, seed=seed)
        return (lam, dd, ds, policy, mean_d, converged, "")
    except Exception as exc:  # keep the sweep going, record the failure
        return (lam, dd, ds, policy, float("nan"), False, str(exc))


def run_sweep(lams, dds, dss, policies, master_seed: int = 0,
              events: int = 100_000, workers: int = 1):
    """Cartesian-product sweep; returns one row per cell.

    Rows are (lambda, delta_d, delta_s, policy, mean_delay, converged,
    error).  Each cell derives its seed from the master seed and its cell
    index, so the sweep is reproducible regardless of worker scheduling.
    """
    cells = []
    index = 0
    for lam in lams:
        for dd in dds:
            for ds in dss:
                for policy in policies:
                    cells.append((index, lam, dd, ds, policy, master_seed,
                                  events))
                    index += 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    lams = _grid(args.grid_lambda, "lambda")
    dds = _grid(args.grid_delta_d, "delta-d")
    dss = _grid(args.grid_delta_s, "delta-s")
    policies = ["fifo", "fo"] if args.policy == "both" else [args.policy]
    rows = run_sweep(lams, dds, dss, policies, master_seed=args.seed,
                     events=args.events, workers=args.workers)
    _write_csv(os.path.join(out, "sweep.csv"),
               ("lambda", "delta_d", "delta_s", "policy", "mean_delay",
                "converged", "error"), rows)
    argmin_rows = []
    for lam in lams:
        sub = [r for r in rows if r[0] == lam and np.isfinite(r[4])]
        if sub:
            best = min(sub, key=lambda r: r[4])
            argmin_rows.append((lam, best[1], best[2], best[3], best[4]))
    _write_csv(os.path.join(out, "argmin_delay.csv"),
               ("lambda", "delta_d", "delta_s", "policy", "mean_delay"),
               argmin_rows)
    failures = [r for r in rows if r[6]]
    _write_manifest(out, args, None, {"cells": len(rows),
                                      "failed_cells": len(failures)})
    print(f"sweep: {len(rows)} cells ({len(failures)} failed) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

def cmd_regions(args) -> int:
    spec = _load_spec(args.spec)
    if spec.lane_count != 2:
        raise CliError("region grids require a two-lane spec", EXIT_CONFIG)
    out = _out_dir(args)
    lo, hi = -spec.delta_d, args.t_max
    ts = np.arange(lo, hi + 1e-9, args.grid_step)
    for policy in ("fifo", "fo"):
        rows = []
        for t1 in ts:
            for t2 in ts:
                label = classify_region(np.array([t1, t2]), args.gap,
                                        args.lane, spec, policy)
                rows.append((t1, t2, label.id))
        _write_csv(os.path.join(out, f"regions_{policy}.csv"),
                   ("T1", "T2", "region"), rows)
    _write_manifest(out, args, spec)
    print(f"regions: grids for x={args.gap} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--spec", help="intersection spec JSON file "
                   "(default: built-in two-lane scenario)")
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--out", help="output root directory (default: "
                   f"${OUTPUT_ROOT_ENV} or ./intersim-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intersim",
        description="Event-driven delay simulation and analysis for "
                    "unmanaged intersections.")
    parser.add_argument("--version", action="version",
                        version=f"intersim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="propagate a particle ensemble and "
                       "export per-iteration histograms")
    _add_common(p)
    p.add_argument("--policy", choices=("fifo", "fo"), default="fifo")
    p.add_argument("--particles", type=int, default=DEFAULT_PARTICLES)
    p.add_argument("--iterations", type=int, default=8)
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="emit closed-form steady-state "
                       "curves (point masses, delay CDF, expected delay)")
    _add_common(p)
    p.add_argument("--lam", type=float, default=1.0,
                   help="total arrival rate for the CDF curves")
    p.add_argument("--delta-d", type=float, default=1.5,
                   help="conflict gap for the expected-delay curve")
    p.add_argument("--grid-lambda", default="0.1,0.2,0.5,1,2,4")
    p.add_argument("--grid-delta-d", default="1,2,3,4")
    p.add_argument("--cdf-points", type=int, default=101)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="cross-validate maps, oracle, EDS "
                       "and analytic results; exit 3 on failure")
    _add_common(p)
    p.add_argument("--policy", choices=("fifo", "fo"), default="fifo")
    p.add_argument("--particles", type=int, default=DEFAULT_PARTICLES)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep of "
                       "steady-state mean delay")
    _add_common(p)
    p.add_argument("--policy", choices=("fifo", "fo", "both"),
                   default="both")
    p.add_argument("--grid-lambda", default="0.2,0.4,0.6,0.8,1.0,1.2")
    p.add_argument("--grid-delta-d", default="1.5")
    p.add_argument("--grid-delta-s", default="0")
    p.add_argument("--events", type=int, default=100_000,
                   help="events per cell for the ergodic mean")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("regions", help="export the piecewise-map region "
                       "grid for a fixed gap")
    _add_common(p)
    p.add_argument("--gap", type=float, default=1.0,
                   help="event gap x the grid is classified at")
    p.add_argument("--lane", type=int, default=1, choices=(1, 2))
    p.add_argument("--t-max", type=float, default=8.0)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.set_defaults(func=cmd_regions)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"intersim: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
