"""Command-line front end.

Subcommands: ``simulate`` (Monte Carlo policy comparison on a scenario file),
``index-dump`` (tabulate indices over a state grid), ``lower-bound``
(Lagrangian dual bound), ``pcl-check`` (index-precondition probes), and
``reproduce`` (bundled experiment presets; writes CSVs, PNG figures, and a
manifest).

Exit codes: 0 ok, 1 probe failure, 2 bad configuration or scenario file,
3 index anomaly (nonpositive marginal work), 4 dual-search setup failure,
5 non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bound, pcl, report, sim
from .index import MarginalWorkError, marginal_batch
from .reproduce import run_preset
from .presets import PRESETS
from .scenario import ScenarioValidationError, load_scenario, validate
from .tec import make_batch

EXIT_OK = 0
EXIT_PROBE_FAIL = 1
EXIT_CONFIG = 2
EXIT_INDEX_ANOMALY = 3
EXIT_DUAL_SETUP = 4
EXIT_NO_CONVERGENCE = 5

DEFAULT_POLICIES = "whittle_mp,myopic,tec_trace"


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("RMAB_BEAMSCHED_THREADS")
    return max(1, int(env)) if env else 1


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap; falls back to RMAB_BEAMSCHED_THREADS, then 1")


def _load(path: str, relax: bool):
    try:
        return load_scenario(path, validated=False) if relax else load_scenario(path)
    except FileNotFoundError as exc:
        raise SystemExit(_fail(EXIT_CONFIG, f"scenario file not found: {exc}"))
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ScenarioValidationError):
            raise
        raise SystemExit(_fail(EXIT_CONFIG, f"malformed scenario file: {exc}"))


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    spec = _load(args.scenario, relax=True)
    spec = validate(spec, relax_mode_order=args.relax_mode_order)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    result = sim.monte_carlo(spec, policies, args.nmc, master_seed=args.seed,
                             T=args.horizon, threads=_threads(args))
    out = Path(args.out)
    report.write_csv(out, report.RESULTS_HEADER, report.results_rows(result))
    report.write_manifest(out.parent, "simulate",
                          {"scenario": str(args.scenario), "policies": policies,
                           "horizon": result.horizon, "nmc": args.nmc},
                          args.seed, [out], time.perf_counter() - started)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_index_dump(args) -> int:
    started = time.perf_counter()
    spec = _load(args.scenario, relax=True)
    spec = validate(spec, relax_mode_order=args.relax_mode_order)
    target = spec.targets[args.target]
    n = int(round((args.p_max - args.p_min) / args.step)) + 1
    grid = args.p_min + args.step * np.arange(max(1, n))
    grid = grid[grid <= args.p_max + 1e-12]
    tau = args.tau if args.tau is not None else spec.tau

    batch = make_batch([target])
    if target.dim == 1:
        states = grid[:, None]
    else:
        states = grid[:, None, None, None] * np.eye(target.dim)[None, None]
    f, g = marginal_batch(batch, states, grid[:, None], spec.beta, tau)
    f, g = f[:, 0], g[:, 0]
    up = batch.scalar_state(batch.step_untracked(states))[:, 0]
    tr = batch.scalar_state(batch.step_tracked(states))[:, 0]
    anomalies = int(np.count_nonzero(g <= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        mp = np.where(g > 0, f / g, np.nan)
    rows = [
        [p, (None if gv <= 0 else mpv), target.d * p, target.d * (u - t),
         ("g<=0" if gv <= 0 else "")]
        for p, mpv, gv, u, t in zip(grid, mp, g, up, tr)
    ]
    out = Path(args.out)
    report.write_csv(out, ["P_or_trace_over_L", "mp", "tec", "myopic", "flag"], rows)
    report.write_manifest(out.parent, "index-dump",
                          {"scenario": str(args.scenario), "target": args.target,
                           "p_min": args.p_min, "p_max": args.p_max,
                           "step": args.step, "tau": tau},
                          args.seed, [out], time.perf_counter() - started)
    print(f"wrote {out}")
    if anomalies:
        return _fail(EXIT_INDEX_ANOMALY,
                     f"{anomalies} grid point(s) with nonpositive marginal work")
    return EXIT_OK


def cmd_lower_bound(args) -> int:
    started = time.perf_counter()
    spec = _load(args.scenario, relax=True)
    spec = validate(spec, relax_mode_order=args.relax_mode_order)
    dual = bound.dual_search(spec, lambda_max=args.lambda_max,
                             search_tol=args.search_tol, tol=args.tol,
                             max_iter=args.max_iter, threads=_threads(args))
    out = Path(args.out)
    report.write_csv(out, ["lambda_star", "V_D"], [[dual.lambda_star, dual.value]])
    trace_path = out.with_name(out.stem + "_trace" + out.suffix)
    report.write_csv(trace_path, ["lambda", "L_value"],
                     sorted(dual.trace, key=lambda t: t[0]))
    report.write_manifest(out.parent, "lower-bound",
                          {"scenario": str(args.scenario),
                           "lambda_max": dual.lambda_max, "tol": args.tol,
                           "search_tol": args.search_tol},
                          args.seed, [out, trace_path], time.perf_counter() - started)
    print(f"lambda_star={dual.lambda_star!r} V_D={dual.value!r}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_pcl_check(args) -> int:
    started = time.perf_counter()
    spec = _load(args.scenario, relax=True)
    spec = validate(spec, relax_mode_order=True)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = int(round((args.p_max - args.p_min) / args.step)) + 1
    grid = args.p_min + args.step * np.arange(max(1, n))
    z_grid = np.asarray(sorted(float(z) for z in args.z.split(",")))
    tau = args.tau if args.tau is not None else spec.tau

    artifacts = []
    summaries = []
    all_pass = True
    for idx, target in enumerate(spec.targets):
        work = pcl.probe_marginal_work(target, spec.beta, tau, grid, z_grid)
        reg = pcl.probe_index_regularity(target, spec.beta, tau, grid)
        all_pass = all_pass and work.passed and reg.passed
        label = f"target{idx}" + (f"_{target.tag}" if target.tag else "")
        rows = []
        for zi, z in enumerate(z_grid):
            rows.extend([p, z, g, f] for p, g, f in
                        zip(grid, work.g_values[zi], work.f_values[zi]))
        artifacts.append(report.write_csv(out_dir / f"{label}_marginal_work.csv",
                                          ["P", "z", "g", "f"], rows))
        artifacts.append(report.write_csv(
            out_dir / f"{label}_index.csv", ["P", "mp_star"],
            list(zip(grid, reg.curve))))
        summaries.append(f"[{label}]")
        summaries.append(work.summary())
        summaries.append(reg.summary())
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("\n".join(summaries) + "\n")
    artifacts.append(summary_path)
    report.write_manifest(out_dir, "pcl-check",
                          {"scenario": str(args.scenario), "p_min": args.p_min,
                           "p_max": args.p_max, "step": args.step,
                           "z": z_grid.tolist(), "tau": tau},
                          args.seed, artifacts, time.perf_counter() - started)
    print("\n".join(summaries))
    return EXIT_OK if all_pass else EXIT_PROBE_FAIL


def cmd_reproduce(args) -> int:
    artifacts = run_preset(args.preset, args.out_dir, seed=args.seed,
                           n_mc=args.nmc, threads=_threads(args))
    for a in artifacts:
        print(f"wrote {a}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmab-beamsched",
        description="Beam scheduling for smart-target tracking: index policies, "
                    "bounds, probes, and experiment presets.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo policy comparison on a scenario file")
    p.add_argument("scenario")
    p.add_argument("--policies", default=DEFAULT_POLICIES)
    p.add_argument("--horizon", type=int, default=None, help="override the scenario horizon")
    p.add_argument("--nmc", type=int, default=100)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--relax-mode-order", action="store_true",
                   help="accept mode-probability vectors that break the ordering assumption")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("index-dump", help="tabulate mp/tec/myopic indices over a state grid")
    p.add_argument("scenario")
    p.add_argument("--target", type=int, default=0)
    p.add_argument("--p-min", type=float, default=0.01)
    p.add_argument("--p-max", type=float, default=20.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--out", default="index_table.csv")
    p.add_argument("--relax-mode-order", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_index_dump)

    p = sub.add_parser("lower-bound", help="Lagrangian dual lower bound (scalar scenarios)")
    p.add_argument("scenario")
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--search-tol", type=float, default=None)
    p.add_argument("--tol", type=float, default=bound.DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=bound.DEFAULT_MAX_ITER)
    p.add_argument("--out", default="lower_bound.csv")
    p.add_argument("--relax-mode-order", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("pcl-check", help="probe marginal-work positivity and index regularity")
    p.add_argument("scenario")
    p.add_argument("--p-min", type=float, default=0.01)
    p.add_argument("--p-max", type=float, default=20.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--z", default="4,10", help="comma-separated threshold values")
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--out-dir", default="pcl_check")
    _add_common(p)
    p.set_defaults(func=cmd_pcl_check)

    p = sub.add_parser("reproduce", help="run a bundled experiment preset")
    p.add_argument("preset", choices=PRESETS)
    p.add_argument("--out-dir", default="reproduce_out")
    p.add_argument("--nmc", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except MarginalWorkError as exc:
        return _fail(EXIT_INDEX_ANOMALY, str(exc))
    except bound.BoundSetupError as exc:
        return _fail(EXIT_DUAL_SETUP, str(exc))
    except bound.ConvergenceError as exc:
        return _fail(EXIT_NO_CONVERGENCE, str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
