"""Runners behind the ``reproduce`` command: one per bundled preset.

Each runner materializes its built-in scenarios, runs the needed modules,
and writes CSV data plus rendered PNG figures and a manifest into the output
directory.  Returns the list of artifact paths.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import bound, pcl, report, sim
from .presets import (
    SWEEP_SIZES,
    fig3_scenarios,
    fig5_scenarios,
    fig67_scenarios,
    probe_target,
    table_scenarios,
)
from .sim import replication_seed

POLICIES = ("whittle_mp", "myopic", "tec_trace")
PROBE_GRID = (0.01, 20.0, 0.01)


def _probe_grid() -> np.ndarray:
    lo, hi, step = PROBE_GRID
    return lo + step * np.arange(int(round((hi - lo) / step)) + 1)


def _run_tables(preset: str, out_dir: Path, seed: int, n_mc: int, threads: int):
    cells = table_scenarios(preset)
    rows = []
    artifacts = []
    by_label: dict[str, dict[str, list[float]]] = {}
    for (label, K), spec in cells.items():
        res = sim.monte_carlo(spec, POLICIES, n_mc, master_seed=seed, threads=threads)
        rows.extend(report.results_rows(res))
        for name, st in res.stats.items():
            by_label.setdefault(label, {}).setdefault(name, []).append(st.mean_cost)
    artifacts.append(report.write_csv(out_dir / f"{preset}_results.csv",
                                      report.RESULTS_HEADER, rows))
    labels = sorted(by_label)
    for label in labels:
        artifacts.append(report.bar_figure(
            out_dir / f"{preset}_{label}.png",
            [f"K={k}" for k in (1, 2, 3)],
            by_label[label],
            ylabel="mean discounted cost",
            title=f"{preset} ({label})",
        ))
    return artifacts


def _run_fig1(out_dir: Path, seed: int, n_mc: int, threads: int):
    grid = _probe_grid()
    artifacts = []
    for kind in ("reckless", "cautious"):
        panels = []
        rows = []
        for q_ct in (4.0, 10.0):
            for z in (4.0, 10.0):
                rep = pcl.probe_marginal_work(probe_target(kind, q_ct), 0.9, 100,
                                              grid, np.asarray([z]))
                g = rep.g_values[0]
                f = rep.f_values[0]
                rows.extend([q_ct, z, p, gv, fv] for p, gv, fv in zip(grid, g, f))
                panels.append({
                    "x": grid,
                    "series": {"g(P, z)": g, "f(P, z)": f},
                    "xlabel": "P",
                    "ylabel": "marginal metric",
                    "title": f"z={z:g}, q_ct={q_ct:g}",
                    "logy": True,
                })
        artifacts.append(report.write_csv(
            out_dir / f"fig1_{kind}.csv", ["q_ct", "z", "P", "g", "f"], rows))
        artifacts.append(report.line_figure(
            out_dir / f"fig1_{kind}.png", panels, suptitle=f"marginal metrics ({kind})"))
    return artifacts


def _run_fig2(out_dir: Path, seed: int, n_mc: int, threads: int):
    artifacts = []
    q_grid = 0.5 * np.arange(1, 81)          # q_ct sweep over (0, 40]
    p_grid = _probe_grid()
    panels = []
    noise_rows = []
    for p_fixed in (1.0, 10.0):
        series = {}
        for kind in ("reckless", "cautious"):
            rep = pcl.probe_index_vs_noise(probe_target(kind, 4.0), 0.9, 100,
                                           p_fixed, q_grid)
            series[kind] = rep.curve
            noise_rows.extend([p_fixed, kind, q, v] for q, v in zip(q_grid, rep.curve))
        panels.append({"x": q_grid, "series": series, "xlabel": "q_ct",
                       "ylabel": "MP index", "title": f"P={p_fixed:g}"})
    state_rows = []
    for q_ct in (4.0, 10.0):
        series = {}
        for kind in ("reckless", "cautious"):
            rep = pcl.probe_index_regularity(probe_target(kind, q_ct), 0.9, 100, p_grid)
            series[kind] = rep.curve
            state_rows.extend([q_ct, kind, p, v] for p, v in zip(p_grid, rep.curve))
        panels.append({"x": p_grid, "series": series, "xlabel": "P",
                       "ylabel": "MP index", "title": f"q_ct={q_ct:g}"})
    artifacts.append(report.write_csv(out_dir / "fig2_index_vs_noise.csv",
                                      ["P", "type", "q_ct", "mp"], noise_rows))
    artifacts.append(report.write_csv(out_dir / "fig2_index_vs_state.csv",
                                      ["q_ct", "type", "P", "mp"], state_rows))
    artifacts.append(report.line_figure(out_dir / "fig2.png", panels,
                                        suptitle="MP index curves"))
    return artifacts


def _gap_sweep(scenarios_by_size, seed: int, n_mc: int, threads: int, random_p0: bool):
    """Shared fig3/fig5 machinery: bound + paired runs + gap curves per size."""
    rows = []
    gap_series: dict[str, list[float]] = {name: [] for name in POLICIES}
    sizes = sorted(scenarios_by_size)
    for size in sizes:
        spec = scenarios_by_size[size]
        if random_p0:
            seeds = [replication_seed(seed, r) for r in range(n_mc)]
            p0 = sim._draw_initial_states(spec, seeds)
            dual = bound.dual_search(spec, p0_samples=p0, threads=threads)
        else:
            dual = bound.dual_search(spec, threads=threads)
        res = sim.monte_carlo(spec, POLICIES, n_mc, master_seed=seed, threads=threads)
        gaps = {name: sim.suboptimality_gap(st.mean_cost, dual.value, spec.n_targets)
                for name, st in res.stats.items()}
        res.gaps = gaps
        res.lower_bound = dual.value
        for name, st in res.stats.items():
            gap_series[name].append(gaps[name])
            rows.append([spec.name, name, spec.K, spec.n_targets, n_mc, st.mean_cost,
                         st.stderr, gaps[name], seed, res.runtime_s * 1000.0,
                         dual.value, dual.lambda_star])
    return rows, gap_series, sizes


def _run_fig3(out_dir: Path, seed: int, n_mc: int, threads: int):
    artifacts = []
    panels = []
    all_rows = []
    header = report.RESULTS_HEADER + ["V_D", "lambda_star"]
    for variant in ("reckless", "cautious", "mixed"):
        per_size = {N: spec for (v, N), spec in fig3_scenarios().items() if v == variant}
        rows, gap_series, sizes = _gap_sweep(per_size, seed, n_mc, threads,
                                             random_p0=False)
        all_rows.extend(rows)
        panels.append({"x": sizes, "series": gap_series, "xlabel": "N (K = N/4)",
                       "ylabel": "suboptimality gap (%)", "title": variant,
                       "marker": "o"})
    artifacts.append(report.write_csv(out_dir / "fig3_gaps.csv", header, all_rows))
    artifacts.append(report.line_figure(out_dir / "fig3.png", panels,
                                        suptitle="gap vs population size"))
    return artifacts


def _run_fig5(out_dir: Path, seed: int, n_mc: int, threads: int):
    artifacts = []
    header = report.RESULTS_HEADER + ["V_D", "lambda_star"]
    rows, gap_series, sizes = _gap_sweep(fig5_scenarios(), seed, n_mc, threads,
                                         random_p0=True)
    artifacts.append(report.write_csv(out_dir / "fig5_gaps.csv", header, rows))
    artifacts.append(report.line_figure(
        out_dir / "fig5.png",
        [{"x": sizes, "series": gap_series, "xlabel": "N (K = N/4)",
          "ylabel": "suboptimality gap (%)", "marker": "o"}],
        suptitle="gap vs population size (mixed weights)"))
    return artifacts


def _run_fig67(preset: str, out_dir: Path, seed: int, n_mc: int, threads: int):
    artifacts = []
    rows = []
    cost_series: dict[str, list[float]] = {name: [] for name in POLICIES}
    scenarios = fig67_scenarios(preset)
    sizes = sorted(scenarios)
    for N in sizes:
        spec = scenarios[N]
        res = sim.monte_carlo(spec, POLICIES, n_mc, master_seed=seed, threads=threads)
        rows.extend(report.results_rows(res))
        for name, st in res.stats.items():
            cost_series[name].append(st.mean_cost)
    artifacts.append(report.write_csv(out_dir / f"{preset}_results.csv",
                                      report.RESULTS_HEADER, rows))
    artifacts.append(report.line_figure(
        out_dir / f"{preset}.png",
        [{"x": sizes, "series": cost_series, "xlabel": "N (K = N/4)",
          "ylabel": "mean discounted cost", "marker": "o"}],
        suptitle=f"{preset}: cost vs population size"))
    return artifacts


def run_preset(preset: str, out_dir: str | Path, seed: int = 0, n_mc: int = 100,
               threads: int = 1) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    if preset in ("table1", "table2", "table3", "table4"):
        artifacts = _run_tables(preset, out_dir, seed, n_mc, threads)
    elif preset == "fig1":
        artifacts = _run_fig1(out_dir, seed, n_mc, threads)
    elif preset == "fig2":
        artifacts = _run_fig2(out_dir, seed, n_mc, threads)
    elif preset == "fig3":
        artifacts = _run_fig3(out_dir, seed, n_mc, threads)
    elif preset == "fig5":
        artifacts = _run_fig5(out_dir, seed, n_mc, threads)
    elif preset in ("fig6", "fig7"):
        artifacts = _run_fig67(preset, out_dir, seed, n_mc, threads)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    manifest = report.write_manifest(
        out_dir,
        command=f"reproduce {preset}",
        config={"preset": preset, "n_mc": n_mc, "threads": threads,
                "sweep_sizes": list(SWEEP_SIZES)},
        seed=seed,
        artifacts=artifacts,
        runtime_s=time.perf_counter() - started,
    )
    return [*artifacts, manifest]
