"""CSV, manifest, and figure emission for experiment runs.

Every command writes a ``manifest.json`` next to its outputs carrying the
resolved configuration, master seed, tool version, and artifact list, which
is enough to re-run the outputs bit-identically.  Numeric CSV fields use
``repr`` so doubles round-trip exactly.  Figures are rendered headless to
PNG alongside the delimited data they visualize.
"""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__

__all__ = [
    "fmt",
    "write_csv",
    "write_manifest",
    "results_rows",
    "RESULTS_HEADER",
    "line_figure",
    "bar_figure",
]

RESULTS_HEADER = [
    "scenario_id", "policy", "K", "N", "N_mc", "mean_cost", "stderr",
    "gap_percent", "seed", "runtime_ms",
]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def results_rows(result, gaps: dict | None = None):
    """Rows in the results-CSV schema for one ExperimentResult."""
    rows = []
    runtime_ms = result.runtime_s * 1000.0 / max(1, len(result.stats))
    for name, st in result.stats.items():
        gap = None
        if gaps is not None and name in gaps:
            gap = gaps[name]
        elif result.gaps is not None and name in result.gaps:
            gap = result.gaps[name]
        rows.append([
            result.scenario_id, name, result.K, result.N, result.N_mc,
            st.mean_cost, st.stderr, gap, result.master_seed, runtime_ms,
        ])
    return rows


def write_manifest(out_dir: str | Path, command: str, config: dict,
                   seed: int | None, artifacts, runtime_s: float) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "command": command,
        "config": config,
        "master_seed": seed,
        "artifacts": sorted(str(Path(a)) for a in artifacts),
        "tool_version": __version__,
        "python": platform.python_version(),
        "runtime_s": runtime_s,
        "created_unix": time.time(),
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")
    return path


def line_figure(path: str | Path, panels, suptitle: str | None = None,
                figsize=None) -> Path:
    """Render one row of line panels.

    ``panels`` is a list of dicts with keys x, series (label -> y), xlabel,
    ylabel, and optional title/logy.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(panels)
    fig, axes = plt.subplots(1, n, figsize=figsize or (4.2 * n, 3.4), squeeze=False)
    for ax, panel in zip(axes[0], panels):
        for label, y in panel["series"].items():
            ax.plot(panel["x"], y, marker=panel.get("marker", ""), label=label)
        ax.set_xlabel(panel.get("xlabel", ""))
        ax.set_ylabel(panel.get("ylabel", ""))
        if panel.get("title"):
            ax.set_title(panel["title"], fontsize=10)
        if panel.get("logy"):
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    if suptitle:
        fig.suptitle(suptitle)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def bar_figure(path: str | Path, group_labels, series, ylabel: str,
               title: str | None = None) -> Path:
    """Grouped bar chart: ``series`` maps a bar label to per-group heights."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.arange(len(group_labels), dtype=float)
    width = 0.8 / max(1, len(series))
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(group_labels), 3.6))
    for i, (label, heights) in enumerate(series.items()):
        ax.bar(x + (i - (len(series) - 1) / 2) * width, heights, width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(group_labels, fontsize=8)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
