"""Numerical probes behind the index construction.

The MP index is only known to coincide with the Whittle index when the
marginal work stays positive on all states and thresholds and the index curve
is monotone non-decreasing, continuous, and bounded below.  Neither property
is proven for this model, so these probes gather grid evidence: they report
findings and never clamp or patch a violation.  Continuity is summarized as
the largest adjacent jump, not asserted.  The integral cost/work identity is
not probed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import index as index_mod
from . import tec
from .scenario import DynamicsMode, TargetSpec

__all__ = [
    "ProbeReport",
    "probe_marginal_work",
    "probe_index_regularity",
    "probe_index_vs_noise",
]

MONOTONE_TOL = 1e-9


@dataclass
class ProbeReport:
    kind: str
    params: dict
    passed: bool
    flagged: bool = False
    min_g: float | None = None
    min_g_at: tuple[float, float] | None = None        # (P, z)
    nonpositive_g: list[tuple[float, float, float]] = field(default_factory=list)
    monotonicity_violations: list[tuple[float, float, float, float]] = field(default_factory=list)
    max_adjacent_jump: float | None = None
    min_index: float | None = None
    grid: np.ndarray | None = None
    curve: np.ndarray | None = None                     # mp values along the grid
    g_values: np.ndarray | None = None                  # (n_z, n_P) marginal work
    f_values: np.ndarray | None = None

    def summary(self) -> str:
        lines = [f"probe {self.kind}: {'PASS' if self.passed else 'FAIL'}"]
        if self.min_g is not None:
            lines.append(f"  min marginal work {self.min_g:.6g} at (P, z) = {self.min_g_at}")
        if self.nonpositive_g:
            lines.append(f"  {len(self.nonpositive_g)} nonpositive marginal-work grid points")
        if self.curve is not None and self.min_index is not None:
            lines.append(f"  min index {self.min_index:.6g}, "
                         f"max adjacent jump {self.max_adjacent_jump:.6g}, "
                         f"{len(self.monotonicity_violations)} monotonicity violations")
        if self.flagged:
            lines.append("  partial: marginal work nonpositive somewhere on the grid")
        return "\n".join(lines)


def _grid_states(target: TargetSpec, grid: np.ndarray) -> np.ndarray:
    if target.dim == 1:
        return grid[:, None]
    return grid[:, None, None, None] * np.eye(target.dim)[None, None]


def probe_marginal_work(target: TargetSpec, beta: float, tau: int,
                        P_grid, z_grid) -> ProbeReport:
    """Evaluate the marginal work on a (P, z) grid; nonpositive values are findings."""
    P_grid = np.asarray(P_grid, dtype=np.float64)
    z_grid = np.asarray(z_grid, dtype=np.float64)
    if P_grid.size > 1 and np.any(np.diff(P_grid) <= 0):
        raise ValueError("P grid must be strictly increasing")
    if z_grid.size > 1 and np.any(np.diff(z_grid) <= 0):
        raise ValueError("z grid must be strictly increasing")
    batch = tec.make_batch([target])
    states = _grid_states(target, P_grid)
    g_rows, f_rows = [], []
    for z in z_grid:
        f, g = index_mod.marginal_batch(batch, states, np.asarray([z]), beta, tau)
        f_rows.append(f[:, 0])
        g_rows.append(g[:, 0])
    g_all = np.stack(g_rows)
    f_all = np.stack(f_rows)
    flat = int(np.argmin(g_all))
    zi, pi = np.unravel_index(flat, g_all.shape)
    bad = [(float(P_grid[j]), float(z_grid[i]), float(g_all[i, j]))
           for i, j in zip(*np.nonzero(g_all <= 0))]
    return ProbeReport(
        kind="marginal_work",
        params={"beta": beta, "tau": tau, "n_P": int(P_grid.size), "z": z_grid.tolist()},
        passed=not bad,
        min_g=float(g_all[zi, pi]),
        min_g_at=(float(P_grid[pi]), float(z_grid[zi])),
        nonpositive_g=bad,
        grid=P_grid,
        g_values=g_all,
        f_values=f_all,
    )


def probe_index_regularity(target: TargetSpec, beta: float, tau: int, P_grid) -> ProbeReport:
    """Check the index curve on a grid for adjacent decreases and report its range."""
    P_grid = np.asarray(P_grid, dtype=np.float64)
    if P_grid.size > 1 and np.any(np.diff(P_grid) <= 0):
        raise ValueError("P grid must be strictly increasing")
    batch = tec.make_batch([target])
    states = _grid_states(target, P_grid)
    f, g = index_mod.marginal_batch(batch, states, P_grid[:, None], beta, tau)
    f, g = f[:, 0], g[:, 0]
    flagged = bool(np.any(g <= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        curve = np.where(g > 0, f / g, np.nan)
    valid = ~np.isnan(curve)
    violations = []
    jumps = []
    for i in range(P_grid.size - 1):
        if valid[i] and valid[i + 1]:
            jumps.append(abs(curve[i + 1] - curve[i]))
            if curve[i + 1] < curve[i] - MONOTONE_TOL:
                violations.append((float(P_grid[i]), float(P_grid[i + 1]),
                                   float(curve[i]), float(curve[i + 1])))
    return ProbeReport(
        kind="index_regularity",
        params={"beta": beta, "tau": tau, "n_P": int(P_grid.size)},
        passed=not violations and not flagged,
        flagged=flagged,
        monotonicity_violations=violations,
        max_adjacent_jump=float(max(jumps)) if jumps else None,
        min_index=float(np.nanmin(curve)) if valid.any() else None,
        grid=P_grid,
        curve=curve,
    )


def probe_index_vs_noise(target_template: TargetSpec, beta: float, tau: int,
                         P_fixed: float, q_noise_grid) -> ProbeReport:
    """Index of a fixed state as the maneuvering-mode noise amplitude sweeps.

    The template's last mode is rebuilt with each amplitude on the grid
    (keeping its base covariance shape Q / q fixed).
    """
    q_grid = np.asarray(q_noise_grid, dtype=np.float64)
    if np.any(q_grid <= 0) or (q_grid.size > 1 and np.any(np.diff(q_grid) <= 0)):
        raise ValueError("q grid must be positive and strictly increasing")
    last = target_template.modes[-1]
    q_base = last.Q / last.q
    curve = np.empty(q_grid.size)
    for i, q in enumerate(q_grid):
        mode = DynamicsMode(last.label, last.F, q * q_base, float(q))
        target = dc_replace(target_template, modes=target_template.modes[:-1] + (mode,))
        batch = tec.make_batch([target])
        states = _grid_states(target, np.asarray([P_fixed]))
        curve[i] = index_mod.mp_index_batch(batch, states, beta, tau)[0, 0]
    return ProbeReport(
        kind="index_vs_noise",
        params={"beta": beta, "tau": tau, "P": float(P_fixed)},
        passed=True,
        grid=q_grid,
        curve=curve,
        min_index=float(curve.min()),
    )
