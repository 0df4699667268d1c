"""Lagrangian-relaxation lower bound for scalar-state scenarios.

Attaching a subsidy lam >= 0 to each tracking action decouples the targets;
each single-target subproblem is solved by value iteration over a discretized
TEV grid (images off the grid interpolate linearly, with a linear tail above
the grid top, where the converged value is affine because tracking is then
immediate).  The dual function lam -> sum_n v_n(P0_n) - K lam / (1 - beta) is
concave, so a golden-section search over lam produces the best lower bound.

Only the one-dimensional case is supported; the multi-dimensional bound is an
explicit non-goal.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import index as index_mod
from . import tec
from .scenario import ScenarioSpec, TargetSpec

__all__ = [
    "ValueGrid",
    "DualResult",
    "BoundSetupError",
    "ConvergenceError",
    "default_grid",
    "value_iterate",
    "discounted_work",
    "lagrangian_value",
    "dual_search",
    "finite_horizon_dual",
]

logger = logging.getLogger(__name__)

GRID_P_MIN = 0.01
GRID_P_MAX = 50.0
GRID_STEP = 0.01
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class BoundSetupError(RuntimeError):
    """The grid or the subsidy cap cannot support the requested computation."""


class ConvergenceError(RuntimeError):
    """Value iteration failed to converge within the iteration budget."""


def default_grid(p_min: float = GRID_P_MIN, p_max: float = GRID_P_MAX,
                 step: float = GRID_STEP) -> np.ndarray:
    n = int(round((p_max - p_min) / step)) + 1
    return p_min + step * np.arange(n)


@dataclass
class ValueGrid:
    """Converged single-target value function on a TEV grid, for one subsidy."""

    grid: np.ndarray
    values: np.ndarray
    lam: float
    iterations: int
    residual: float
    residual_history: np.ndarray
    extrapolation_hits: int
    active: np.ndarray           # greedy action of the converged values
    q_passive: np.ndarray
    q_active: np.ndarray
    tail_slope: float = 0.0      # value slope used above the grid top

    def value_at(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        idx, w = _interp_coeffs(self.grid, p)
        inside = self.values[idx] * (1.0 - np.minimum(w, 1.0)) \
            + self.values[idx + 1] * np.minimum(w, 1.0)
        return inside + self.tail_slope * np.maximum(0.0, p - self.grid[-1])


@dataclass
class DualResult:
    lambda_star: float
    value: float                 # the lower bound V_D
    trace: list[tuple[float, float]]
    lambda_max: float


def _interp_coeffs(grid: np.ndarray, x: np.ndarray):
    """Segment index and weight; end segments extend linearly past the grid."""
    idx = np.searchsorted(grid, x, side="right") - 1
    idx = np.clip(idx, 0, grid.size - 2)
    w = (x - grid[idx]) / (grid[idx + 1] - grid[idx])
    return idx, w


def _target_images(target: TargetSpec, grid: np.ndarray):
    st = tec.ScalarTargets([target])
    img0 = st.step_untracked(grid[:, None])[:, 0]
    img1 = st.step_tracked(grid[:, None])[:, 0]
    low = min(float(img0.min()), float(img1.min()))
    if low < grid[0]:
        raise BoundSetupError(
            f"state image {low:g} falls below the grid start {grid[0]:g}; "
            "extend the grid downward (this should not happen for Q > 0)"
        )
    hits = int(np.count_nonzero(img0 > grid[-1]) + np.count_nonzero(img1 > grid[-1]))
    return img0, img1, hits


def value_iterate(target: TargetSpec, lam: float, beta: float,
                  grid: np.ndarray | None = None, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> ValueGrid:
    """Solve the single-target subsidy problem on the grid by value iteration.

    State images above the grid top are valued with a fixed linear tail of
    slope d: once tracking is immediate the converged value is affine with
    exactly that slope, and a data-independent tail keeps every backup a
    sup-norm beta-contraction (a tail slope read off the top grid segment
    would not, and oscillates at large subsidies).  Stops when the
    contraction bound on the remaining value error,
    residual * beta / (1 - beta), drops to ``tol``.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    img0, img1, extrapolation_hits = _target_images(target, grid)
    if extrapolation_hits:
        logger.debug("value_iterate: %d grid images extrapolate past p_max=%g",
                     extrapolation_hits, grid[-1])
    i0, w0 = _interp_coeffs(grid, img0)
    i1, w1 = _interp_coeffs(grid, img1)
    w0 = np.minimum(w0, 1.0)
    w1 = np.minimum(w1, 1.0)
    tail0 = target.d * np.maximum(0.0, img0 - grid[-1])
    tail1 = target.d * np.maximum(0.0, img1 - grid[-1])
    c_passive = target.d * grid
    c_active = target.d * grid + target.h + lam

    v = np.zeros_like(grid)
    history = []
    q0 = q1 = v
    for k in range(1, max_iter + 1):
        q0 = c_passive + beta * (v[i0] * (1.0 - w0) + v[i0 + 1] * w0 + tail0)
        q1 = c_active + beta * (v[i1] * (1.0 - w1) + v[i1 + 1] * w1 + tail1)
        v_next = np.minimum(q0, q1)
        residual = float(np.max(np.abs(v_next - v)))
        history.append(residual)
        v = v_next
        if residual * beta <= tol * (1.0 - beta):
            return ValueGrid(
                grid=grid, values=v, lam=float(lam), iterations=k,
                residual=residual, residual_history=np.asarray(history),
                extrapolation_hits=extrapolation_hits,
                active=q1 < q0, q_passive=q0, q_active=q1,
                tail_slope=target.d,
            )
    raise ConvergenceError(
        f"value iteration did not converge in {max_iter} iterations "
        f"(last residual {history[-1]:g}, lam={lam:g})"
    )


def discounted_work(target: TargetSpec, vg: ValueGrid, beta: float,
                    tol: float = 1e-9, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Expected discounted activations of the converged greedy policy, on the grid.

    Work is bounded, so images above the grid top take the top value (flat tail).
    """
    grid = vg.grid
    img0, img1, _ = _target_images(target, grid)
    i0, w0 = _interp_coeffs(grid, img0)
    i1, w1 = _interp_coeffs(grid, img1)
    w0 = np.clip(w0, 0.0, 1.0)
    w1 = np.clip(w1, 0.0, 1.0)
    a = vg.active.astype(np.float64)
    work = np.zeros_like(grid)
    for _ in range(max_iter):
        cont0 = work[i0] * (1.0 - w0) + work[i0 + 1] * w0
        cont1 = work[i1] * (1.0 - w1) + work[i1 + 1] * w1
        nxt = a + beta * np.where(vg.active, cont1, cont0)
        if np.max(np.abs(nxt - work)) <= tol:
            return nxt
        work = nxt
    raise ConvergenceError("work evaluation did not converge")


def _fixed_p0(scenario: ScenarioSpec) -> np.ndarray:
    p0 = []
    for n, t in enumerate(scenario.targets):
        if not isinstance(t.P0, float):
            raise ValueError(
                f"target {n} has no fixed scalar P0; pass explicit p0 values instead"
            )
        p0.append(t.P0)
    return np.asarray(p0)


def lagrangian_value(scenario: ScenarioSpec, lam: float, grids: Sequence[ValueGrid],
                     p0=None) -> float:
    """Decomposed relaxed value sum_n v_n(P0_n) - K lam / (1 - beta).

    ``p0`` may be an (N,) vector or an (R, N) stack of draws, in which case
    the mean over draws is returned.
    """
    if len(grids) != scenario.n_targets:
        raise ValueError("one ValueGrid per target is required")
    p0 = _fixed_p0(scenario) if p0 is None else np.asarray(p0, dtype=np.float64)
    per_target = [grids[n].value_at(p0[..., n]) for n in range(scenario.n_targets)]
    total = float(np.mean(np.sum(np.stack(per_target, axis=-1), axis=-1)))
    return total - scenario.K * lam / (1.0 - scenario.beta)


def _target_signature(t: TargetSpec) -> bytes:
    parts = [np.asarray([m.F[0, 0], m.Q[0, 0], m.q]).tobytes() for m in t.modes]
    parts += [t.probs.u0.tobytes(), t.probs.u1.tobytes(),
              t.meas.H.tobytes(), t.meas.R.tobytes(),
              np.asarray([t.d, t.h]).tobytes()]
    return b"|".join(parts)


def _default_lambda_max(scenario: ScenarioSpec, grid: np.ndarray) -> float:
    """Twice the largest MP index seen on a coarse subsample of the grid."""
    sub = np.unique(np.concatenate([grid[:: max(1, grid.size // 32)], grid[-1:]]))
    best = 0.0
    seen = set()
    for t in scenario.targets:
        sig = _target_signature(t)
        if sig in seen:
            continue
        seen.add(sig)
        st = tec.ScalarTargets([t])
        vals = index_mod.mp_index_batch(st, sub[:, None], scenario.beta, scenario.tau)
        best = max(best, float(vals.max()))
    return 2.0 * best


def dual_search(scenario: ScenarioSpec, lambda_max: float | None = None,
                search_tol: float | None = None, grid: np.ndarray | None = None,
                tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                p0_samples=None, threads: int = 1) -> DualResult:
    """Maximize the concave dual over the subsidy by golden-section search.

    ``p0_samples`` (an (R, N) stack) averages the bound over random initial
    draws; otherwise the targets' fixed P0 values are used.  The subsidy cap
    is verified by checking that at lambda_max the relaxed policies' total
    discounted work falls inside the budget K / (1 - beta), which brackets
    the dual maximum.
    """
    if scenario.dim != 1:
        raise ValueError("the lower bound is implemented for scalar-state scenarios only")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    beta = scenario.beta
    p0 = _fixed_p0(scenario) if p0_samples is None else np.asarray(p0_samples, dtype=np.float64)

    sig_of = [_target_signature(t) for t in scenario.targets]
    distinct: dict[bytes, int] = {}
    for n, s in enumerate(sig_of):
        distinct.setdefault(s, n)

    def solve_all(lam: float) -> dict[bytes, ValueGrid]:
        items = list(distinct.items())
        if threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
                grids = list(pool.map(
                    lambda it: value_iterate(scenario.targets[it[1]], lam, beta, grid, tol, max_iter),
                    items))
            return {sig: vg for (sig, _), vg in zip(items, grids)}
        return {sig: value_iterate(scenario.targets[n], lam, beta, grid, tol, max_iter)
                for sig, n in items}

    cache: dict[float, dict[bytes, ValueGrid]] = {}
    trace: list[tuple[float, float]] = []

    def L(lam: float) -> float:
        lam = float(lam)
        if lam not in cache:
            cache[lam] = solve_all(lam)
        grids_by_target = [cache[lam][s] for s in sig_of]
        val = lagrangian_value(scenario, lam, grids_by_target, p0=p0)
        trace.append((lam, val))
        return val

    if lambda_max is None:
        lambda_max = _default_lambda_max(scenario, grid)
    lambda_max = float(lambda_max)
    if search_tol is None:
        search_tol = 1e-3 * lambda_max if lambda_max > 0 else 1e-9

    value_at_zero = L(0.0)
    if lambda_max <= 0:
        return DualResult(0.0, value_at_zero, trace, lambda_max)

    # Budget check: the dual maximum must sit strictly inside [0, lambda_max].
    cap_grids = cache.setdefault(lambda_max, solve_all(lambda_max))
    budget = scenario.K / (1.0 - beta)
    total_work = 0.0
    work_by_sig = {sig: discounted_work(scenario.targets[n], cap_grids[sig], beta)
                   for sig, n in distinct.items()}
    for n, sig in enumerate(sig_of):
        wk = work_by_sig[sig]
        idx, w = _interp_coeffs(grid, np.asarray(p0[..., n]))
        total_work += float(np.mean(wk[idx] * (1.0 - w) + wk[idx + 1] * w))
    if total_work >= budget:
        raise BoundSetupError(
            f"discounted work {total_work:g} at lambda_max={lambda_max:g} still exceeds "
            f"the budget {budget:g}; rerun with a larger lambda_max"
        )

    a, b = 0.0, lambda_max
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = L(x1), L(x2)
    while b - a > search_tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = L(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = L(x2)
    L(0.5 * (a + b))
    best = max(range(len(trace)), key=lambda i: (trace[i][1], -trace[i][0]))
    lam_star, v_d = trace[best]
    return DualResult(lam_star, v_d, trace, lambda_max)


def finite_horizon_dual(scenario: ScenarioSpec, T: int, lambda_max: float | None = None,
                        search_tol: float = 1e-4) -> DualResult:
    """Exact dual bound for the T-slot truncated problem (small T only).

    Each single-target T-step subsidy problem is solved exactly by recursion
    over the binary action tree, so no state grid is involved.  Useful for
    validating the bound machinery against exhaustive enumeration.
    """
    if scenario.dim != 1:
        raise ValueError("finite_horizon_dual supports scalar-state scenarios only")
    if T > 14:
        raise ValueError("finite_horizon_dual enumerates 2^T paths; keep T <= 14")
    beta = scenario.beta
    p0 = _fixed_p0(scenario)

    def best_single(t: TargetSpec, p: float, lam: float, depth: int) -> float:
        if depth == T:
            return 0.0
        passive = tec.cost(p, 0, t) + beta * best_single(t, tec.step_untracked(p, t), lam, depth + 1)
        active = tec.cost(p, 1, t) + lam + beta * best_single(t, tec.step_tracked(p, t), lam, depth + 1)
        return min(passive, active)

    budget_term = scenario.K * (1.0 - beta**T) / (1.0 - beta)
    trace: list[tuple[float, float]] = []

    def L(lam: float) -> float:
        val = sum(best_single(t, float(p0[n]), lam, 0) for n, t in enumerate(scenario.targets))
        val -= lam * budget_term
        trace.append((lam, val))
        return val

    if lambda_max is None:
        lambda_max = _default_lambda_max(scenario, default_grid())
    a, b = 0.0, float(lambda_max)
    L(0.0)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = L(x1), L(x2)
    while b - a > search_tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = L(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = L(x2)
    L(0.5 * (a + b))
    best = max(range(len(trace)), key=lambda i: (trace[i][1], -trace[i][0]))
    lam_star, v_d = trace[best]
    return DualResult(lam_star, v_d, trace, float(lambda_max))
