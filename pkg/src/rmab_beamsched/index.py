"""Threshold-policy metrics, marginal metrics, the MP index, and baselines.

A z-threshold policy tracks a target exactly when its scalar state level
(the TEV for L == 1, tr(P)/L otherwise) strictly exceeds z; equality is
passive.  Because the state recursion is deterministic, the discounted cost
and work metrics are computed by unrolling the closed-loop trajectory for
``tau`` slots, valuing the tail beyond ``tau`` at zero for both metrics.

The marginal metrics compare the two policies that force a first action and
then follow the same threshold; their ratio at the self-threshold is the MP
index.  A nonpositive marginal work value is surfaced, never clamped: it
falsifies the positivity condition the index construction relies on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tec
from .scenario import TargetSpec

__all__ = [
    "ThresholdMetrics",
    "MarginalMetrics",
    "IndexValue",
    "MarginalWorkError",
    "IndexTable",
    "threshold_action",
    "threshold_metrics",
    "marginal_metrics",
    "mp_index",
    "tec_index",
    "myopic_index",
    "build_index_table",
    "mp_index_batch",
    "marginal_batch",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThresholdMetrics:
    """Discounted cost / work accumulated under a z-threshold policy."""

    cost: float
    work: float
    tau: int


@dataclass(frozen=True)
class MarginalMetrics:
    """First-action cost saving and extra work of forcing tracking now.

    ``mp`` is the ratio cost/work and is None when the marginal work is not
    positive; the offending (state level, threshold, work) triple stays
    attached for diagnosis.
    """

    marginal_cost: float
    marginal_work: float
    mp: float | None
    state_level: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.marginal_work > 0


@dataclass(frozen=True)
class IndexValue:
    value: float
    kind: str


class MarginalWorkError(RuntimeError):
    """Marginal work came out nonpositive where the index needs it positive."""

    def __init__(self, state_level: float, threshold: float, work: float):
        self.state_level = state_level
        self.threshold = threshold
        self.work = work
        super().__init__(
            f"marginal work {work:g} <= 0 at state level {state_level:g} "
            f"(threshold {threshold:g}); the positivity conjecture fails here"
        )


def threshold_action(P, z: float) -> int:
    """1 iff the state level strictly exceeds z (ties are passive)."""
    level = float(P) if np.ndim(P) == 0 else float(np.trace(P)) / P.shape[0]
    return int(level > z)


# ---------------------------------------------------------------------------
# trajectory engine
# ---------------------------------------------------------------------------

def _unroll(batch, states, z, beta: float, tau: int, first_action=None):
    """Discounted cost/work along the z-threshold trajectory, tail valued 0.

    ``states`` has target axes as in the batch engine; ``z`` broadcasts
    against the scalar state level.  t = 0 uses ``first_action`` when given.
    """
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    s = states
    level = batch.scalar_state(s)
    if first_action is None:
        a = (level > z).astype(np.float64)
    else:
        a = np.broadcast_to(np.asarray(first_action, dtype=np.float64), level.shape)
    costs = np.array(batch.cost(s, a), dtype=np.float64, copy=True)
    works = np.array(a, dtype=np.float64, copy=True)
    disc = 1.0
    for _ in range(1, tau):
        s = batch.step(s, a > 0.5)
        disc *= beta
        a = (batch.scalar_state(s) > z).astype(np.float64)
        costs += disc * batch.cost(s, a)
        works += disc * a
    return costs, works


def marginal_batch(batch, states, z, beta: float, tau: int):
    """Marginal cost/work arrays for a stack of states and thresholds."""
    z = np.asarray(z, dtype=np.float64)
    stacked = np.stack([states, states])
    lead = np.ones(np.ndim(batch.scalar_state(states)), dtype=int)
    forced = np.reshape([0.0, 1.0], (2, *lead))
    costs, works = _unroll(batch, stacked, z[None], beta, tau, first_action=forced)
    return costs[0] - costs[1], works[1] - works[0]


def mp_index_batch(batch, states, beta: float, tau: int):
    """MP index at the self-threshold for a stack of states.

    Raises MarginalWorkError at the first state whose marginal work is
    nonpositive; the violation is reported, never patched.
    """
    z = batch.scalar_state(states)
    f, g = marginal_batch(batch, states, z, beta, tau)
    if np.any(g <= 0):
        flat_g = np.ravel(g)
        j = int(np.argmin(flat_g))
        raise MarginalWorkError(float(np.ravel(z)[j]), float(np.ravel(z)[j]), float(flat_g[j]))
    return f / g


def _single_batch(target: TargetSpec):
    return tec.make_batch([target])


def _wrap_state(target: TargetSpec, P):
    if target.dim == 1:
        return np.asarray([float(P)], dtype=np.float64)
    return np.asarray(P, dtype=np.float64)[None]


# ---------------------------------------------------------------------------
# public per-state operations
# ---------------------------------------------------------------------------

def threshold_metrics(P, z: float, target: TargetSpec, beta: float, tau: int) -> ThresholdMetrics:
    """Discounted cost and work of the z-threshold policy started at P."""
    batch = _single_batch(target)
    costs, works = _unroll(batch, _wrap_state(target, P), np.asarray(float(z)), beta, tau)
    return ThresholdMetrics(cost=float(costs[0]), work=float(works[0]), tau=tau)


def marginal_metrics(P, z: float, target: TargetSpec, beta: float, tau: int) -> MarginalMetrics:
    batch = _single_batch(target)
    state = _wrap_state(target, P)
    f, g = marginal_batch(batch, state, np.asarray([float(z)]), beta, tau)
    f, g = float(f[0]), float(g[0])
    level = float(batch.scalar_state(state)[0])
    return MarginalMetrics(
        marginal_cost=f,
        marginal_work=g,
        mp=(f / g) if g > 0 else None,
        state_level=level,
        threshold=float(z),
    )


def mp_index(P, target: TargetSpec, beta: float, tau: int) -> IndexValue:
    """MP index mp(P, z) at the self-threshold z = state level of P."""
    batch = _single_batch(target)
    value = mp_index_batch(batch, _wrap_state(target, P), beta, tau)
    return IndexValue(value=float(value[0]), kind="mp")


def _level(P) -> float:
    return float(P) if np.ndim(P) == 0 else float(np.trace(P)) / P.shape[0]


def tec_index(P, target: TargetSpec) -> IndexValue:
    """Current error level weighted by importance: d * tr(P) / L."""
    return IndexValue(value=target.d * _level(P), kind="tec")


def myopic_index(P, target: TargetSpec) -> IndexValue:
    """One-step trace reduction d * [tr(phi0(P)) - tr(phi1(P))] / L."""
    up = tec.step_untracked(P, target)
    tr = tec.step_tracked(P, target)
    return IndexValue(value=target.d * (_level(up) - _level(tr)), kind="myopic")


# ---------------------------------------------------------------------------
# precomputed tables
# ---------------------------------------------------------------------------

@dataclass
class IndexTable:
    """MP/tec/myopic indices tabulated on a strictly increasing state grid.

    Lookups between knots interpolate linearly; lookups outside the grid are
    clamped to the end values and logged.  For matrix-state targets the grid
    parameterizes the scaled-identity family x * I, whose level tr/L is x.
    """

    grid: np.ndarray
    mp: np.ndarray
    tec: np.ndarray
    myopic: np.ndarray

    def mp_at(self, levels):
        x = np.asarray(levels, dtype=np.float64)
        clamped = int(np.count_nonzero((x < self.grid[0]) | (x > self.grid[-1])))
        if clamped:
            logger.warning(
                "index table lookup clamped %d state(s) outside [%g, %g]",
                clamped, self.grid[0], self.grid[-1],
            )
        out = np.interp(x, self.grid, self.mp)
        return float(out) if np.ndim(levels) == 0 else out

    __call__ = mp_at

    def to_csv(self, path: str | Path):
        with open(path, "w") as fh:
            fh.write("P_or_trace_over_L,mp,tec,myopic\n")
            for x, a, b, c in zip(self.grid, self.mp, self.tec, self.myopic):
                fh.write(f"{float(x)!r},{float(a)!r},{float(b)!r},{float(c)!r}\n")


def build_index_table(target: TargetSpec, beta: float, tau: int, grid) -> IndexTable:
    """Tabulate the indices of one target over a state grid.

    Raises MarginalWorkError on any grid point with nonpositive marginal work.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D array")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    batch = _single_batch(target)
    if target.dim == 1:
        states = grid[:, None]
    else:
        states = grid[:, None, None, None] * np.eye(target.dim)[None, None]
    mp = mp_index_batch(batch, states, beta, tau)[..., 0]
    up = batch.scalar_state(batch.step_untracked(states))[..., 0]
    tr = batch.scalar_state(batch.step_tracked(states))[..., 0]
    return IndexTable(
        grid=grid,
        mp=np.asarray(mp, dtype=np.float64),
        tec=target.d * grid,
        myopic=target.d * (up - tr),
    )
