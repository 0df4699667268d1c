"""Turning per-target indices into a feasible per-slot action vector.

At most K targets are tracked per slot.  The K largest indices win; with the
nonnegativity filter on (the default), negative-index targets are never
tracked even when beams are idle.  Exact index ties at the cutoff are broken
uniformly at random through the caller-owned generator, so identical seeds
replay identical schedules.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import index as index_mod
from . import tec
from .scenario import ScenarioSpec

__all__ = ["PolicyKind", "POLICY_KINDS", "select", "decide"]

logger = logging.getLogger(__name__)

POLICY_KINDS = ("whittle_mp", "myopic", "tec_trace")


@dataclass(frozen=True)
class PolicyKind:
    kind: str
    nonneg_filter: bool = True

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")


def as_policy_kind(kind) -> PolicyKind:
    return kind if isinstance(kind, PolicyKind) else PolicyKind(str(kind))


def select(indices, K: int, nonneg_filter: bool = True, rng: np.random.Generator | None = None) -> np.ndarray:
    """Activate the K largest indices; ties at the cutoff are drawn uniformly.

    The generator is consulted only when a tie actually forces a choice, so
    tie-free slots consume no randomness.
    """
    values = np.asarray(indices, dtype=np.float64)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not np.all(np.isfinite(values)):
        raise ValueError("indices must be finite")
    actions = np.zeros(values.shape[0], dtype=np.int8)
    candidates = np.flatnonzero(values >= 0) if nonneg_filter else np.arange(values.shape[0])
    if candidates.size <= K:
        actions[candidates] = 1
        return actions
    vals = values[candidates]
    cutoff = np.partition(vals, -K)[-K]
    above = candidates[vals > cutoff]
    tied = candidates[vals == cutoff]
    need = K - above.size
    actions[above] = 1
    if need:
        if tied.size > need:
            if rng is None:
                raise ValueError("rng is required to break index ties")
            tied = rng.choice(tied, size=need, replace=False)
        actions[tied] = 1
    return actions


# Priority handed to a state where forcing tracking reduces both discounted
# cost and discounted work: no finite subsidy makes it passive-optimal.
DOMINANT_PRIORITY = 1e30


def _indices_for(batch, states, kind: PolicyKind, beta: float, tau: int,
                 tables: Sequence[index_mod.IndexTable] | None,
                 nonpositive_work: str = "raise"):
    """Index array for a stacked state array; shared by decide and the simulator.

    Returns (values, anomaly_count).  ``nonpositive_work`` picks the handling
    of states whose MP ratio is undefined (marginal work <= 0, which does
    occur at rare matrix states): "raise" propagates the violation, while
    "dominant" scores the state +/-DOMINANT_PRIORITY by the sign of its
    marginal cost and counts the occurrence.
    """
    if kind.kind == "tec_trace":
        return batch.d * batch.scalar_state(states), 0
    if kind.kind == "myopic":
        up = batch.scalar_state(batch.step_untracked(states))
        tr = batch.scalar_state(batch.step_tracked(states))
        return batch.d * (up - tr), 0
    if tables is not None:
        levels = batch.scalar_state(states)
        out = np.empty_like(levels)
        for n, table in enumerate(tables):
            out[..., n] = table.mp_at(levels[..., n])
        return out, 0
    if nonpositive_work == "raise":
        return index_mod.mp_index_batch(batch, states, beta, tau), 0
    z = batch.scalar_state(states)
    f, g = index_mod.marginal_batch(batch, states, z, beta, tau)
    bad = g <= 0
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        logger.warning(
            "marginal work <= 0 at %d state(s); scoring them by marginal-cost sign "
            "(min g %g at level %g)",
            n_bad, float(g[bad].min()), float(z[bad][np.argmin(g[bad])]),
        )
        values = np.where(bad, np.where(f > 0, DOMINANT_PRIORITY, -DOMINANT_PRIORITY),
                          f / np.where(bad, 1.0, g))
        return values, n_bad
    return f / g, 0


def decide(states, scenario: ScenarioSpec, kind, tables=None,
           rng: np.random.Generator | None = None) -> np.ndarray:
    """One slot of the index policy: score every target, then select top-K."""
    kind = as_policy_kind(kind)
    batch = tec.make_batch(scenario.targets)
    stacked = batch.stack_states(states)
    values, _ = _indices_for(batch, stacked, kind, scenario.beta, scenario.tau, tables)
    return select(values, scenario.K, kind.nonneg_filter, rng)
