"""Episode execution and the Monte Carlo experiment harness.

An episode runs the chosen index policy for T slots: score every target,
activate at most K beams, pay the discounted per-slot costs, advance the
deterministic covariance recursion.  Randomness enters only through initial
states and index tie-breaks.

Seeding discipline: replication r of an experiment uses a 64-bit seed derived
from (master_seed, r) via numpy's SeedSequence; within an episode, target n's
initial-state stream is derived from (seed, 0, n) and the tie-break stream
from (seed, 1).  All policies inside one replication therefore share the same
initial draws, giving paired comparisons.

Replications are advanced together as one stacked array per slot, which keeps
the per-slot work in a handful of vectorized operations regardless of N_mc.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import policy as policy_mod
from . import tec
from .policy import PolicyKind, as_policy_kind
from .scenario import ScenarioSpec, TargetSpec

__all__ = [
    "EpisodeResult",
    "PolicyStats",
    "ExperimentResult",
    "replication_seed",
    "sample_initial",
    "run_episode",
    "monte_carlo",
    "suboptimality_gap",
]

_INIT_STREAM = 0
_TIE_STREAM = 1


def replication_seed(master_seed: int, r: int) -> int:
    """Fixed 64-bit mixing of (master seed, replication) via SeedSequence."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(r,))
    return int(ss.generate_state(1, np.uint64)[0])


def _init_rng(seed: int, n: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(_INIT_STREAM, n))))


def _tie_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(_TIE_STREAM,))))


def sample_initial(target: TargetSpec, rng: np.random.Generator):
    """Draw (or return) the initial state of one target."""
    if target.P0 is not None:
        return target.P0 if isinstance(target.P0, float) else np.array(target.P0)
    rule = target.P0_rule
    if not rule:
        raise ValueError("target carries neither P0 nor P0_rule")
    kind, arg = next(iter(rule.items()))
    if kind == "uniform_scalar":
        lo, hi = float(arg[0]), float(arg[1])
        return float(rng.uniform(lo, hi))
    if kind == "gram_uniform01":
        L = int(arg)
        for _ in range(100):
            root = rng.uniform(size=(L, L))
            gram = root.T @ root
            gram = 0.5 * (gram + gram.T)
            if np.min(np.linalg.eigvalsh(gram)) >= 1e-9:
                return gram
        raise RuntimeError("gram_uniform01 failed to draw a numerically PD matrix in 100 tries")
    raise ValueError(f"unknown P0 rule {kind!r}")


@dataclass
class EpisodeResult:
    cost: float
    actions: np.ndarray          # (T, N) int8
    final_states: list
    seed: int
    anomalies: int = 0           # states scored without a defined MP ratio


@dataclass
class PolicyStats:
    policy: str
    mean_cost: float
    stderr: float
    costs: np.ndarray            # per-replication episode costs
    anomalies: int = 0


@dataclass
class ExperimentResult:
    scenario_id: str
    K: int
    N: int
    N_mc: int
    master_seed: int
    stats: dict[str, PolicyStats]
    runtime_s: float
    horizon: int
    gaps: dict[str, float] | None = None
    lower_bound: float | None = None


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def _draw_initial_states(scenario: ScenarioSpec, seeds: Sequence[int]) -> np.ndarray:
    """(R, N[, L, L]) stack of initial states, one row per replication seed."""
    rows = []
    for seed in seeds:
        states = [sample_initial(t, _init_rng(seed, n)) for n, t in enumerate(scenario.targets)]
        if scenario.dim == 1:
            rows.append(np.asarray(states, dtype=np.float64))
        else:
            rows.append(np.stack(states))
    return np.stack(rows)


def _run_batch(scenario: ScenarioSpec, kind: PolicyKind, T: int, p0: np.ndarray,
               tie_rngs: Sequence[np.random.Generator], tables=None,
               record_actions: bool = True):
    """Advance a stack of replications through T slots under one policy.

    States whose MP ratio is undefined (nonpositive marginal work, seen at
    rare matrix states) are scored by their marginal-cost sign and counted;
    the per-state index surface keeps its hard error for such states.
    """
    batch = tec.make_batch(scenario.targets)
    R = p0.shape[0]
    N = scenario.n_targets
    states = np.array(p0, dtype=np.float64)
    costs = np.zeros(R)
    actions = np.zeros((R, T, N), dtype=np.int8) if record_actions else None
    anomalies = 0
    disc = 1.0
    for t in range(T):
        batch.check_states(states, f"slot {t}")
        values, n_bad = policy_mod._indices_for(
            batch, states, kind, scenario.beta, scenario.tau, tables,
            nonpositive_work="dominant")
        anomalies += n_bad
        acts = np.stack([
            policy_mod.select(values[r], scenario.K, kind.nonneg_filter, tie_rngs[r])
            for r in range(R)
        ])
        costs += disc * batch.cost(states, acts).sum(axis=-1)
        if record_actions:
            actions[:, t, :] = acts
        states = batch.step(states, acts > 0)
        disc *= scenario.beta
    return costs, actions, states, anomalies


def run_episode(scenario: ScenarioSpec, kind, T: int | None = None, seed: int = 0,
                tables=None) -> EpisodeResult:
    """Run one seeded episode and return its discounted cost and schedule."""
    kind = as_policy_kind(kind)
    T = scenario.horizon if T is None else int(T)
    seed = int(seed)
    batch = tec.make_batch(scenario.targets)
    if T == 0:
        p0 = _draw_initial_states(scenario, [seed])
        return EpisodeResult(0.0, np.zeros((0, scenario.n_targets), dtype=np.int8),
                             batch.unstack_states(p0[0]), seed)
    p0 = _draw_initial_states(scenario, [seed])
    costs, actions, finals, anomalies = _run_batch(scenario, kind, T, p0, [_tie_rng(seed)], tables)
    return EpisodeResult(float(costs[0]), actions[0], batch.unstack_states(finals[0]), seed, anomalies)


def monte_carlo(scenario: ScenarioSpec, kinds, N_mc: int, master_seed: int = 0,
                T: int | None = None, tables=None, threads: int = 1) -> ExperimentResult:
    """Paired Monte Carlo comparison of several policies on one scenario.

    Every policy sees the same initial draws in every replication; costs are
    aggregated in replication order so results replay bit-identically.
    """
    if N_mc < 1:
        raise ValueError(f"N_mc must be >= 1, got {N_mc}")
    kinds = [as_policy_kind(k) for k in kinds]
    T = scenario.horizon if T is None else int(T)
    started = time.perf_counter()
    seeds = [replication_seed(master_seed, r) for r in range(N_mc)]
    p0 = _draw_initial_states(scenario, seeds)

    def run_kind(kind: PolicyKind):
        if threads > 1 and N_mc > 1:
            chunks = np.array_split(np.arange(N_mc), min(threads, N_mc))
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                futures = [
                    pool.submit(_run_batch, scenario, kind, T, p0[idx],
                                [_tie_rng(seeds[r]) for r in idx], tables, False)
                    for idx in chunks
                ]
                parts = [f.result() for f in futures]
            return np.concatenate([p[0] for p in parts]), sum(p[3] for p in parts)
        out = _run_batch(scenario, kind, T, p0, [_tie_rng(s) for s in seeds], tables, False)
        return out[0], out[3]

    stats = {}
    for kind in kinds:
        costs, anomalies = run_kind(kind)
        stderr = float(costs.std(ddof=1) / np.sqrt(N_mc)) if N_mc > 1 else 0.0
        stats[kind.kind] = PolicyStats(kind.kind, float(costs.mean()), stderr, costs, anomalies)
    return ExperimentResult(
        scenario_id=scenario.name,
        K=scenario.K,
        N=scenario.n_targets,
        N_mc=N_mc,
        master_seed=int(master_seed),
        stats=stats,
        runtime_s=time.perf_counter() - started,
        horizon=T,
    )


def suboptimality_gap(mean_cost: float, V_D: float, N: int = 1) -> float:
    """Percent excess of the per-target cost over the per-target lower bound."""
    if not V_D > 0:
        raise ValueError(f"lower bound must be positive, got {V_D}")
    return 100.0 * (mean_cost / N - V_D / N) / (V_D / N)
