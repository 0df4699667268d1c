"""Built-in benchmark scenarios for the bundled experiment presets.

Two target families are used throughout.  The scalar family has modes
(F, q) = (1.1, 1) and (1.3, q_ct) with H = 1, R = 2; the planar family (L = 4)
uses the constant-velocity / coordinated-turn builders with a 3 deg/s turn
rate, position-only measurements, and R = 2 I.  "Reckless" targets switch to
the maneuvering mode with probability 0.8 when tracked, "cautious" ones with
probability 0.4 (note the cautious tracked-action vector keeps mode 1 most
likely, so cautious scenarios validate with the relaxed ordering flag).

Population sweeps use N in {4, 8, 12, 16} with K = N/4; the experiment
manifests record the choice.
"""

from __future__ import annotations

import math

from .scenario import (
    MeasurementModel,
    ModeProbabilityMatrix,
    ScenarioSpec,
    TargetSpec,
    cv_mode,
    ct_mode,
    scalar_mode,
    validate,
)

__all__ = [
    "PRESETS",
    "SWEEP_SIZES",
    "reckless_probs",
    "cautious_probs",
    "scalar_target",
    "planar_target",
    "table_scenarios",
    "fig3_scenarios",
    "fig5_scenarios",
    "fig67_scenarios",
    "probe_target",
]

SWEEP_SIZES = (4, 8, 12, 16)
SWEEP_RATIO = 4          # K = N / SWEEP_RATIO
TURN_RATE_DEG = 3.0
SLOT_SECONDS = 1.0


def reckless_probs() -> ModeProbabilityMatrix:
    return ModeProbabilityMatrix([0.90, 0.10], [0.20, 0.80])


def cautious_probs() -> ModeProbabilityMatrix:
    return ModeProbabilityMatrix([0.95, 0.05], [0.60, 0.40])


def _probs(kind: str) -> ModeProbabilityMatrix:
    if kind == "reckless":
        return reckless_probs()
    if kind == "cautious":
        return cautious_probs()
    raise ValueError(f"unknown target kind {kind!r}")


def scalar_target(kind: str, q_ct: float, d: float = 1.0, h: float = 0.0,
                  P0=None, P0_rule=None) -> TargetSpec:
    return TargetSpec(
        modes=(scalar_mode("CV", 1.1, 1.0), scalar_mode("CT", 1.3, q_ct)),
        probs=_probs(kind),
        meas=MeasurementModel(1.0, 2.0),
        d=d, h=h, P0=P0, P0_rule=P0_rule, tag=kind,
    )


def planar_target(kind: str, q_ct: float, d: float = 1.0, h: float = 0.0,
                  P0=None, P0_rule=None) -> TargetSpec:
    if P0 is None and P0_rule is None:
        P0_rule = {"gram_uniform01": 4}
    return TargetSpec(
        modes=(
            cv_mode(1.0, SLOT_SECONDS),
            ct_mode(q_ct, math.radians(TURN_RATE_DEG), SLOT_SECONDS),
        ),
        probs=_probs(kind),
        meas=MeasurementModel([[1, 0, 0, 0], [0, 0, 1, 0]], [[2.0, 0.0], [0.0, 2.0]]),
        d=d, h=h, P0=P0, P0_rule=P0_rule, tag=kind,
    )


def _validated(targets, K, name) -> ScenarioSpec:
    spec = ScenarioSpec(targets=targets, K=K, beta=0.9, horizon=100, tau=100, name=name)
    return validate(spec, relax_mode_order=True)


def _mixture(kinds_quota: int, q_pattern, d_by_kind, make):
    """Half reckless then half cautious, each with the per-kind weight."""
    targets = []
    for i in range(kinds_quota):
        targets.append(make("reckless", q_pattern[i], d_by_kind["reckless"]))
    for i in range(kinds_quota):
        targets.append(make("cautious", q_pattern[i], d_by_kind["cautious"]))
    return targets


def table_scenarios(preset: str):
    """Scenario grid behind the table presets: (label, K) -> ScenarioSpec.

    table1/table2: eight reckless/cautious targets, d = (5, 1, ..., 1),
    noise patterns all-2 and 2..9.  table3: four reckless (d = 5) then four
    cautious (d = 1), patterns all-2 and (2..5, 2..5).  table4 is the planar
    analog of table3's composition for reckless-only, cautious-only, and
    mixed populations with q_ct = 2..9 (or 2..5 twice).
    """
    N = 8
    out = {}
    if preset in ("table1", "table2"):
        kind = "reckless" if preset == "table1" else "cautious"
        patterns = {"q_all2": [2.0] * N, "q_2to9": [2.0 + n for n in range(N)]}
        for label, qs in patterns.items():
            for K in (1, 2, 3):
                targets = [
                    scalar_target(kind, qs[n], 5.0 if n == 0 else 1.0,
                                  P0_rule={"uniform_scalar": [0, 2]})
                    for n in range(N)
                ]
                out[(label, K)] = _validated(targets, K, f"{preset}_{label}_K{K}")
    elif preset == "table3":
        patterns = {"q_all2": [2.0] * (N // 2), "q_2to5x2": [2.0, 3.0, 4.0, 5.0]}
        for label, qs in patterns.items():
            for K in (1, 2, 3):
                targets = _mixture(
                    N // 2, qs, {"reckless": 5.0, "cautious": 1.0},
                    lambda kind, q, d: scalar_target(kind, q, d, P0_rule={"uniform_scalar": [0, 2]}),
                )
                out[(label, K)] = _validated(targets, K, f"table3_{label}_K{K}")
    elif preset == "table4":
        for label in ("reckless", "cautious", "mixed"):
            for K in (1, 2, 3):
                if label == "mixed":
                    targets = _mixture(
                        N // 2, [2.0, 3.0, 4.0, 5.0], {"reckless": 5.0, "cautious": 1.0},
                        lambda kind, q, d: planar_target(kind, q, d),
                    )
                else:
                    targets = [
                        planar_target(label, 2.0 + n, 5.0 if n == 0 else 1.0)
                        for n in range(N)
                    ]
                out[(label, K)] = _validated(targets, K, f"table4_{label}_K{K}")
    else:
        raise ValueError(f"unknown table preset {preset!r}")
    return out


def fig3_scenarios():
    """(variant, N) -> ScenarioSpec with d = 1, P0 = 0.01, K = N/4."""
    out = {}
    for variant in ("reckless", "cautious", "mixed"):
        for N in SWEEP_SIZES:
            K = N // SWEEP_RATIO
            if variant == "mixed":
                qs = [2.0 + i for i in range(N // 2)]
                targets = _mixture(N // 2, qs, {"reckless": 1.0, "cautious": 1.0},
                                   lambda kind, q, d: scalar_target(kind, q, d, P0=0.01))
            else:
                targets = [scalar_target(variant, 2.0 + n, 1.0, P0=0.01) for n in range(N)]
            out[(variant, N)] = _validated(targets, K, f"fig3_{variant}_N{N}")
    return out


def fig5_scenarios():
    """N -> ScenarioSpec: half reckless (d=5) / half cautious (d=1), q_ct = 4."""
    out = {}
    for N in SWEEP_SIZES:
        K = N // SWEEP_RATIO
        targets = _mixture(
            N // 2, [4.0] * (N // 2), {"reckless": 5.0, "cautious": 1.0},
            lambda kind, q, d: scalar_target(kind, q, d, P0_rule={"uniform_scalar": [0, 2]}),
        )
        out[N] = _validated(targets, K, f"fig5_N{N}")
    return out


def fig67_scenarios(preset: str):
    """Planar population sweeps: fig6 has q_ct = 2..N/2+1 per type and d = 1;
    fig7 fixes q_ct = 4 with d = 5 on the reckless half."""
    out = {}
    for N in SWEEP_SIZES:
        K = N // SWEEP_RATIO
        if preset == "fig6":
            qs = [2.0 + i for i in range(N // 2)]
            d_by_kind = {"reckless": 1.0, "cautious": 1.0}
        elif preset == "fig7":
            qs = [4.0] * (N // 2)
            d_by_kind = {"reckless": 5.0, "cautious": 1.0}
        else:
            raise ValueError(f"unknown preset {preset!r}")
        targets = _mixture(N // 2, qs, d_by_kind, lambda kind, q, d: planar_target(kind, q, d))
        out[N] = _validated(targets, K, f"{preset}_N{N}")
    return out


def probe_target(kind: str, q_ct: float, d: float = 1.0) -> TargetSpec:
    """Scalar target for index probes (initial state supplied by the probe grid)."""
    return scalar_target(kind, q_ct, d, P0=1.0)


PRESETS = (
    "table1", "table2", "table3", "table4",
    "fig1", "fig2", "fig3", "fig5", "fig6", "fig7",
)
