"""Problem instances for multi-target beam scheduling.

A scenario bundles N targets, a beam budget K, the discount factor, the
episode horizon T, and the truncation horizon tau used by index computations.
Each target carries its dynamics modes (state transition + process noise),
the mode-switch probability vectors for the tracked/untracked actions, a
measurement model, cost weights, and an initial-state description.

Scenarios are plain frozen dataclasses.  ``validate`` returns a (possibly
renormalized) instance and raises with the complete violation list otherwise;
validated scenarios are treated as immutable and can be shared across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DynamicsMode",
    "ModeProbabilityMatrix",
    "MeasurementModel",
    "TargetSpec",
    "ScenarioSpec",
    "Violation",
    "ScenarioValidationError",
    "cv_matrix",
    "ct_matrix",
    "process_noise",
    "cv_mode",
    "ct_mode",
    "scalar_mode",
    "check",
    "validate",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "save_scenario",
]

# Probability vectors are renormalized when their sum is off by at most this.
PROB_SUM_TOL = 1e-9
# Deviations at or below this are left untouched, which keeps validate idempotent.
_PROB_SUM_EXACT = 1e-15


# ---------------------------------------------------------------------------
# matrix builders
# ---------------------------------------------------------------------------

def cv_matrix(Ts: float) -> np.ndarray:
    """Constant-velocity transition matrix for the state [x, xdot, y, ydot]."""
    if Ts <= 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    block = np.array([[1.0, Ts], [0.0, 1.0]])
    return np.kron(np.eye(2), block)


def ct_matrix(omega: float, Ts: float) -> np.ndarray:
    """Coordinated-turn transition matrix; ``omega`` is the turn rate in rad/s.

    Rejects omega == 0: the zero-turn-rate limit is exactly ``cv_matrix(Ts)``.
    """
    if omega == 0:
        raise ValueError("omega must be nonzero; use cv_matrix for the zero-rate limit")
    if Ts <= 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    s = math.sin(omega * Ts)
    c = math.cos(omega * Ts)
    return np.array(
        [
            [1.0, s / omega, 0.0, (c - 1.0) / omega],
            [0.0, c, 0.0, s],
            [0.0, (1.0 - c) / omega, 1.0, s / omega],
            [0.0, -s, 0.0, c],
        ]
    )


def process_noise(q: float, Ts: float) -> np.ndarray:
    """White-noise acceleration covariance q * I2 (x) [[Ts^3/3, Ts^2/2], [Ts^2/2, Ts]]."""
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    if Ts <= 0:
        raise ValueError(f"Ts must be positive, got {Ts}")
    block = np.array([[Ts**3 / 3.0, Ts**2 / 2.0], [Ts**2 / 2.0, Ts]])
    return q * np.kron(np.eye(2), block)


def _as_matrix(x) -> np.ndarray:
    a = np.array(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DynamicsMode:
    """One linear dynamics model: transition F and process noise Q = q * Q_base."""

    label: str
    F: np.ndarray
    Q: np.ndarray
    q: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "F", _as_matrix(self.F))
        object.__setattr__(self, "Q", _as_matrix(self.Q))
        object.__setattr__(self, "q", float(self.q))

    @property
    def dim(self) -> int:
        return self.F.shape[0]


def cv_mode(q: float, Ts: float = 1.0, label: str = "CV") -> DynamicsMode:
    return DynamicsMode(label, cv_matrix(Ts), process_noise(q, Ts), q)


def ct_mode(q: float, omega: float, Ts: float = 1.0, label: str = "CT") -> DynamicsMode:
    return DynamicsMode(label, ct_matrix(omega, Ts), process_noise(q, Ts), q)


def scalar_mode(label: str, f: float, q: float) -> DynamicsMode:
    """One-dimensional mode with transition scalar f and noise variance q."""
    return DynamicsMode(label, [[f]], [[q]], q)


@dataclass(frozen=True, eq=False)
class ModeProbabilityMatrix:
    """Mode distributions after the untracked (u0) and tracked (u1) actions."""

    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u0", np.array(self.u0, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "u1", np.array(self.u1, dtype=np.float64).reshape(-1))

    @property
    def n_modes(self) -> int:
        return self.u0.shape[0]


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    H: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "H", _as_matrix(self.H))
        object.__setattr__(self, "R", _as_matrix(self.R))


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """All per-target model parameters.

    ``P0`` fixes the initial state (scalar for L == 1, SPD matrix otherwise);
    ``P0_rule`` defers it to a sampling rule, one of
    ``{"uniform_scalar": [lo, hi]}`` or ``{"gram_uniform01": L}``.
    """

    modes: tuple[DynamicsMode, ...]
    probs: ModeProbabilityMatrix
    meas: MeasurementModel
    d: float = 1.0
    h: float = 0.0
    P0: float | np.ndarray | None = None
    P0_rule: dict | None = None
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "h", float(self.h))
        if self.P0 is not None:
            p0 = np.asarray(self.P0, dtype=np.float64)
            object.__setattr__(self, "P0", float(p0) if p0.ndim == 0 else _as_matrix(p0))

    @property
    def dim(self) -> int:
        return self.modes[0].dim

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def is_scalar(self) -> bool:
        return self.dim == 1


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    targets: tuple[TargetSpec, ...]
    K: int
    beta: float = 0.9
    horizon: int = 100
    tau: int = 100
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "tau", int(self.tau))

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def dim(self) -> int:
        return self.targets[0].dim


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    path: str
    rule: str

    def __str__(self) -> str:
        return f"{self.path}: {self.rule}"


class ScenarioValidationError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"scenario failed validation:\n{lines}")


def _sym_gap(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.T))) if a.size else 0.0


def _check_mode(mode: DynamicsMode, L: int, path: str, out: list[Violation]):
    if mode.F.shape != (L, L):
        out.append(Violation(f"{path}.F", f"expected shape ({L}, {L}), got {mode.F.shape}"))
    if mode.Q.shape != (L, L):
        out.append(Violation(f"{path}.Q", f"expected shape ({L}, {L}), got {mode.Q.shape}"))
        return
    if _sym_gap(mode.Q) > 1e-10:
        out.append(Violation(f"{path}.Q", "must be symmetric"))
    elif np.min(np.linalg.eigvalsh(0.5 * (mode.Q + mode.Q.T))) < -1e-12:
        out.append(Violation(f"{path}.Q", "must be positive semidefinite"))
    if not mode.q > 0:
        out.append(Violation(f"{path}.q", f"noise amplitude must be positive, got {mode.q}"))


def _check_probs(u: np.ndarray, M: int, path: str, out: list[Violation]):
    if u.shape != (M,):
        out.append(Violation(path, f"expected {M} entries, got {u.shape[0]}"))
        return
    if np.any(u < 0):
        out.append(Violation(path, "entries must be nonnegative"))
    if abs(float(u.sum()) - 1.0) > PROB_SUM_TOL:
        out.append(Violation(path, f"probability sum != 1 (got {float(u.sum())!r})"))


def _check_target(t: TargetSpec, path: str, out: list[Violation], relax_mode_order: bool):
    if not t.modes:
        out.append(Violation(f"{path}.modes", "at least one dynamics mode is required"))
        return
    L = t.modes[0].dim
    M = len(t.modes)
    for m, mode in enumerate(t.modes):
        _check_mode(mode, L, f"{path}.modes[{m}]", out)
    qs = [mode.q for mode in t.modes]
    if any(not q2 > q1 for q1, q2 in zip(qs, qs[1:])):
        out.append(Violation(f"{path}.modes", f"noise amplitudes must be strictly increasing, got {qs}"))

    _check_probs(t.probs.u0, M, f"{path}.U.u0", out)
    _check_probs(t.probs.u1, M, f"{path}.U.u1", out)
    if not relax_mode_order and M >= 2 and t.probs.u0.shape == (M,) and t.probs.u1.shape == (M,):
        if not np.all(t.probs.u0[0] > t.probs.u0[1:]):
            out.append(Violation(f"{path}.U.u0", "u0[1] not strictly largest (untracked targets must favor mode 1)"))
        if not np.all(t.probs.u1[0] < t.probs.u1[1:]):
            out.append(Violation(f"{path}.U.u1", "u1[1] not strictly smallest (tracked targets must favor maneuvering)"))

    H, R = t.meas.H, t.meas.R
    if H.shape[1] != L:
        out.append(Violation(f"{path}.H", f"expected {L} columns, got {H.shape[1]}"))
    if R.shape != (H.shape[0], H.shape[0]):
        out.append(Violation(f"{path}.R", f"expected shape ({H.shape[0]}, {H.shape[0]}), got {R.shape}"))
    elif _sym_gap(R) > 1e-10:
        out.append(Violation(f"{path}.R", "must be symmetric"))
    elif np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0:
        out.append(Violation(f"{path}.R", "must be positive definite"))

    if t.d < 0:
        out.append(Violation(f"{path}.d", f"weight must be nonnegative, got {t.d}"))
    if t.h < 0:
        out.append(Violation(f"{path}.h", f"measurement cost must be nonnegative, got {t.h}"))

    if t.P0 is not None and t.P0_rule is not None:
        out.append(Violation(f"{path}.P0", "give either P0 or P0_rule, not both"))
    if t.P0 is None and t.P0_rule is None:
        out.append(Violation(f"{path}.P0", "one of P0 or P0_rule is required"))
    if t.P0 is not None:
        if isinstance(t.P0, float):
            if L != 1:
                out.append(Violation(f"{path}.P0", f"scalar P0 given for an L={L} target"))
            elif not t.P0 > 0:
                out.append(Violation(f"{path}.P0", "must be positive"))
        else:
            if t.P0.shape != (L, L):
                out.append(Violation(f"{path}.P0", f"expected shape ({L}, {L}), got {t.P0.shape}"))
            elif _sym_gap(t.P0) > 1e-10:
                out.append(Violation(f"{path}.P0", "must be symmetric"))
            elif np.min(np.linalg.eigvalsh(0.5 * (t.P0 + t.P0.T))) <= 0:
                out.append(Violation(f"{path}.P0", "must be positive definite"))
    if t.P0_rule is not None:
        _check_rule(t.P0_rule, L, f"{path}.P0_rule", out)


def _check_rule(rule: dict, L: int, path: str, out: list[Violation]):
    if not isinstance(rule, dict) or len(rule) != 1:
        out.append(Violation(path, "must be a single-key mapping"))
        return
    kind, arg = next(iter(rule.items()))
    if kind == "uniform_scalar":
        if L != 1:
            out.append(Violation(path, f"uniform_scalar rule given for an L={L} target"))
        try:
            lo, hi = float(arg[0]), float(arg[1])
        except (TypeError, ValueError, IndexError):
            out.append(Violation(path, f"uniform_scalar expects [lo, hi], got {arg!r}"))
            return
        if not 0 <= lo < hi:
            out.append(Violation(path, f"uniform_scalar requires 0 <= lo < hi, got [{lo}, {hi}]"))
    elif kind == "gram_uniform01":
        if int(arg) != L:
            out.append(Violation(path, f"gram_uniform01 dimension {arg} != target dimension {L}"))
    else:
        out.append(Violation(path, f"unknown rule {kind!r}"))


def check(spec: ScenarioSpec, relax_mode_order: bool = False) -> list[Violation]:
    """Collect every invariant violation; an empty list means the scenario is valid."""
    out: list[Violation] = []
    if spec.n_targets == 0:
        out.append(Violation("targets", "at least one target is required"))
        return out
    for n, t in enumerate(spec.targets):
        _check_target(t, f"targets[{n}]", out, relax_mode_order)
    dims = {t.dim for t in spec.targets}
    if len(dims) > 1:
        out.append(Violation("targets", f"all targets must share one state dimension, got {sorted(dims)}"))
    if not 1 <= spec.K < spec.n_targets:
        out.append(Violation("K", f"requires 1 <= K < N, got K={spec.K}, N={spec.n_targets}"))
    if not 0 < spec.beta < 1:
        out.append(Violation("beta", f"requires 0 < beta < 1, got {spec.beta}"))
    if spec.horizon < 1:
        out.append(Violation("horizon", f"requires horizon >= 1, got {spec.horizon}"))
    if spec.tau < 1:
        out.append(Violation("tau", f"requires tau >= 1, got {spec.tau}"))
    return out


def _renormalize(u: np.ndarray) -> np.ndarray:
    s = float(u.sum())
    if _PROB_SUM_EXACT < abs(s - 1.0) <= PROB_SUM_TOL:
        return u / s
    return u


def validate(spec: ScenarioSpec, relax_mode_order: bool = False) -> ScenarioSpec:
    """Return the validated spec, with probability vectors renormalized.

    Raises ScenarioValidationError carrying the full violation list otherwise.
    Idempotent: validating a validated spec changes nothing.
    """
    targets = []
    for t in spec.targets:
        u0 = _renormalize(t.probs.u0)
        u1 = _renormalize(t.probs.u1)
        if u0 is not t.probs.u0 or u1 is not t.probs.u1:
            t = replace(t, probs=ModeProbabilityMatrix(u0, u1))
        targets.append(t)
    spec = replace(spec, targets=tuple(targets))
    violations = check(spec, relax_mode_order=relax_mode_order)
    if violations:
        raise ScenarioValidationError(violations)
    return spec


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def _mode_from_dict(d: dict) -> DynamicsMode:
    label = d.get("label", "")
    q = float(d["q"])
    Ts = float(d.get("Ts", 1.0))
    builder = d.get("builder")
    if builder == "cv":
        return cv_mode(q, Ts, label or "CV")
    if builder == "ct":
        omega = math.radians(float(d["omega_deg"]))
        return ct_mode(q, omega, Ts, label or "CT")
    if builder is not None:
        raise ValueError(f"unknown mode builder {builder!r}")
    F = _as_matrix(d["F"])
    Q = _as_matrix(d["Q"]) if "Q" in d else q * np.eye(F.shape[0])
    return DynamicsMode(label, F, Q, q)


def _target_from_dict(d: dict) -> TargetSpec:
    modes = tuple(_mode_from_dict(m) for m in d["modes"])
    probs = ModeProbabilityMatrix(d["U"]["u0"], d["U"]["u1"])
    meas = MeasurementModel(d["H"], d["R"])
    return TargetSpec(
        modes=modes,
        probs=probs,
        meas=meas,
        d=float(d.get("d", 1.0)),
        h=float(d.get("h", 0.0)),
        P0=d.get("P0"),
        P0_rule=d.get("P0_rule"),
        tag=d.get("tag", ""),
    )


def scenario_from_dict(d: dict) -> ScenarioSpec:
    return ScenarioSpec(
        targets=tuple(_target_from_dict(t) for t in d["targets"]),
        K=int(d["K"]),
        beta=float(d.get("beta", 0.9)),
        horizon=int(d.get("horizon", 100)),
        tau=int(d.get("tau", 100)),
        name=d.get("name", "scenario"),
    )


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    targets = []
    for t in spec.targets:
        entry = {
            "modes": [
                {"label": m.label, "F": m.F.tolist(), "Q": m.Q.tolist(), "q": m.q}
                for m in t.modes
            ],
            "U": {"u0": t.probs.u0.tolist(), "u1": t.probs.u1.tolist()},
            "H": t.meas.H.tolist(),
            "R": t.meas.R.tolist(),
            "d": t.d,
            "h": t.h,
        }
        if t.P0 is not None:
            entry["P0"] = t.P0 if isinstance(t.P0, float) else t.P0.tolist()
        if t.P0_rule is not None:
            entry["P0_rule"] = t.P0_rule
        if t.tag:
            entry["tag"] = t.tag
        targets.append(entry)
    return {
        "name": spec.name,
        "targets": targets,
        "K": spec.K,
        "beta": spec.beta,
        "horizon": spec.horizon,
        "tau": spec.tau,
    }


def load_scenario(path: str | Path, validated: bool = True) -> ScenarioSpec:
    with open(path) as fh:
        spec = scenario_from_dict(json.load(fh))
    return validate(spec) if validated else spec


def save_scenario(spec: ScenarioSpec, path: str | Path):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(spec), fh, indent=2)
        fh.write("\n")
