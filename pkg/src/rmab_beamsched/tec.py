"""Tracking-error-covariance propagation and per-slot cost.

Scalar (L == 1) states are plain floats; matrix states are (L, L) numpy
arrays.  The recursion is deterministic: tracking applies a Kalman
predict/update per dynamics mode and mixes with the tracked-action mode
probabilities, while not tracking mixes bare predictions with the
untracked-action probabilities.

``ScalarTargets`` / ``MatrixTargets`` stack the per-target constants of a
scenario so that trajectories can be advanced for whole (replication, target)
arrays at once; the single-state functions below are the reference surface
and share the same arithmetic.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .scenario import DynamicsMode, MeasurementModel, TargetSpec

__all__ = [
    "TecError",
    "EIG_FLOOR",
    "predict",
    "kalman_gain",
    "update",
    "step_tracked",
    "step_untracked",
    "cost",
    "ScalarTargets",
    "MatrixTargets",
    "make_batch",
]

# States with an eigenvalue at or below this are treated as numerically broken.
EIG_FLOOR = 1e-12


class TecError(RuntimeError):
    """Numerical failure in the covariance recursion (singular innovation, lost SPD)."""


def _is_scalar(P) -> bool:
    return np.ndim(P) == 0


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.swapaxes(-1, -2))


def _check_spd(P, context: str, floor: float = 0.0):
    """Positivity guard.  Op-level checks use floor 0 (a near-perfect
    measurement legitimately drives the posterior arbitrarily close to zero);
    the per-slot simulation guard applies the EIG_FLOOR."""
    if _is_scalar(P):
        if not P > floor:
            raise TecError(f"{context}: state {P!r} at or below the eigenvalue floor {floor:g}")
        return
    w = np.linalg.eigvalsh(P)
    if w.min() <= floor:
        raise TecError(f"{context}: minimum eigenvalue {w.min():g} at or below floor {floor:g}")


def predict(P, mode: DynamicsMode):
    """One-mode covariance prediction F P F' + Q."""
    if _is_scalar(P):
        f = mode.F[0, 0]
        return f * f * float(P) + mode.Q[0, 0]
    return _sym(mode.F @ P @ mode.F.T + mode.Q)


def kalman_gain(Pbar, meas: MeasurementModel):
    """Gain Pbar H' (H Pbar H' + R)^-1 for the predicted covariance."""
    if _is_scalar(Pbar):
        h = meas.H[0, 0]
        innov = h * h * float(Pbar) + meas.R[0, 0]
        if innov <= 0:
            raise TecError(f"innovation variance {innov!r} is not positive")
        return float(Pbar) * h / innov
    H, R = meas.H, meas.R
    S = _sym(H @ Pbar @ H.T + R)
    try:
        # K' = S^-1 H Pbar, using symmetry of Pbar
        Kt = np.linalg.solve(S, H @ Pbar)
    except np.linalg.LinAlgError as exc:
        raise TecError(f"innovation matrix numerically singular: {exc}") from exc
    return Kt.T


def update(Pbar, meas: MeasurementModel):
    """Measurement update (I - K H) Pbar, re-symmetrized."""
    if _is_scalar(Pbar):
        h = meas.H[0, 0]
        innov = h * h * float(Pbar) + meas.R[0, 0]
        if innov <= 0:
            raise TecError(f"innovation variance {innov!r} is not positive")
        hp = h * float(Pbar)
        post = float(Pbar) - hp * hp / innov
        if meas.R[0, 0] > 0:
            _check_spd(post, "update")
        return post
    K = kalman_gain(Pbar, meas)
    post = _sym(Pbar - K @ (meas.H @ Pbar))
    if np.min(np.linalg.eigvalsh(meas.R)) > 0:
        _check_spd(post, "update")
    return post


def step_tracked(P, target: TargetSpec):
    """Next state when the target is tracked: mode-probability mix of updates."""
    acc = None
    for m, mode in enumerate(target.modes):
        term = float(target.probs.u1[m]) * update(predict(P, mode), target.meas)
        acc = term if acc is None else acc + term
    if not _is_scalar(acc):
        acc = _sym(acc)
    _check_spd(acc, "step_tracked")
    return acc


def step_untracked(P, target: TargetSpec):
    """Next state when the target is not tracked: mix of bare predictions."""
    acc = None
    for m, mode in enumerate(target.modes):
        term = float(target.probs.u0[m]) * predict(P, mode)
        acc = term if acc is None else acc + term
    if not _is_scalar(acc):
        acc = _sym(acc)
    _check_spd(acc, "step_untracked")
    return acc


def cost(P, action: int, target: TargetSpec) -> float:
    """Per-slot cost d * tr(P) / L + h * action."""
    level = float(P) if _is_scalar(P) else float(np.trace(P)) / target.dim
    return target.d * level + target.h * float(action)


# ---------------------------------------------------------------------------
# stacked per-target engines
# ---------------------------------------------------------------------------

def _pad_modes(targets: Sequence[TargetSpec]):
    """Per-target mode parameter stacks, zero-weight padded to a common M."""
    M = max(t.n_modes for t in targets)
    return M


class ScalarTargets:
    """Vectorized TEV propagation for targets with L == 1.

    States are arrays whose last axis indexes the N targets; any leading axes
    (replications, forced-action branches, grid points) broadcast through.
    """

    def __init__(self, targets: Sequence[TargetSpec]):
        targets = list(targets)
        if any(t.dim != 1 for t in targets):
            raise ValueError("ScalarTargets requires one-dimensional targets")
        self.targets = targets
        N = len(targets)
        M = _pad_modes(targets)
        self.f2 = np.zeros((N, M))
        self.qn = np.zeros((N, M))
        self.u0 = np.zeros((N, M))
        self.u1 = np.zeros((N, M))
        for n, t in enumerate(targets):
            for m, mode in enumerate(t.modes):
                self.f2[n, m] = mode.F[0, 0] ** 2
                self.qn[n, m] = mode.Q[0, 0]
            self.u0[n, : t.n_modes] = t.probs.u0
            self.u1[n, : t.n_modes] = t.probs.u1
        # shaped (N, 1) so they broadcast across the trailing mode axis
        self.h2 = np.array([[t.meas.H[0, 0] ** 2] for t in targets])
        self.hm = np.array([[t.meas.H[0, 0]] for t in targets])
        self.rm = np.array([[t.meas.R[0, 0]] for t in targets])
        self.d = np.array([t.d for t in targets])
        self.h = np.array([t.h for t in targets])
        self.dim = 1
        self.n_targets = N

    def _predictions(self, s: np.ndarray) -> np.ndarray:
        return self.f2 * s[..., None] + self.qn

    def step_untracked(self, s: np.ndarray) -> np.ndarray:
        return (self.u0 * self._predictions(s)).sum(axis=-1)

    def step_tracked(self, s: np.ndarray) -> np.ndarray:
        pred = self._predictions(s)
        hp = self.hm * pred
        post = pred - hp * hp / (self.h2 * pred + self.rm)
        return (self.u1 * post).sum(axis=-1)

    def step(self, s: np.ndarray, active: np.ndarray) -> np.ndarray:
        pred = self._predictions(s)
        hp = self.hm * pred
        post = pred - hp * hp / (self.h2 * pred + self.rm)
        return np.where(active, (self.u1 * post).sum(axis=-1), (self.u0 * pred).sum(axis=-1))

    def cost(self, s: np.ndarray, action: np.ndarray) -> np.ndarray:
        return self.d * s + self.h * action

    def scalar_state(self, s: np.ndarray) -> np.ndarray:
        return s

    def check_states(self, s: np.ndarray, context: str):
        if np.min(s) <= EIG_FLOOR:
            raise TecError(f"{context}: state {np.min(s):g} at or below the eigenvalue floor")

    def stack_states(self, states) -> np.ndarray:
        return np.asarray(states, dtype=np.float64)

    def unstack_states(self, s: np.ndarray) -> list:
        return [float(x) for x in s]


class MatrixTargets:
    """Vectorized TEC propagation for targets with a common L >= 2.

    States are arrays of shape (..., N, L, L).
    """

    def __init__(self, targets: Sequence[TargetSpec]):
        targets = list(targets)
        L = targets[0].dim
        if L < 2 or any(t.dim != L for t in targets):
            raise ValueError("MatrixTargets requires a common state dimension L >= 2")
        Ly = targets[0].meas.H.shape[0]
        if any(t.meas.H.shape[0] != Ly for t in targets):
            raise ValueError("MatrixTargets requires a common measurement dimension")
        self.targets = targets
        N = len(targets)
        M = _pad_modes(targets)
        self.F = np.tile(np.eye(L), (N, M, 1, 1))
        self.Q = np.zeros((N, M, L, L))
        self.u0 = np.zeros((N, M))
        self.u1 = np.zeros((N, M))
        for n, t in enumerate(targets):
            for m, mode in enumerate(t.modes):
                self.F[n, m] = mode.F
                self.Q[n, m] = mode.Q
            self.u0[n, : t.n_modes] = t.probs.u0
            self.u1[n, : t.n_modes] = t.probs.u1
        self.Ft = self.F.swapaxes(-1, -2)
        self.H = np.stack([t.meas.H for t in targets])[:, None]    # (N, 1, Ly, L)
        self.Ht = self.H.swapaxes(-1, -2)
        self.R = np.stack([t.meas.R for t in targets])[:, None]
        self.d = np.array([t.d for t in targets])
        self.h = np.array([t.h for t in targets])
        self.dim = L
        self.n_targets = N

    def _predictions(self, P: np.ndarray) -> np.ndarray:
        pred = self.F @ P[..., :, None, :, :] @ self.Ft + self.Q
        return _sym(pred)

    def _posteriors(self, pred: np.ndarray) -> np.ndarray:
        HP = self.H @ pred
        S = _sym(HP @ self.Ht + self.R)
        try:
            Kt = np.linalg.solve(S, HP)
        except np.linalg.LinAlgError as exc:
            raise TecError(f"innovation matrix numerically singular: {exc}") from exc
        return _sym(pred - Kt.swapaxes(-1, -2) @ HP)

    def _mix(self, weights: np.ndarray, per_mode: np.ndarray) -> np.ndarray:
        return (weights[:, :, None, None] * per_mode).sum(axis=-3)

    def step_untracked(self, P: np.ndarray) -> np.ndarray:
        return self._mix(self.u0, self._predictions(P))

    def step_tracked(self, P: np.ndarray) -> np.ndarray:
        pred = self._predictions(P)
        return self._mix(self.u1, self._posteriors(pred))

    def step(self, P: np.ndarray, active: np.ndarray) -> np.ndarray:
        pred = self._predictions(P)
        tracked = self._mix(self.u1, self._posteriors(pred))
        untracked = self._mix(self.u0, pred)
        return np.where(active[..., None, None], tracked, untracked)

    def cost(self, P: np.ndarray, action: np.ndarray) -> np.ndarray:
        return self.d * np.trace(P, axis1=-2, axis2=-1) / self.dim + self.h * action

    def scalar_state(self, P: np.ndarray) -> np.ndarray:
        return np.trace(P, axis1=-2, axis2=-1) / self.dim

    def check_states(self, P: np.ndarray, context: str):
        w = np.linalg.eigvalsh(P)
        if w.min() <= EIG_FLOOR:
            raise TecError(f"{context}: minimum eigenvalue {w.min():g} at or below floor {EIG_FLOOR}")

    def stack_states(self, states) -> np.ndarray:
        return np.stack([np.asarray(P, dtype=np.float64) for P in states], axis=-3) \
            if not isinstance(states, np.ndarray) else np.asarray(states, dtype=np.float64)

    def unstack_states(self, P: np.ndarray) -> list:
        return [np.array(P[n]) for n in range(P.shape[0])]


def make_batch(targets: Sequence[TargetSpec]):
    """Build the appropriate stacked engine for a homogeneous target list."""
    targets = list(targets)
    if targets[0].dim == 1:
        return ScalarTargets(targets)
    return MatrixTargets(targets)
