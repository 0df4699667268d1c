import math

import numpy as np
import pytest

from rmab_beamsched.scenario import (
    MeasurementModel,
    ModeProbabilityMatrix,
    ScenarioSpec,
    TargetSpec,
    ct_mode,
    cv_mode,
    scalar_mode,
    validate,
)


def make_scalar_target(kind="reckless", q_ct=4.0, d=1.0, h=0.0, P0=1.0, P0_rule=None,
                       f_cv=1.1, f_ct=1.3, q_cv=1.0, H=1.0, R=2.0):
    if kind == "reckless":
        probs = ModeProbabilityMatrix([0.90, 0.10], [0.20, 0.80])
    elif kind == "cautious":
        probs = ModeProbabilityMatrix([0.95, 0.05], [0.60, 0.40])
    else:
        raise ValueError(kind)
    return TargetSpec(
        modes=(scalar_mode("CV", f_cv, q_cv), scalar_mode("CT", f_ct, q_ct)),
        probs=probs,
        meas=MeasurementModel(H, R),
        d=d, h=h,
        P0=None if P0_rule else P0,
        P0_rule=P0_rule,
        tag=kind,
    )


def make_planar_target(kind="reckless", q_ct=2.0, d=1.0, h=0.0, P0=None, P0_rule=None):
    if P0 is None and P0_rule is None:
        P0_rule = {"gram_uniform01": 4}
    if kind == "reckless":
        probs = ModeProbabilityMatrix([0.90, 0.10], [0.20, 0.80])
    else:
        probs = ModeProbabilityMatrix([0.95, 0.05], [0.60, 0.40])
    return TargetSpec(
        modes=(cv_mode(1.0, 1.0), ct_mode(q_ct, math.radians(3.0), 1.0)),
        probs=probs,
        meas=MeasurementModel([[1, 0, 0, 0], [0, 0, 1, 0]], [[2.0, 0.0], [0.0, 2.0]]),
        d=d, h=h, P0=P0, P0_rule=P0_rule, tag=kind,
    )


def make_scenario(targets, K=1, beta=0.9, horizon=100, tau=100, name="test"):
    return validate(
        ScenarioSpec(targets=targets, K=K, beta=beta, horizon=horizon, tau=tau, name=name),
        relax_mode_order=True,
    )


def random_spd(rng, L=4, scale=1.0):
    root = rng.normal(size=(L, L))
    m = root @ root.T + 1e-3 * np.eye(L)
    return scale * 0.5 * (m + m.T)


@pytest.fixture
def reckless():
    return make_scalar_target("reckless")


@pytest.fixture
def cautious():
    return make_scalar_target("cautious")
