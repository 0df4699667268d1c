import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmab_beamsched import policy
from rmab_beamsched.policy import PolicyKind, decide, select
from conftest import make_scalar_target, make_scenario


class TestSelect:
    def test_top_two_with_filter(self):
        a = select([0.4, -0.1, 0.7], K=2, nonneg_filter=True, rng=np.random.default_rng(0))
        assert np.array_equal(a, [1, 0, 1])

    def test_all_negative_filtered_out(self):
        a = select([-1.0, -0.5, -2.0], K=3, nonneg_filter=True, rng=np.random.default_rng(0))
        assert np.array_equal(a, [0, 0, 0])

    def test_filter_off_restores_pure_top_k(self):
        a = select([-1.0, -0.5, -2.0], K=2, nonneg_filter=False, rng=np.random.default_rng(0))
        assert np.array_equal(a, [1, 1, 0])

    def test_tie_breaks_reproducible(self):
        picks = set()
        for _ in range(20):
            a = select([2.0, 2.0, 1.0], K=1, rng=np.random.default_rng(42))
            picks.add(tuple(a))
        assert len(picks) == 1
        assert sum(next(iter(picks))) == 1
        assert next(iter(picks))[2] == 0

    def test_tie_choice_is_uniformish(self):
        rng = np.random.default_rng(0)
        counts = np.zeros(2)
        for _ in range(400):
            counts += select([2.0, 2.0, 1.0], K=1, rng=rng)[:2]
        assert counts.min() > 130

    def test_no_rng_needed_without_ties(self):
        a = select([3.0, 2.0, 1.0], K=2, rng=None)
        assert np.array_equal(a, [1, 1, 0])

    def test_tie_without_rng_raises(self):
        with pytest.raises(ValueError):
            select([2.0, 2.0], K=1, rng=None)

    def test_zero_index_survives_filter(self):
        a = select([0.0, -0.1], K=1, rng=np.random.default_rng(0))
        assert np.array_equal(a, [1, 0])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            select([np.nan, 1.0], K=1, rng=np.random.default_rng(0))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12),
           st.integers(1, 12), st.booleans(), st.integers(0, 2**31 - 1))
    def test_feasibility_property(self, values, K, filt, seed):
        a = select(values, K, filt, np.random.default_rng(seed))
        assert a.sum() <= K
        if filt:
            assert not np.any(a[np.asarray(values) < 0])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=10,
                    unique=True),
           st.integers(1, 10), st.integers(0, 2**31 - 1))
    def test_permutation_equivariance_distinct_values(self, values, K, seed):
        values = np.asarray(values)
        perm = np.random.default_rng(seed).permutation(len(values))
        a = select(values, K, True, np.random.default_rng(0))
        b = select(values[perm], K, True, np.random.default_rng(0))
        assert np.array_equal(b[np.argsort(perm)], a)

    def test_seed_determinism(self):
        vals = [1.0, 1.0, 1.0, 0.5]
        a = select(vals, 2, True, np.random.default_rng(7))
        b = select(vals, 2, True, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestDecide:
    def test_single_target_tracked(self):
        spec = make_scenario([make_scalar_target(), make_scalar_target(q_ct=6.0)], K=1)
        a = decide([5.0, 0.011], spec, "tec_trace", rng=np.random.default_rng(0))
        assert np.array_equal(a, [1, 0])

    def test_lone_positive_target_tracked(self):
        # degenerate N = 1 setup (skips validation, which wants K < N)
        from rmab_beamsched.scenario import ScenarioSpec
        spec = ScenarioSpec([make_scalar_target()], K=1)
        for kind in ("whittle_mp", "myopic", "tec_trace"):
            assert np.array_equal(decide([1.0], spec, kind), [1])

    def test_trace_ordering_between_identical_targets(self):
        spec = make_scenario([make_scalar_target(), make_scalar_target()], K=1)
        a = decide([3.0, 2.0], spec, "tec_trace", rng=np.random.default_rng(0))
        assert np.array_equal(a, [1, 0])

    def test_kinds_agree_with_index_module(self):
        from rmab_beamsched import index
        spec = make_scenario([make_scalar_target("reckless"),
                              make_scalar_target("cautious", q_ct=6.0)], K=1)
        states = [1.0, 1.2]
        for kind in ("whittle_mp", "myopic", "tec_trace"):
            a = decide(states, spec, kind, rng=np.random.default_rng(0))
            if kind == "whittle_mp":
                vals = [index.mp_index(p, t, spec.beta, spec.tau).value
                        for p, t in zip(states, spec.targets)]
            elif kind == "myopic":
                vals = [index.myopic_index(p, t).value for p, t in zip(states, spec.targets)]
            else:
                vals = [index.tec_index(p, t).value for p, t in zip(states, spec.targets)]
            expected = np.zeros(2, dtype=np.int8)
            expected[int(np.argmax(vals))] = 1
            assert np.array_equal(a, expected)

    def test_accepts_tables(self):
        from rmab_beamsched.index import build_index_table
        spec = make_scenario([make_scalar_target(), make_scalar_target(q_ct=6.0)], K=1)
        grid = 0.01 + 0.05 * np.arange(400)
        tables = [build_index_table(t, spec.beta, spec.tau, grid) for t in spec.targets]
        a = decide([1.0, 1.0], spec, "whittle_mp", tables=tables,
                   rng=np.random.default_rng(0))
        b = decide([1.0, 1.0], spec, "whittle_mp", rng=np.random.default_rng(0))
        assert np.array_equal(a, b)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            PolicyKind("grandiose")

    def test_golden_first_slot_table1(self):
        # frozen regression schedule: table1 (q_all2, K=1) scenario, seed 123
        from rmab_beamsched.presets import table_scenarios
        from rmab_beamsched import sim
        spec = table_scenarios("table1")[("q_all2", 1)]
        ep = sim.run_episode(spec, "whittle_mp", T=3, seed=123)
        assert ep.actions.shape == (3, 8)
        assert np.array_equal(ep.actions, GOLDEN_T1_SEED123)
        assert ep.cost == pytest.approx(GOLDEN_T1_SEED123_COST, rel=1e-12)


# generated once from the first verified run and frozen; guards schedule drift
GOLDEN_T1_SEED123 = np.array([
    [1, 0, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
])
GOLDEN_T1_SEED123_COST = 62.08447989870615
