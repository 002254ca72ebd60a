import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcfuse.model import ModelConfig
from qcfuse.pipeline import (
    CostModel,
    layer_times,
    policy_prephase,
    policy_schedule,
    schedule_pipelined,
    schedule_sequential,
)
from qcfuse.store import TierConfig

durations = st.lists(st.floats(min_value=0, max_value=100, allow_nan=False), min_size=1, max_size=8)


class TestLayerTimes:
    def test_zero_selection_is_beta_only(self, small_config):
        cost = CostModel()
        _, compute = layer_times(0, 128, small_config, cost)
        assert compute == cost.compute_beta

    def test_alpha_term_linear_in_selection(self, small_config):
        cost = CostModel()
        _, c1 = layer_times(10, 128, small_config, cost)
        _, c2 = layer_times(20, 128, small_config, cost)
        assert (c2 - cost.compute_beta) == pytest.approx(2 * (c1 - cost.compute_beta))

    def test_fetch_arithmetic(self):
        cfg = ModelConfig(n_layers=4, n_heads=2, d_model=16, d_head=8, d_ff=32)
        cost = CostModel(tier=TierConfig(ssd_base_latency=0.001, ssd_bandwidth=1e6))
        fetch, _ = layer_times(0, 8, cfg, cost)
        assert fetch == pytest.approx(0.002024)


class TestSchedules:
    def test_hand_case(self):
        tr = schedule_pipelined([2, 2, 2], [3, 3, 3], 0)
        assert tr.compute_end == [5, 8, 11]
        assert tr.ttft == 11
        assert schedule_sequential([2, 2, 2], [3, 3, 3], 0).ttft == 15

    def test_compute_bound_limit(self):
        tr = schedule_pipelined([0, 0, 0, 0], [1, 2, 3, 4], 0)
        assert tr.ttft == pytest.approx(10)

    def test_fetch_bound_limit(self):
        tr = schedule_pipelined([1, 2, 3], [0, 0, 0], 0)
        assert tr.ttft == pytest.approx(6)

    def test_empty_layers(self):
        assert schedule_sequential([], [], 0).ttft == 0
        assert schedule_pipelined([], [], 0).ttft == 0

    def test_single_layer_equal(self):
        p = schedule_pipelined([4], [7], 1)
        s = schedule_sequential([4], [7], 1)
        assert p.ttft == s.ttft == 12

    def test_fetch_channel_serialized(self):
        tr = schedule_pipelined([2, 5, 1], [1, 1, 9], 0.5)
        for i in range(1, 3):
            assert tr.fetch_start[i] == tr.fetch_end[i - 1]
        for i in range(3):
            assert tr.compute_start[i] >= tr.fetch_end[i]

    def test_rejects_negative_and_mismatch(self):
        with pytest.raises(ValueError):
            schedule_pipelined([1], [-1], 0)
        with pytest.raises(ValueError):
            schedule_pipelined([1, 2], [1], 0)

    @given(fetch=durations, compute=durations, pre=st.floats(min_value=0, max_value=50))
    @settings(max_examples=200, deadline=None)
    def test_pipelined_dominates_sequential(self, fetch, compute, pre):
        n = min(len(fetch), len(compute))
        fetch, compute = fetch[:n], compute[:n]
        p = schedule_pipelined(fetch, compute, pre)
        s = schedule_sequential(fetch, compute, pre)
        assert p.ttft <= s.ttft + 1e-12
        # work conservation: neither total compute nor the serialized fetch
        # channel can be beaten
        assert p.ttft >= pre + sum(compute) - 1e-9
        assert p.ttft >= pre + sum(fetch) - 1e-9

    def test_equality_when_later_fetches_zero(self):
        fetch = [3, 0, 0]
        compute = [1, 2, 3]
        assert schedule_pipelined(fetch, compute).ttft == schedule_sequential(fetch, compute).ttft

    def test_monotone_in_inputs(self, rng):
        base_f = [0.5, 0.5, 1.0, 0.2]
        base_c = [0.3, 0.9, 0.1, 0.4]
        base = schedule_pipelined(base_f, base_c, 0.1).ttft
        for i in range(4):
            f2 = list(base_f)
            f2[i] += 0.7
            assert schedule_pipelined(f2, base_c, 0.1).ttft >= base
            c2 = list(base_c)
            c2[i] += 0.7
            assert schedule_pipelined(base_f, c2, 0.1).ttft >= base
        assert schedule_pipelined(base_f, base_c, 0.9).ttft >= base


class TestPolicyCosts:
    def test_qcall_prephase_is_sum_of_fetches(self, small_config):
        cost = CostModel()
        fetch, _ = layer_times(0, 200, small_config, cost)
        pre = policy_prephase("QCAll", 200, 16, small_config, cost)
        assert pre == pytest.approx(small_config.n_layers * fetch)

    def test_fullreuse_free_prephase_and_zero_compute(self, small_config):
        cost = CostModel()
        assert policy_prephase("FullReuse", 200, 16, small_config, cost) == 0.0
        tr = policy_schedule("FullReuse", 0, 200, 16, small_config, cost)
        assert all(cs == ce for cs, ce in zip(tr.compute_start, tr.compute_end))

    def test_qcfuse_cheaper_prephase_than_qcall(self, small_config):
        cost = CostModel()
        qf = policy_prephase("QCFuse", 256, 16, small_config, cost)
        qa = policy_prephase("QCAll", 256, 16, small_config, cost)
        assert qf < qa

    def test_unknown_policy(self, small_config):
        with pytest.raises(ValueError):
            policy_prephase("Magic", 10, 2, small_config, CostModel())

    @pytest.mark.parametrize("n_layers", [4, 6, 8, 12])
    def test_ordering_at_equal_ratio(self, n_layers):
        cfg = ModelConfig(n_layers=n_layers, n_heads=2, d_model=32, d_head=16, d_ff=64)
        cost = CostModel()
        n_ctx, n_query = 256, 16
        n_sel = int(np.ceil(0.2 * n_ctx))
        reuse = policy_schedule("FullReuse", 0, n_ctx, n_query, cfg, cost).ttft
        qcfuse = policy_schedule("QCFuse", n_sel, n_ctx, n_query, cfg, cost).ttft
        qcall = policy_schedule("QCAll", n_sel, n_ctx, n_query, cfg, cost).ttft
        assert reuse < qcfuse < qcall
