import json
from pathlib import Path

import numpy as np
import pytest

from swinfer import planner as pl
from swinfer import profiler as prof
from swinfer.errors import InvalidArgumentError

from test_profiler import synthetic_profile

FIXTURES = Path(__file__).parents[1] / "fixtures"


def random_profiles(rng, n=8):
    compute_d = rng.uniform(0.05, 8.0, size=n)
    compute_s = rng.uniform(0.02, 2.0, size=n)
    out_bytes = rng.integers(50, 200_000, size=n)
    device = synthetic_profile(compute_d, out_bytes, input_bytes=int(rng.integers(1000, 300_000)))
    server = synthetic_profile(compute_s, out_bytes, input_bytes=device.input_bytes)
    return device, server


def brute_force_argmin(device, server, link, candidates):
    # independent enumeration: recompute totals with raw arithmetic
    best_c, best_total = None, None
    for c in candidates:
        td = sum(l.compute_ms for l in device.layers[:c])
        ts = sum(l.compute_ms for l in server.layers[c:])
        nbytes = device.input_bytes if c == 0 else device.layers[c - 1].output_bytes
        ttx = nbytes * 8.0 / (link.bandwidth_mbps * 1e6) * 1000.0 + link.overhead_ms
        total = td + ts + ttx
        if best_total is None or total < best_total:
            best_c, best_total = c, total
    return best_c, best_total


class TestGreedySplit:
    def test_recorded_sweep_argmin_split6(self):
        totals = pl.load_measured_totals(FIXTURES / "wifi_split_sweep.json")
        assert len(totals) == 20
        plan = pl.greedy_split_from_totals(totals)
        assert plan.split_point == 6
        assert plan.breakdown.total_ms == pytest.approx(20.07)
        assert plan.mode == pl.MEASURED

    def test_single_candidate(self):
        device, server = random_profiles(np.random.default_rng(0))
        plan = pl.greedy_split(device, server, prof.LinkModel(50.0), candidate_range=[3])
        assert plan.split_point == 3

    def test_matches_bruteforce_on_200_random_cases(self):
        rng = np.random.default_rng(1)
        link = prof.LinkModel(30.0, overhead_ms=0.3)
        for _ in range(200):
            device, server = random_profiles(rng, n=int(rng.integers(2, 12)))
            cands = list(range(0, device.num_layers + 1))
            plan = pl.greedy_split(device, server, link, cands)
            c, total = brute_force_argmin(device, server, link, cands)
            assert plan.split_point == c
            assert plan.breakdown.total_ms == pytest.approx(total)

    def test_tie_breaks_toward_smaller_c(self):
        device = synthetic_profile([0.0, 0.0], [100, 100], input_bytes=100)
        server = synthetic_profile([0.0, 0.0], [100, 100], input_bytes=100)
        plan = pl.greedy_split(device, server, prof.LinkModel(10.0))
        assert plan.split_point == 0

    def test_empty_range_rejected(self):
        device, server = random_profiles(np.random.default_rng(2))
        with pytest.raises(InvalidArgumentError):
            pl.greedy_split(device, server, prof.LinkModel(10.0), candidate_range=[])

    def test_scale_invariance_of_argmin(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            device, server = random_profiles(rng, n=6)
            link = prof.LinkModel(25.0)
            base = pl.greedy_split(device, server, link).split_point
            k = float(rng.uniform(0.1, 10.0))
            scaled_d = synthetic_profile(
                [l.compute_ms * k for l in device.layers],
                [l.output_bytes for l in device.layers],
                device.input_bytes,
            )
            scaled_s = synthetic_profile(
                [l.compute_ms * k for l in server.layers],
                [l.output_bytes for l in server.layers],
                server.input_bytes,
            )
            # scaling t_tx by the same k == dividing bandwidth by k
            scaled_link = prof.LinkModel(25.0 / k)
            assert pl.greedy_split(scaled_d, scaled_s, scaled_link).split_point == base


class TestPlanJson:
    def test_round_trip(self, tmp_path):
        device, server = random_profiles(np.random.default_rng(4))
        plan = pl.greedy_split(device, server, prof.LinkModel(42.0, 0.5))
        plan.model_hash = "ab" * 32
        plan.strategy_ref = "strategy.json"
        path = tmp_path / "plan.json"
        plan.save(path)
        back = pl.SplitPlan.load(path)
        assert back.split_point == plan.split_point
        assert back.model_hash == plan.model_hash
        assert back.breakdown.total_ms == pytest.approx(plan.breakdown.total_ms)
        assert back.link.bandwidth_mbps == 42.0
        assert len(back.candidates) == len(plan.candidates)

    def test_plan_json_schema_fields(self):
        device, server = random_profiles(np.random.default_rng(5))
        plan = pl.greedy_split(device, server, prof.LinkModel(10.0))
        doc = json.loads(plan.to_json())
        assert {"model_hash", "split_point", "strategy_ref", "predicted", "link"} <= set(doc)
        assert {"t_device_ms", "t_tx_ms", "t_server_ms", "total_ms"} <= set(doc["predicted"])


class TestTwoStageOptimize:
    def setup_inputs(self, seed=0):
        from swinfer import agent as ag
        from swinfer import modelgraph as mg
        from test_pruning import cnn_graph

        rng = np.random.default_rng(seed)
        graph = cnn_graph(rng, widths=(6, 4))
        valset = mg.ValidationSet(
            rng.normal(size=(8, 3, 8, 8)).astype(np.float32),
            rng.integers(0, 5, size=8), 5,
        )
        x = rng.normal(size=(3, 8, 8)).astype(np.float32)

        def profile_fn(model):
            from swinfer import profiler as p

            return p.profile_layers(model, x, 3), p.profile_layers(model, x, 3)

        cfg = ag.AgentConfig(episodes=1, batch_size=8, buffer_capacity=50,
                             warmup_episodes=1, hidden=(8, 8), seed=7)
        return graph, valset, cfg, profile_fn

    def test_budget_one_single_episode_degenerates_to_split_search(self):
        graph, valset, cfg, profile_fn = self.setup_inputs()
        strategy, plan, pruned, prov = pl.two_stage_optimize(
            graph, valset, cfg, budget=1.0, profile_fn=profile_fn,
            link=prof.LinkModel(50.0),
        )
        # stage 1 is a no-op limit: near-original model reaches stage 2
        assert strategy.realized_flops_ratio > 0.3
        assert 0 <= plan.split_point <= graph.num_layers
        assert prov["episodes"] == 1 and prov["budget"] == 1.0

    def test_deterministic_given_seed(self):
        a = self.setup_inputs(seed=3)
        b = self.setup_inputs(seed=3)
        s1, p1, _, _ = pl.two_stage_optimize(a[0], a[1], a[2], 0.6, a[3], prof.LinkModel(50.0))
        s2, p2, _, _ = pl.two_stage_optimize(b[0], b[1], b[2], 0.6, b[3], prof.LinkModel(50.0))
        assert s1.actions == s2.actions
        assert s1.kept_channels == s2.kept_channels
        # the strategy is seed-deterministic; the split may differ across
        # runs only through live timing, which is not seeded


class TestCompareBaselines:
    def test_co_at_most_endpoints_when_endpoints_included(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            device, server = random_profiles(rng, n=int(rng.integers(2, 10)))
            link = prof.LinkModel(float(rng.uniform(5, 100)))
            plan = pl.greedy_split(device, server, link)  # includes 0 and N
            report = pl.compare_baselines(device, server, link, plan)
            assert report["co_ms"] <= report["device_only_ms"] + 1e-12
            assert report["co_ms"] <= report["server_only_ms"] + 1e-12
            assert report["speedup_vs_device_only"] >= 1.0 - 1e-12
            assert report["speedup_vs_server_only"] >= 1.0 - 1e-12

    def test_recorded_sweep_speedup_arithmetic(self):
        # internal consistency: fixture totals against stated baselines
        totals = pl.load_measured_totals(FIXTURES / "wifi_split_sweep.json")
        plan = pl.greedy_split_from_totals(totals)
        device_only, server_only = 31.36, 80.78
        assert device_only / plan.breakdown.total_ms == pytest.approx(1.5625, abs=5e-3)
        assert server_only / plan.breakdown.total_ms == pytest.approx(4.025, abs=5e-3)

    def test_infinite_bandwidth_limit(self):
        rng = np.random.default_rng(7)
        device, server = random_profiles(rng, n=5)
        fat = prof.LinkModel(1e12)
        server_only = prof.predict_latency(device, server, fat, 0)
        assert server_only.total_ms == pytest.approx(
            sum(l.compute_ms for l in server.layers), rel=1e-6
        )
        # with free transfer the best plan is the cheaper compute path
        plan = pl.greedy_split(device, server, fat)
        report = pl.compare_baselines(device, server, fat, plan)
        assert report["co_ms"] <= report["server_only_ms"] + 1e-9
