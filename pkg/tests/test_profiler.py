import numpy as np
import pytest

from swinfer import modelgraph as mg
from swinfer import profiler as prof
from swinfer.errors import InvalidArgumentError

from test_pruning import cnn_graph


def synthetic_profile(compute, output_bytes, input_bytes=1000, kinds=None):
    kinds = kinds or ["conv2d"] * len(compute)
    layers = [
        prof.LayerTiming(i + 1, f"l{i + 1}", kinds[i], float(compute[i]), int(output_bytes[i]))
        for i in range(len(compute))
    ]
    return prof.LayerProfile({"hostname": "synthetic"}, 3, input_bytes, layers)


class TestProfileLayers:
    def test_output_bytes_definitional(self):
        rng = np.random.default_rng(0)
        graph = cnn_graph(rng)
        x = rng.normal(size=(3, 8, 8)).astype(np.float32)
        profile = prof.profile_layers(graph, x, repeats=3)
        for timing, layer in zip(profile.layers, graph.layers):
            assert timing.output_bytes == mg.output_bytes_of_layer(layer)
            assert timing.compute_ms >= 0.0
        assert profile.input_bytes == mg.input_bytes(graph)
        assert profile.repeats == 3

    def test_repeats_below_three_rejected(self):
        rng = np.random.default_rng(1)
        graph = cnn_graph(rng)
        with pytest.raises(InvalidArgumentError):
            prof.profile_layers(graph, np.zeros((3, 8, 8), np.float32), repeats=2)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(2)
        graph = cnn_graph(rng)
        with pytest.raises(InvalidArgumentError):
            prof.profile_layers(graph, np.zeros((3, 9, 9), np.float32), repeats=3)

    def test_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        graph = cnn_graph(rng)
        profile = prof.profile_layers(graph, rng.normal(size=(3, 8, 8)).astype(np.float32), 3)
        path = tmp_path / "p.json"
        profile.save(path)
        loaded = prof.LayerProfile.load(path)
        assert loaded.to_dict() == profile.to_dict()

    def test_heavily_pruned_layers_profile_faster(self):
        # pruned layers must not profile slower: compare per-layer medians on big layers
        from swinfer import pruning as pr

        rng = np.random.default_rng(4)
        graph = cnn_graph(rng, widths=(32, 32), hw=32)
        pruned, _, _ = pr.apply_strategy(graph, {i: 0.125 for i in graph.prunable_indices})
        x = rng.normal(size=(3, 32, 32)).astype(np.float32)
        orig = prof.profile_layers(graph, x, repeats=7)
        less = prof.profile_layers(pruned, x, repeats=7)
        for i in graph.prunable_indices:
            assert less.compute_ms(i) <= orig.compute_ms(i)


class TestPredictLatency:
    def test_hand_arithmetic_case(self):
        # 1,000,000 bytes at 50 Mbps = 8e6 bits / 5e7 bps = 0.16 s = 160 ms
        device = synthetic_profile([5.0], [1_000_000])
        server = synthetic_profile([3.0], [1_000_000])
        link = prof.LinkModel(bandwidth_mbps=50.0)
        out = prof.predict_latency(device, server, link, c=1)
        assert out.t_device_ms == pytest.approx(5.0)
        assert out.t_tx_ms == pytest.approx(160.0)
        assert out.t_server_ms == pytest.approx(0.0)
        assert out.total_ms == pytest.approx(165.0)
        # c = 0: server does everything, raw input crosses the wire
        out0 = prof.predict_latency(device, server, link, c=0)
        assert out0.t_device_ms == 0.0
        assert out0.t_server_ms == pytest.approx(3.0)
        assert out0.t_tx_ms == pytest.approx(1000 * 8 / 50e6 * 1000)

    def test_doubling_bandwidth_halves_tx(self):
        device = synthetic_profile([1.0, 2.0], [500, 300])
        server = synthetic_profile([0.5, 0.7], [500, 300])
        one = prof.predict_latency(device, server, prof.LinkModel(10.0), 1)
        two = prof.predict_latency(device, server, prof.LinkModel(20.0), 1)
        assert two.t_tx_ms == pytest.approx(one.t_tx_ms / 2)

    def test_prefix_sums_table(self):
        compute_d = [1.0, 2.0, 4.0]
        compute_s = [0.5, 0.25, 0.125]
        out_bytes = [1000, 2000, 125]
        device = synthetic_profile(compute_d, out_bytes, input_bytes=4000)
        server = synthetic_profile(compute_s, out_bytes, input_bytes=4000)
        link = prof.LinkModel(bandwidth_mbps=8.0, overhead_ms=1.0)  # 1 ms per KB
        # hand-summed: t_tx = bytes*8/(8e6)*1000 + 1 = bytes/1000 + 1 ms
        expect = {
            0: (0.0, 5.0, 0.875),
            1: (1.0, 2.0, 0.375),
            2: (3.0, 3.0, 0.125),
            3: (7.0, 1.125, 0.0),
        }
        for c, (td, ttx, ts) in expect.items():
            got = prof.predict_latency(device, server, link, c)
            assert got.t_device_ms == pytest.approx(td)
            assert got.t_tx_ms == pytest.approx(ttx)
            assert got.t_server_ms == pytest.approx(ts)
            assert got.total_ms == pytest.approx(td + ttx + ts)

    def test_monotone_in_layer_latency_and_bandwidth(self):
        rng = np.random.default_rng(5)
        compute = rng.uniform(0.1, 5.0, size=6)
        out_bytes = rng.integers(100, 10_000, size=6)
        device = synthetic_profile(compute, out_bytes)
        server = synthetic_profile(compute * 0.3, out_bytes)
        link = prof.LinkModel(20.0)
        base = prof.predict_latency(device, server, link, 3).total_ms
        bumped = synthetic_profile(compute + np.eye(6)[2] * 3.0, out_bytes)
        assert prof.predict_latency(bumped, server, link, 3).total_ms >= base
        slower = prof.LinkModel(10.0)
        assert prof.predict_latency(device, server, slower, 3).total_ms >= base

    def test_profile_mismatch_rejected(self):
        a = synthetic_profile([1.0], [100])
        b = synthetic_profile([1.0, 1.0], [100, 50])
        with pytest.raises(InvalidArgumentError):
            prof.predict_latency(a, b, prof.LinkModel(10.0), 0)

    def test_split_out_of_range_rejected(self):
        a = synthetic_profile([1.0], [100])
        with pytest.raises(InvalidArgumentError):
            prof.predict_latency(a, a, prof.LinkModel(10.0), 2)
