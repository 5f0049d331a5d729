import json
from pathlib import Path

import numpy as np
import pytest

from fixture_forge import latency_table, shapes, swformats as swf, train

ROOT = Path(__file__).parents[2]
TOYSHAPES = ROOT / "fixtures" / "toyshapes"


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("shapes")
    shapes.generate_dataset(d, per_class=100, size=32, seed=1)
    return d


@pytest.fixture(scope="session")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("export")
    manifest = train.train_and_export(dataset, out, epochs=40, seed=1)
    return out, manifest


class TestDataset:
    def test_four_class_folders(self, dataset):
        assert sorted(p.name for p in dataset.iterdir()) == sorted(shapes.CLASSES)
        for cls in shapes.CLASSES:
            assert len(list((dataset / cls).glob("*.png"))) == 100

    def test_split_deterministic_and_stratified(self):
        labels = np.repeat(np.arange(4), 25)
        a_train, a_val = train.stratified_split(labels, 0.8, seed=7)
        b_train, b_val = train.stratified_split(labels, 0.8, seed=7)
        np.testing.assert_array_equal(a_train, b_train)
        np.testing.assert_array_equal(a_val, b_val)
        for cls in range(4):
            n_train = int(np.sum(labels[a_train] == cls))
            assert abs(n_train - 20) <= 1

    def test_fewer_than_two_classes_rejected(self, tmp_path):
        (tmp_path / "only").mkdir()
        with pytest.raises(ValueError, match="2 class"):
            train.load_image_dir(tmp_path, 32)

    def test_decode_failures_are_skipped_and_counted(self, tmp_path):
        rng = np.random.default_rng(0)
        from PIL import Image

        for cls in ("a", "b"):
            (tmp_path / cls).mkdir()
            for i in range(3):
                img = Image.fromarray(rng.integers(0, 255, (32, 32, 3), dtype=np.uint8))
                img.save(tmp_path / cls / f"{i}.png")
        (tmp_path / "a" / "broken.png").write_bytes(b"not an image at all")
        x, y, classes, failures = train.load_image_dir(tmp_path, 32)
        assert failures == 1
        assert len(x) == 6


class TestSwmfRoundTrip:
    def test_write_read_identity(self, tmp_path):
        rng = np.random.default_rng(2)
        model = swf.Model()
        model.conv("c1", rng.normal(size=(4, 3, 3, 3)).astype(np.float32),
                   rng.normal(size=4).astype(np.float32))
        model.relu("r1").pool("p1").flatten()
        model.linear("fc", rng.normal(size=(2, 4 * 16 * 16)).astype(np.float32),
                     rng.normal(size=2).astype(np.float32))
        model.softmax()
        path = tmp_path / "m.swmf"
        swf.write_swmf(model, path)
        back = swf.read_swmf(path)
        assert [l.name for l in back.layers] == [l.name for l in model.layers]
        np.testing.assert_array_equal(back.layers[0].weight, model.layers[0].weight)
        # re-serialization is byte-identical
        swf.write_swmf(back, tmp_path / "m2.swmf")
        assert (tmp_path / "m2.swmf").read_bytes() == path.read_bytes()


class TestTrainAndExport:
    def test_reaches_90_percent_on_toy_set(self, trained):
        _, manifest = trained
        assert manifest["top1"] >= 0.9

    def test_topk_monotone(self, trained):
        _, manifest = trained
        assert manifest["top1"] <= manifest["top3"] <= manifest["top5"] <= 1.0

    def test_primary_loaders_accept_every_export(self, trained):
        from swinfer import modelgraph as mg

        out, manifest = trained
        graph = mg.load_model(out / "model.swmf")
        vs = mg.load_valset(out / "val.swds")
        assert vs.sample_count == manifest["sample_count"]
        assert graph.input_shape == tuple(vs.inputs.shape[1:])
        for s in manifest["samples"]:
            x = mg.load_input_bin(out / s["file"], graph.input_shape)
            assert x.shape == graph.input_shape

    def test_primary_accuracy_reproduces_manifest(self, trained):
        # the central format-compatibility check
        from swinfer import modelgraph as mg
        from swinfer import pruning as pr

        out, manifest = trained
        graph = mg.load_model(out / "model.swmf")
        vs = mg.load_valset(out / "val.swds")
        report = pr.evaluate_accuracy(graph, vs)
        assert report.top_k[1] == pytest.approx(manifest["top1"], abs=1e-6)
        assert report.top_k[3] == pytest.approx(manifest["top3"], abs=1e-6)
        assert report.top_k[5] == pytest.approx(manifest["top5"], abs=1e-6)

    def test_checked_in_fixtures_still_match_their_manifest(self):
        from swinfer import modelgraph as mg
        from swinfer import pruning as pr

        manifest = json.loads((TOYSHAPES / "manifest.json").read_text())
        graph = mg.load_model(TOYSHAPES / "model.swmf")
        vs = mg.load_valset(TOYSHAPES / "val.swds")
        report = pr.evaluate_accuracy(graph, vs)
        assert report.top_k[1] == pytest.approx(manifest["top1"], abs=1e-6)


@pytest.fixture(scope="session")
def pruned(tmp_path_factory):
    from swinfer import modelgraph as mg
    from swinfer import pruning as pr

    d = tmp_path_factory.mktemp("pruned")
    graph = mg.load_model(TOYSHAPES / "model.swmf")
    cut, _, _ = pr.apply_strategy(graph, {i: 0.4 for i in graph.prunable_indices})
    path = d / "pruned.swmf"
    mg.save_model(cut, path)
    vs = mg.load_valset(TOYSHAPES / "val.swds")
    top1 = pr.evaluate_accuracy(cut, vs).top_k[1]
    return path, top1, d


class TestFineTune:
    def test_zero_epochs_is_identity(self, pruned, dataset):
        path, _, d = pruned
        out = d / "ft0.swmf"
        train.fine_tune(path, dataset, out, epochs=0, seed=0)
        assert out.read_bytes() == path.read_bytes()

    def test_fine_tuned_recovers_accuracy(self, pruned):
        from swinfer import modelgraph as mg
        from swinfer import pruning as pr

        path, pruned_top1, d = pruned
        out = d / "ft.swmf"
        # fine-tune on the same image set the fixture was trained from
        data = Path("/tmp") / "ft_shapes"
        shapes.generate_dataset(data, per_class=120, size=32, seed=0)
        report = train.fine_tune(path, data, out, epochs=6, seed=0)
        graph = mg.load_model(out)
        vs = mg.load_valset(TOYSHAPES / "val.swds")
        primary_top1 = pr.evaluate_accuracy(graph, vs).top_k[1]
        assert report["top1"] >= pruned_top1
        assert primary_top1 >= pruned_top1
        assert primary_top1 == pytest.approx(report["top1"], abs=1e-6)


class TestLatencyTable:
    def test_matches_checked_in_fixture(self, tmp_path):
        doc = latency_table.export_split_latency_fixture(tmp_path / "sweep.json")
        recorded = json.loads((ROOT / "fixtures" / "wifi_split_sweep.json").read_text())
        assert doc["totals_ms"] == recorded["totals_ms"]
        assert len(doc["totals_ms"]) == 20
        assert doc["totals_ms"]["6"] == 20.07
        assert min(doc["totals_ms"], key=lambda k: doc["totals_ms"][k]) == "6"
