import io
import json

import numpy as np
import pytest

from neuralrank import (
    DistanceMetric,
    EmbeddingSet,
    EmptyReportError,
    ResolutionError,
    ValidationError,
    layer_sweep,
    load_manifest,
    neural_rank,
    pca_sensitivity,
    rank_accuracy_agreement,
    read_embedding_file,
    synth_zoo,
    viz_export,
    write_embedding_file,
)
from neuralrank.ranker import ScoreEntry, ScoreReport, resolve_layer


def clustered_embedding(rng, t, d, k, center_distance):
    """Per-class Gaussians with unit axis noise and the given center spacing."""
    basis, _ = np.linalg.qr(rng.standard_normal((d, k)))
    centers = (basis[:, :k] * (center_distance / np.sqrt(2))).T
    labels = np.arange(t) % k
    data = centers[labels] + rng.standard_normal((t, d))
    return data.astype(np.float32), labels


def write_zoo(tmp_path, model_matrices, labels, dataset_id="ds", accuracies=None):
    """model_matrices: {model_id: {layer_id: matrix}}; returns manifest path."""
    models = []
    for model_id, layer_map in model_matrices.items():
        layers = []
        for layer_id, matrix in layer_map.items():
            fname = f"{model_id}_{layer_id}.nrnk"
            write_embedding_file(
                EmbeddingSet(model_id, layer_id, dataset_id, matrix, labels),
                tmp_path / fname)
            layers.append({"layer_id": layer_id,
                           "dims": int(matrix.shape[1]), "path": fname})
        model = {"model_id": model_id, "layers": layers, "metadata": {}}
        if accuracies and model_id in accuracies:
            model["accuracy"] = accuracies[model_id]
        models.append(model)
    path = tmp_path / "zoo.json"
    path.write_text(json.dumps({"dataset_id": dataset_id, "models": models}))
    return path


class TestNeuralRank:
    def test_planted_separation_beats_collapsed(self, tmp_path):
        rng = np.random.default_rng(0)
        separated, labels = clustered_embedding(rng, 300, 16, 3, center_distance=10.0)
        collapsed = rng.standard_normal((300, 16)).astype(np.float32)
        manifest_path = write_zoo(tmp_path, {"A": {"L1": separated},
                                             "B": {"L1": collapsed}}, labels)
        report = neural_rank(load_manifest(manifest_path), layer="L1", d=10)
        by_id = {e.model_id: e for e in report.entries}
        assert by_id["A"].rank == 1 and by_id["B"].rank == 2
        assert by_id["A"].sc_score > 0.8 > by_id["B"].sc_score

    def test_missing_layer_goes_to_errors(self, tmp_path):
        rng = np.random.default_rng(1)
        good, labels = clustered_embedding(rng, 60, 8, 2, center_distance=8.0)
        other = rng.standard_normal((60, 8)).astype(np.float32)
        manifest_path = write_zoo(tmp_path, {"A": {"L1": good, "L2": good},
                                             "B": {"L1": other}}, labels)
        report = neural_rank(load_manifest(manifest_path), layer="L2", d=4)
        assert [e.model_id for e in report.entries] == ["A"]
        assert report.errors[0].model_id == "B"
        assert report.errors[0].error == "ResolutionError"

    def test_corrupt_file_isolated(self, tmp_path):
        rng = np.random.default_rng(2)
        m1, labels = clustered_embedding(rng, 80, 8, 2, center_distance=6.0)
        m2, _ = clustered_embedding(rng, 80, 8, 2, center_distance=3.0)
        manifest_path = write_zoo(tmp_path, {"A": {"L1": m1}, "B": {"L1": m2}}, labels)
        clean = neural_rank(load_manifest(manifest_path), layer="L1", d=5)
        blob = (tmp_path / "B_L1.nrnk").read_bytes()
        (tmp_path / "B_L1.nrnk").write_bytes(blob[:-3])
        report = neural_rank(load_manifest(manifest_path), layer="L1", d=5)
        assert [e.model_id for e in report.entries] == ["A"]
        assert report.errors[0].error == "TruncationError"
        clean_a = [e for e in clean.entries if e.model_id == "A"][0]
        assert report.entries[0].sc_score == clean_a.sc_score

    def test_all_models_failing_raises(self, tmp_path):
        rng = np.random.default_rng(3)
        m, labels = clustered_embedding(rng, 20, 4, 2, center_distance=4.0)
        manifest_path = write_zoo(tmp_path, {"A": {"L1": m}}, labels)
        with pytest.raises(EmptyReportError):
            neural_rank(load_manifest(manifest_path), layer="L9", d=4)

    def test_dataset_mismatch_captured(self, tmp_path):
        rng = np.random.default_rng(4)
        m, labels = clustered_embedding(rng, 20, 4, 2, center_distance=4.0)
        write_embedding_file(EmbeddingSet("A", "L1", "other", m, labels),
                             tmp_path / "A_L1.nrnk")
        m2, _ = clustered_embedding(rng, 20, 4, 2, center_distance=4.0)
        write_embedding_file(EmbeddingSet("B", "L1", "ds", m2, labels),
                             tmp_path / "B_L1.nrnk")
        manifest = {"dataset_id": "ds", "models": [
            {"model_id": "A", "metadata": {},
             "layers": [{"layer_id": "L1", "dims": 4, "path": "A_L1.nrnk"}]},
            {"model_id": "B", "metadata": {},
             "layers": [{"layer_id": "L1", "dims": 4, "path": "B_L1.nrnk"}]}]}
        path = tmp_path / "zoo.json"
        path.write_text(json.dumps(manifest))
        report = neural_rank(load_manifest(path), layer="L1", d=4)
        assert [e.model_id for e in report.entries] == ["B"]
        assert report.errors[0].model_id == "A"

    def test_rerun_is_identical_and_jobs_independent(self, tmp_path):
        manifest_path = synth_zoo([4.0, 1.0, 0.0], classes=3, samples=120,
                                  dims=16, seed=5, out_dir=tmp_path)
        manifest = load_manifest(manifest_path)
        r1 = neural_rank(manifest, d=6, jobs=1)
        r2 = neural_rank(manifest, d=6, jobs=3)
        assert [(e.model_id, e.sc_score, e.rank) for e in r1.entries] == \
               [(e.model_id, e.sc_score, e.rank) for e in r2.entries]
        assert r1.config_digest == r2.config_digest

    def test_report_round_trip(self, tmp_path):
        manifest_path = synth_zoo([2.0, 0.5], classes=2, samples=60,
                                  dims=8, seed=6, out_dir=tmp_path)
        report = neural_rank(load_manifest(manifest_path), d=4)
        again = ScoreReport.from_dict(json.loads(json.dumps(report.to_dict())))
        assert again.entries == report.entries
        assert again.config_digest == report.config_digest


class TestLayerSelector:
    def entry(self, tmp_path):
        rng = np.random.default_rng(7)
        m, labels = clustered_embedding(rng, 30, 4, 2, center_distance=4.0)
        path = write_zoo(tmp_path, {"A": {"L0": m, "L1": m, "L5": m}}, labels)
        return load_manifest(path).models[0]

    def test_literal_id(self, tmp_path):
        assert resolve_layer(self.entry(tmp_path), "L1").layer_id == "L1"

    def test_last_dense(self, tmp_path):
        assert resolve_layer(self.entry(tmp_path), "last-dense").layer_id == "L5"
        assert resolve_layer(self.entry(tmp_path), "last").layer_id == "L5"

    def test_positional(self, tmp_path):
        assert resolve_layer(self.entry(tmp_path), "#0").layer_id == "L0"
        with pytest.raises(ResolutionError, match="out of range"):
            resolve_layer(self.entry(tmp_path), "#3")

    def test_unknown_id(self, tmp_path):
        with pytest.raises(ResolutionError, match="L7"):
            resolve_layer(self.entry(tmp_path), "L7")


class TestLayerSweep:
    def test_scores_layers_in_declared_order(self, tmp_path):
        manifest_path = synth_zoo([3.0], classes=3, samples=90, dims=12,
                                  seed=8, out_dir=tmp_path)
        report = layer_sweep(load_manifest(manifest_path), "m00", d=6)
        assert [layer for layer, _ in report.points] == ["L0", "L1"]
        assert report.points[1][1] > report.points[0][1]

    def test_identical_input_layer_scores_identically(self, tmp_path):
        manifest_path = synth_zoo([3.0, 1.0, 0.0], classes=3, samples=90,
                                  dims=12, seed=9, out_dir=tmp_path)
        manifest = load_manifest(manifest_path)
        l0_scores = {m.model_id: layer_sweep(manifest, m.model_id, d=6).points[0][1]
                     for m in manifest.models}
        assert len(set(l0_scores.values())) == 1

    def test_unknown_model(self, tmp_path):
        manifest_path = synth_zoo([1.0], classes=2, samples=20, dims=4,
                                  seed=10, out_dir=tmp_path)
        with pytest.raises(ResolutionError, match="nope"):
            layer_sweep(load_manifest(manifest_path), "nope")

    def test_single_layer_model(self, tmp_path):
        rng = np.random.default_rng(11)
        m, labels = clustered_embedding(rng, 30, 6, 2, center_distance=5.0)
        path = write_zoo(tmp_path, {"A": {"L1": m}}, labels)
        report = layer_sweep(load_manifest(path), "A", d=4)
        assert len(report.points) == 1


class TestSensitivity:
    def test_planted_zoo_is_stable_over_grid(self, tmp_path):
        manifest_path = synth_zoo([8.0, 4.0, 2.0], classes=5, samples=300,
                                  dims=64, seed=12, out_dir=tmp_path)
        report = pca_sensitivity(load_manifest(manifest_path), "L1",
                                 [5, 10, 20, 50])
        assert report.ranking_change_points == []
        assert [c.model_id for c in report.curves] == ["m00", "m01", "m02"]
        assert all(len(c.points) == 4 for c in report.curves)

    def test_single_model_never_changes(self, tmp_path):
        manifest_path = synth_zoo([2.0], classes=2, samples=60, dims=16,
                                  seed=13, out_dir=tmp_path)
        report = pca_sensitivity(load_manifest(manifest_path), "L1", [2, 5, 8])
        assert report.ranking_change_points == []

    def test_grid_validation(self, tmp_path):
        manifest_path = synth_zoo([2.0], classes=2, samples=60, dims=16,
                                  seed=14, out_dir=tmp_path)
        manifest = load_manifest(manifest_path)
        with pytest.raises(ValidationError):
            pca_sensitivity(manifest, "L1", [])
        with pytest.raises(ValidationError):
            pca_sensitivity(manifest, "L1", [5, 5])
        with pytest.raises(ValidationError):
            pca_sensitivity(manifest, "L1", [0, 5])


def agreement_fixture(scores, accuracies):
    entries = [ScoreEntry(model_id=m, layer_id="L5", sc_score=s,
                          degenerate_count=0, pca_d_effective=10)
               for m, s in scores.items()]
    entries.sort(key=lambda e: (-e.sc_score, e.model_id))
    for i, e in enumerate(entries):
        e.rank = i + 1
    report = ScoreReport(target_dataset_id="ds", layer_selector="L5",
                         metric="cosine", denominator_mode="mean",
                         zero_norm_mode="error", pca_d_requested=10,
                         entries=entries, errors=[], generated_at="",
                         config_digest="")
    from neuralrank.store import LayerRef, ModelEntry, ZooManifest
    models = [ModelEntry(model_id=m, accuracy=a, metadata={},
                         layers=[LayerRef("L5", 4, "x.nrnk")])
              for m, a in accuracies.items()]
    return report, ZooManifest(dataset_id="ds", models=models)


class TestAgreement:
    def test_identical_rankings(self):
        report, manifest = agreement_fixture(
            {"a": 0.9, "b": 0.7, "c": 0.5, "d": 0.3},
            {"a": 0.99, "b": 0.95, "c": 0.90, "d": 0.85})
        agreement = rank_accuracy_agreement(report, manifest)
        assert agreement.spearman_rho == pytest.approx(1.0)
        assert agreement.kendall_tau == pytest.approx(1.0)

    def test_reversed_rankings(self):
        report, manifest = agreement_fixture(
            {"a": 0.9, "b": 0.7, "c": 0.5, "d": 0.3, "e": 0.1},
            {"a": 0.80, "b": 0.85, "c": 0.90, "d": 0.95, "e": 0.99})
        agreement = rank_accuracy_agreement(report, manifest)
        assert agreement.spearman_rho == pytest.approx(-1.0)
        assert agreement.kendall_tau == pytest.approx(-1.0)

    def test_models_without_accuracy_excluded(self):
        report, manifest = agreement_fixture(
            {"a": 0.9, "b": 0.7, "c": 0.5},
            {"a": 0.99, "b": 0.95})
        agreement = rank_accuracy_agreement(report, manifest)
        assert len(agreement.pairs) == 2

    def test_too_few_accuracies(self):
        report, manifest = agreement_fixture({"a": 0.9, "b": 0.7}, {"a": 0.99})
        with pytest.raises(ValidationError, match="at least 2"):
            rank_accuracy_agreement(report, manifest)


class TestVizExport:
    def rows(self, es):
        buf = io.BytesIO()
        viz_export(es, DistanceMetric.COSINE, buf)
        lines = buf.getvalue().decode().strip().splitlines()
        assert lines[0] == "x,y,z,label"
        return [line.split(",") for line in lines[1:]]

    def test_collinear_variance_on_x_only(self):
        data = np.array([[0., 0., 0.], [1., 1., 1.], [2., 2., 2.], [3., 3., 3.]],
                        dtype=np.float32)
        es = EmbeddingSet("m", "L1", "ds", data, [0, 0, 1, 1])
        rows = self.rows(es)
        xs = [float(r[0]) for r in rows]
        assert max(abs(v) for v in xs) > 1.0
        for r in rows:
            assert abs(float(r[1])) < 1e-6 and abs(float(r[2])) < 1e-6

    def test_row_count_matches_samples(self):
        rng = np.random.default_rng(15)
        es = EmbeddingSet("m", "L1", "ds", rng.standard_normal((37, 5)),
                          np.arange(37) % 3)
        assert len(self.rows(es)) == 37

    def test_planted_clusters_separate_in_export(self):
        rng = np.random.default_rng(16)
        basis, _ = np.linalg.qr(rng.standard_normal((10, 3)))
        centers = basis[:, :3].T * 20.0
        labels = np.arange(150) % 3
        data = centers[labels] + rng.standard_normal((150, 10))
        es = EmbeddingSet("m", "L1", "ds", data, labels)
        rows = self.rows(es)
        coords = np.array([[float(v) for v in r[:3]] for r in rows])
        got_labels = np.array([int(r[3]) for r in rows])
        cent = np.stack([coords[got_labels == k].mean(axis=0) for k in range(3)])
        within = max(coords[got_labels == k].std() for k in range(3))
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.linalg.norm(cent[i] - cent[j]) > within


class TestSynthZoo:
    def test_same_seed_byte_identical(self, tmp_path):
        p1 = synth_zoo([4.0, 1.0], classes=3, samples=60, dims=8, seed=21,
                       out_dir=tmp_path / "a")
        p2 = synth_zoo([4.0, 1.0], classes=3, samples=60, dims=8, seed=21,
                       out_dir=tmp_path / "b")
        for f1 in sorted(p1.parent.iterdir()):
            f2 = p2.parent / f1.name
            assert f1.read_bytes() == f2.read_bytes(), f1.name

    def test_zero_separation_scores_near_zero(self, tmp_path):
        for seed in range(5):
            path = synth_zoo([0.0], classes=2, samples=500, dims=64, seed=seed,
                             out_dir=tmp_path / str(seed))
            report = neural_rank(load_manifest(path), layer="L1", d=10)
            assert abs(report.entries[0].sc_score) < 0.1

    def test_orders_by_separation(self, tmp_path):
        for seed in range(3):
            path = synth_zoo([4.0, 1.0, 0.0], classes=5, samples=200, dims=32,
                             seed=seed, out_dir=tmp_path / str(seed))
            report = neural_rank(load_manifest(path), layer="L1", d=10)
            assert [e.model_id for e in report.entries] == ["m00", "m01", "m02"]

    def test_spec_validation(self, tmp_path):
        with pytest.raises(ValidationError):
            synth_zoo([], classes=2, samples=20, dims=4, seed=0, out_dir=tmp_path)
        with pytest.raises(ValidationError):
            synth_zoo([1.0, 1.0], classes=2, samples=20, dims=4, seed=0,
                      out_dir=tmp_path)
        with pytest.raises(ValidationError):
            synth_zoo([1.0, -0.5], classes=2, samples=20, dims=4, seed=0,
                      out_dir=tmp_path)
        with pytest.raises(ValidationError):
            synth_zoo([1.0], classes=4, samples=6, dims=8, seed=0,
                      out_dir=tmp_path)

    def test_generated_files_validate(self, tmp_path):
        path = synth_zoo([2.0], classes=2, samples=40, dims=8, seed=22,
                         out_dir=tmp_path)
        manifest = load_manifest(path)
        for model in manifest.models:
            for ref in model.layers:
                es = read_embedding_file(ref.resolved_path)
                assert es.dims == ref.dims
                assert es.dataset_id == manifest.dataset_id
