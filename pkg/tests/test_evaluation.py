from __future__ import annotations

import logging

import numpy as np
import pytest

from termbridge.alignment import AlignmentMatrix
from termbridge.embeddings import EmbeddingSpace
from termbridge.errors import EvaluationError, GoldFormatError
from termbridge.evaluation import (
    OOV_MARKER,
    GoldDictionary,
    neighbor_table,
    pca_project,
    precision_at_k,
)


def _angles(degrees):
    radians = np.deg2rad(degrees)
    return np.stack([np.cos(radians), np.sin(radians)], axis=1)


@pytest.fixture
def toy_spaces():
    src = EmbeddingSpace.from_matrix(["a", "b", "c"], _angles([0.0, 90.0, 180.0]))
    tgt = EmbeddingSpace.from_matrix(["x", "y", "z"], _angles([0.0, 90.0, 200.0]))
    return src, tgt


class TestGoldDictionary:
    def test_parse_multiple_targets_and_comments(self):
        gold = GoldDictionary.parse("# header\nmyocardial\theart|attack\n\nedema\tswelling\n")
        assert gold.pairs == [("myocardial", frozenset({"heart", "attack"})), ("edema", frozenset({"swelling"}))]
        assert len(gold) == 2

    def test_missing_tab_reports_line(self):
        with pytest.raises(GoldFormatError, match="<gold>:2:"):
            GoldDictionary.parse("a\tb\nno tab here\n")

    def test_duplicate_source_is_an_error(self):
        with pytest.raises(GoldFormatError, match="duplicate"):
            GoldDictionary.parse("a\tb\na\tc\n")

    def test_normalizer_merges_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="termbridge"):
            gold = GoldDictionary.parse("Edema\tSwelling\nedema\tPuffiness\n", normalizer=str.lower)
        assert gold.pairs == [("edema", frozenset({"swelling", "puffiness"}))]
        assert any("merged" in record.getMessage() for record in caplog.records)

    def test_empty_target(self):
        with pytest.raises(GoldFormatError):
            GoldDictionary.parse("a\t|\n")

    def test_from_pairs_groups_targets(self):
        gold = GoldDictionary.from_pairs([("a", "x"), ("a", "y"), ("b", "z")])
        assert dict(gold.pairs) == {"a": frozenset({"x", "y"}), "b": frozenset({"z"})}

    def test_tsv_round_trip(self, tmp_path):
        gold = GoldDictionary.from_pairs([("a", "y"), ("a", "x"), ("b", "z")])
        path = tmp_path / "gold.tsv"
        path.write_text(gold.to_tsv(), encoding="utf-8")
        assert GoldDictionary.from_tsv(path).pairs == gold.pairs

    def test_file_errors(self, tmp_path):
        with pytest.raises(GoldFormatError, match="does not exist"):
            GoldDictionary.from_tsv(tmp_path / "missing.tsv")
        bad = tmp_path / "bad.tsv"
        bad.write_bytes(b"a\t\xff\n")
        with pytest.raises(GoldFormatError, match="UTF-8"):
            GoldDictionary.from_tsv(bad)


class TestPrecisionAtK:
    def test_hand_computed_example(self, toy_spaces):
        src, tgt = toy_spaces
        gold = GoldDictionary.from_pairs([("a", "x"), ("b", "y"), ("c", "y")])
        report = precision_at_k(AlignmentMatrix.identity(2), src, tgt, gold, ks=[1, 2], metric="cosine")
        assert report.precision_at == pytest.approx({1: 2 / 3, 2: 1.0})
        assert [query.hit_rank for query in report.per_query] == [1, 1, 2]
        assert report.summary_line() == "P@1 0.667 P@2 1.000"

    def test_oov_queries_are_skipped(self, toy_spaces):
        src, tgt = toy_spaces
        gold = GoldDictionary.from_pairs([("a", "x"), ("unknown", "y")])
        report = precision_at_k(AlignmentMatrix.identity(2), src, tgt, gold, ks=[1], metric="cosine")
        assert report.skipped == ["unknown"]
        assert report.evaluated == 1
        assert report.precision_at[1] == 1.0
        assert report.precision_at_all[1] == 0.5

    def test_every_query_skipped(self, toy_spaces):
        src, tgt = toy_spaces
        gold = GoldDictionary.from_pairs([("unknown", "y")])
        report = precision_at_k(AlignmentMatrix.identity(2), src, tgt, gold, ks=[1], metric="cosine")
        assert report.evaluated == 0
        assert report.precision_at[1] == 0.0

    def test_precision_is_monotone_in_k(self, rng):
        src = EmbeddingSpace.from_matrix([f"s{i}" for i in range(80)], rng.normal(size=(80, 6)))
        tgt = EmbeddingSpace.from_matrix([f"t{i}" for i in range(80)], rng.normal(size=(80, 6)))
        gold = GoldDictionary.from_pairs([(f"s{i}", f"t{i}") for i in range(80)])
        report = precision_at_k(AlignmentMatrix.identity(6), src, tgt, gold)
        values = [report.precision_at[k] for k in (1, 5, 10)]
        assert values == sorted(values)
        assert all(0.0 <= value <= 1.0 for value in values)

    def test_unrelated_spaces_score_at_chance(self):
        hits = {1: 0.0, 5: 0.0, 10: 0.0}
        seeds = 20
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            src = EmbeddingSpace.from_matrix([f"s{i}" for i in range(100)], rng.normal(size=(100, 20)))
            targets = [f"t{i}" for i in range(1000)]
            tgt = EmbeddingSpace.from_matrix(targets, rng.normal(size=(1000, 20)))
            picks = rng.integers(0, 1000, size=100)
            gold = GoldDictionary.from_pairs([(f"s{i}", targets[j]) for i, j in enumerate(picks)])
            report = precision_at_k(AlignmentMatrix.identity(20), src, tgt, gold)
            for k in hits:
                hits[k] += report.precision_at[k] * len(gold)
        queries = seeds * 100
        for k, count in hits.items():
            expected = k / 1000
            standard_error = np.sqrt(expected * (1 - expected) / queries)
            assert abs(count / queries - expected) <= 3 * standard_error

    def test_planted_rotation_is_recovered(self, rotation_pair):
        W = AlignmentMatrix(W=rotation_pair.true_map)
        report = precision_at_k(W, rotation_pair.src, rotation_pair.tgt, rotation_pair.held_out_gold())
        assert report.precision_at == {1: 1.0, 5: 1.0, 10: 1.0}

    def test_report_dict(self, toy_spaces):
        src, tgt = toy_spaces
        gold = GoldDictionary.from_pairs([("a", "x")])
        report = precision_at_k(
            AlignmentMatrix.identity(2), src, tgt, gold, ks=[1], metric="cosine", config={"seed": 1}
        )
        data = report.to_dict()
        assert data["precision_at"] == {"1": 1.0}
        assert data["config"] == {"seed": 1}
        assert data["per_query"][0]["retrieved"][0][0] == "x"

    @pytest.mark.parametrize("ks", [[], [0], [1, -2]])
    def test_bad_k(self, toy_spaces, ks):
        src, tgt = toy_spaces
        with pytest.raises(EvaluationError):
            precision_at_k(AlignmentMatrix.identity(2), src, tgt, GoldDictionary.from_pairs([("a", "x")]), ks=ks)

    def test_empty_gold(self, toy_spaces):
        src, tgt = toy_spaces
        with pytest.raises(EvaluationError):
            precision_at_k(AlignmentMatrix.identity(2), src, tgt, GoldDictionary([]))


class TestNeighborTable:
    def test_columns_and_oov_marker(self, toy_spaces):
        src, tgt = toy_spaces
        table = neighbor_table(AlignmentMatrix.identity(2), src, tgt, ["a", "nope"], k=2, metric="cosine")
        assert table.columns[0].neighbors[0][0] == "x"
        assert table.columns[1].neighbors is None
        assert table.to_tsv() == f"a\tnope\nx\t{OOV_MARKER}\ny\t\n"

    def test_render_aligns_columns(self, toy_spaces):
        src, tgt = toy_spaces
        rendered = neighbor_table(AlignmentMatrix.identity(2), src, tgt, ["a", "b"], k=1, metric="cosine").render()
        assert rendered.splitlines() == ["a  b", "-  -", "x  y"]

    def test_no_queries(self, toy_spaces):
        src, tgt = toy_spaces
        table = neighbor_table(AlignmentMatrix.identity(2), src, tgt, [], k=3)
        assert table.render() == ""
        assert table.to_tsv() == ""


class TestPCA:
    def test_shapes_labels_and_sign(self, rng):
        sets = {
            "professional": [(f"p{i}", rng.normal(size=5)) for i in range(6)],
            "consumer": [(f"c{i}", rng.normal(size=5)) for i in range(4)],
        }
        projection = pca_project(sets, out_dims=2)
        assert projection.points.shape == (10, 2)
        assert projection.labels == ["professional"] * 6 + ["consumer"] * 4
        assert projection.words[6] == "c0"
        assert projection.explained_variance[0] >= projection.explained_variance[1]
        for axis in projection.components:
            assert axis[np.argmax(np.abs(axis))] > 0

    def test_points_on_a_line(self):
        direction = np.array([3.0, 4.0]) / 5.0
        sets = {"line": [(f"w{i}", t * direction) for i, t in enumerate([-2.0, -1.0, 0.0, 1.0, 2.0])]}
        projection = pca_project(sets, out_dims=2)
        np.testing.assert_allclose(projection.components[0], direction, atol=1e-12)
        np.testing.assert_allclose(projection.points[:, 0], [-2.0, -1.0, 0.0, 1.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(projection.points[:, 1], 0.0, atol=1e-12)

    def test_three_d_line_has_one_component(self, rng):
        direction = np.array([1.0, -2.0, 2.0]) / 3.0
        sets = {"line": [(f"w{i}", t * direction + 5.0) for i, t in enumerate(rng.normal(size=12))]}
        projection = pca_project(sets, out_dims=2)
        assert projection.explained_variance[1] == pytest.approx(0.0, abs=1e-10)
        assert projection.explained_variance[0] > 0

    def test_full_rank_2d_preserves_distances(self, rng):
        data = rng.normal(size=(15, 2)) * np.array([3.0, 0.5])
        sets = {"plane": [(f"w{i}", row) for i, row in enumerate(data)]}
        points = pca_project(sets, out_dims=2).points
        before = np.linalg.norm(data[:, None, :] - data[None, :, :], axis=-1)
        after = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        np.testing.assert_allclose(after, before, atol=1e-10)

    def test_matches_covariance_eigendecomposition(self, rng):
        data = rng.normal(size=(50, 10))
        sets = {"random": [(f"w{i}", row) for i, row in enumerate(data)]}
        projection = pca_project(sets, out_dims=3)

        centered = data - data.mean(axis=0)
        eigenvalues, eigenvectors = np.linalg.eigh(np.cov(centered, rowvar=False))
        order = np.argsort(eigenvalues)[::-1][:3]
        oracle = centered @ eigenvectors[:, order]
        np.testing.assert_allclose(projection.explained_variance, eigenvalues[order], atol=1e-8)
        for axis in range(3):
            sign = np.sign(oracle[:, axis] @ projection.points[:, axis])
            np.testing.assert_allclose(projection.points[:, axis], sign * oracle[:, axis], atol=1e-8)

    def test_explained_variance_is_non_increasing(self):
        for seed in range(10):
            data = np.random.default_rng(seed).normal(size=(30, 8)) * np.linspace(0.5, 4.0, 8)
            projection = pca_project({"x": [(f"w{i}", row) for i, row in enumerate(data)]}, out_dims=8)
            variance = projection.explained_variance
            assert np.all(np.diff(variance) <= 1e-12)
            assert variance[-1] >= 0

    def test_tsv_layout(self):
        sets = {"a": [("u", np.array([1.0, 0.0])), ("v", np.array([-1.0, 0.0]))]}
        lines = pca_project(sets, out_dims=1).to_tsv().splitlines()
        assert lines[0] == "label\tword\tx"
        label, word, x = lines[1].split("\t")
        assert (label, word) == ("a", "u")
        assert float(x) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_inputs(self):
        with pytest.raises(EvaluationError):
            pca_project({})
        with pytest.raises(EvaluationError, match="identical"):
            pca_project({"a": [("u", np.ones(3)), ("v", np.ones(3))]})
        with pytest.raises(EvaluationError):
            pca_project({"a": [("u", np.zeros(2)), ("v", np.ones(2))]}, out_dims=3)
