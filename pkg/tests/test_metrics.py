from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy.stats import ortho_group

from termbridge.embeddings import EmbeddingSpace
from termbridge.errors import ConfigurationError, DegenerateVectorError
from termbridge.metrics import (
    CSLSIndex,
    cosine,
    csls,
    hubness_report,
    mean_topk_similarity,
    nearest_neighbors,
    normalize_rows,
    rank_candidates,
)


def _brute_cos(u, v):
    return float(np.dot(u, v) / math.sqrt(np.dot(u, u) * np.dot(v, v)))


class TestCosine:
    def test_self_similarity(self, rng):
        v = rng.normal(size=7)
        assert cosine(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_analytic(self):
        assert cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_symmetric_scale_invariant_and_bounded(self, rng):
        for _ in range(50):
            u, v = rng.normal(size=(2, 5))
            value = cosine(u, v)
            assert value == pytest.approx(cosine(v, u), abs=1e-15)
            assert value == pytest.approx(cosine(3.5 * u, 0.1 * v), abs=1e-12)
            assert -1.0 <= value <= 1.0

    def test_zero_vector(self):
        with pytest.raises(DegenerateVectorError):
            cosine(np.zeros(3), np.ones(3))

    def test_invariant_under_orthogonal_map(self, rng):
        Q = ortho_group.rvs(dim=6, random_state=1)
        u, v = rng.normal(size=(2, 6))
        assert cosine(Q @ u, Q @ v) == pytest.approx(cosine(u, v), abs=1e-6)


class TestCSLS:
    def test_single_candidate_two_sources(self):
        x = np.array([1.0, 0.0])
        y = np.array([[0.6, 0.8]])
        sources = np.array([[0.0, 1.0], [1.0, 1.0]])
        score = csls(x, y, sources, k=1)
        cos_xy = 0.6
        r_s = max(_brute_cos(y[0], s) for s in sources)
        assert score[0] == pytest.approx(2 * cos_xy - cos_xy - r_s, abs=1e-12)

    def test_matches_exhaustive_oracle(self, rng):
        query = rng.normal(size=4)
        candidates = rng.normal(size=(3, 4))
        sources = rng.normal(size=(5, 4))
        k = 1
        expected = []
        r_t = max(_brute_cos(query, c) for c in candidates)
        for c in candidates:
            r_s = max(_brute_cos(c, s) for s in sources)
            expected.append(2 * _brute_cos(query, c) - r_t - r_s)
        np.testing.assert_allclose(csls(query, candidates, sources, k=k), expected, atol=1e-12)

    def test_k_two_oracle(self, rng):
        query = rng.normal(size=3)
        candidates = rng.normal(size=(4, 3))
        sources = rng.normal(size=(6, 3))
        r_t = np.mean(sorted(_brute_cos(query, c) for c in candidates)[-2:])
        expected = [
            2 * _brute_cos(query, c) - r_t - np.mean(sorted(_brute_cos(c, s) for s in sources)[-2:])
            for c in candidates
        ]
        np.testing.assert_allclose(csls(query, candidates, sources, k=2), expected, atol=1e-12)

    @pytest.mark.parametrize("k", [1, 5, 10])
    def test_fifty_by_fifty_against_loops(self, rng, k):
        queries = rng.normal(size=(50, 6))
        candidates = rng.normal(size=(50, 6))
        index = CSLSIndex(candidates, queries, k=k)
        r_source = [np.mean(sorted(_brute_cos(c, q) for q in queries)[-k:]) for c in candidates]
        for query in queries[:10]:
            r_t = np.mean(sorted(_brute_cos(query, c) for c in candidates)[-k:])
            expected = [2 * _brute_cos(query, c) - r_t - r_s for c, r_s in zip(candidates, r_source)]
            scores = index.scores(query)[0]
            np.testing.assert_allclose(scores, expected, atol=1e-12)
            assert np.argsort(-scores, kind="stable").tolist() == np.argsort(-np.array(expected), kind="stable").tolist()

    def test_member_query_wins_on_identical_sets(self, rng):
        for _ in range(20):
            vectors = normalize_rows(rng.normal(size=(8, 5)))
            member = int(rng.integers(8))
            scores = csls(vectors[member], vectors, vectors, k=1)
            assert int(np.argmax(scores)) == member
        basis = ortho_group.rvs(dim=8, random_state=2)
        for k in range(1, 9):
            scores = csls(basis[3], basis, basis, k=k)
            assert int(np.argmax(scores)) == 3

    def test_precomputed_radii_give_identical_scores(self, rng):
        query = rng.normal(size=6)
        candidates = rng.normal(size=(20, 6))
        sources = rng.normal(size=(15, 6))
        index = CSLSIndex(candidates, sources, k=3)
        r_t = float(index.r_target(query)[0])
        direct = csls(query, candidates, sources, k=3)
        cached = csls(query, candidates, k=3, r_target=r_t, r_source=index.r_source)
        np.testing.assert_allclose(direct, cached, atol=1e-12)
        np.testing.assert_allclose(index.scores(query)[0], direct, atol=1e-12)

    def test_k_exceeding_candidates(self, rng):
        with pytest.raises(ConfigurationError):
            csls(rng.normal(size=3), rng.normal(size=(2, 3)), rng.normal(size=(5, 3)), k=3)
        with pytest.raises(ConfigurationError):
            CSLSIndex(rng.normal(size=(5, 3)), rng.normal(size=(2, 3)), k=3)

    def test_cached_radii_are_read_only(self, rng):
        index = CSLSIndex(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), k=2)
        with pytest.raises(ValueError):
            index.r_source[0] = 1.0

    def test_zero_query(self, rng):
        with pytest.raises(DegenerateVectorError):
            csls(np.zeros(3), rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), k=1)


def test_mean_topk_similarity_batches_consistently(rng):
    queries = rng.normal(size=(10, 4))
    candidates = rng.normal(size=(12, 4))
    whole = mean_topk_similarity(queries, candidates, 3)
    batched = mean_topk_similarity(queries, candidates, 3, batch_size=4)
    np.testing.assert_allclose(whole, batched, atol=1e-12)


def _random_space(rng, n=50, d=8):
    words = [f"w{i:02d}" for i in range(n)]
    return EmbeddingSpace.from_matrix(words, rng.normal(size=(n, d)))


class TestNearestNeighbors:
    def test_own_vector_ranks_first(self, rng):
        space = _random_space(rng)
        result = nearest_neighbors(space.matrix()[17], space, k=5)
        assert result.words[0] == "w17"
        assert result.neighbors[0][1] == pytest.approx(1.0)

    def test_matches_brute_force_sort(self, rng):
        space = _random_space(rng)
        query = rng.normal(size=8)
        oracle = sorted(
            ((word, _brute_cos(query, row)) for word, row in zip(space.words, space.matrix())),
            key=lambda item: (-item[1], item[0]),
        )
        result = nearest_neighbors(query, space, k=10)
        assert result.words == [word for word, _ in oracle[:10]]
        np.testing.assert_allclose([s for _, s in result.neighbors], [s for _, s in oracle[:10]], atol=1e-12)

    def test_large_space_matches_sorting_every_query(self, rng):
        words = [f"w{i:04d}" for i in range(5000)]
        space = EmbeddingSpace.from_matrix(words, rng.normal(size=(5000, 16)))
        unit = normalize_rows(space.matrix())
        for query in rng.normal(size=(200, 16)):
            scores = unit @ (query / np.linalg.norm(query))
            oracle = sorted(range(len(words)), key=lambda i: (-scores[i], words[i]))[:10]
            assert nearest_neighbors(query, space, k=10).words == [words[i] for i in oracle]

    def test_full_ranking_and_truncation(self, rng):
        space = _random_space(rng, n=6)
        full = nearest_neighbors(rng.normal(size=8), space, k=6)
        assert sorted(full.words) == sorted(space.words)
        assert not full.truncated
        over = nearest_neighbors(rng.normal(size=8), space, k=9)
        assert len(over.neighbors) == 6
        assert over.truncated

    def test_scores_non_increasing_and_unique(self, rng):
        space = _random_space(rng)
        result = nearest_neighbors(rng.normal(size=8), space, k=20, metric="csls", sources=rng.normal(size=(30, 8)))
        scores = [score for _, score in result.neighbors]
        assert scores == sorted(scores, reverse=True)
        assert len(set(result.words)) == len(result.words) == 20

    def test_csls_needs_sources(self, rng):
        with pytest.raises(ConfigurationError):
            nearest_neighbors(rng.normal(size=8), _random_space(rng), metric="csls")

    def test_bad_k_and_metric(self, rng):
        space = _random_space(rng)
        with pytest.raises(ConfigurationError):
            nearest_neighbors(rng.normal(size=8), space, k=0)
        with pytest.raises(ConfigurationError):
            nearest_neighbors(rng.normal(size=8), space, metric="euclid")

    def test_json_line(self, rng):
        space = _random_space(rng, n=3)
        line = nearest_neighbors(space.matrix()[0], space, k=2, query="w00").to_json_line()
        record = json.loads(line)
        assert record["query"] == "w00"
        assert record["metric"] == "cosine"
        assert record["neighbors"][0][0] == "w00"


def test_rank_candidates_breaks_ties_by_word():
    scores = np.array([0.5, 0.9, 0.5, 0.5, 0.1])
    words = ["delta", "alpha", "charlie", "bravo", "echo"]
    assert rank_candidates(scores, words, 3) == [("alpha", 0.9), ("bravo", 0.5), ("charlie", 0.5)]
    assert rank_candidates(np.array([]), [], 3) == []


class TestHubness:
    def _hub_construction(self, rng):
        d = 50
        direction = normalize_rows(rng.normal(size=(1, d)))[0]
        queries = normalize_rows(direction + 0.3 * rng.normal(size=(200, d)))
        others = normalize_rows(rng.normal(size=(30, d)))
        hub = normalize_rows(queries.mean(axis=0, keepdims=True))
        words = [f"t{i:02d}" for i in range(30)] + ["hub"]
        return EmbeddingSpace.from_matrix(words, np.vstack([others, hub])), queries

    def test_centroid_is_the_hub(self, rng):
        space, queries = self._hub_construction(rng)
        report = hubness_report(space, queries, k=5)
        assert report.counts["hub"] == report.max_occurrence
        assert report.hubs[0][0] == "hub"
        assert report.skewness > 0

    def test_csls_reduces_hub_occurrence(self, rng):
        space, queries = self._hub_construction(rng)
        cosine_report = hubness_report(space, queries, k=5, metric="cosine")
        csls_report = hubness_report(space, queries, k=5, metric="csls")
        assert csls_report.counts["hub"] <= cosine_report.counts["hub"]

    def test_orthonormal_basis_queried_by_itself(self):
        basis = np.eye(6)
        space = EmbeddingSpace.from_matrix([f"e{i}" for i in range(6)], basis)
        report = hubness_report(space, basis, k=1)
        assert set(report.counts.values()) == {1}
        assert report.max_occurrence == 1
        assert report.skewness == 0.0
