"""Similarity measures, nearest-neighbour retrieval and hubness statistics."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import skew

from .embeddings import EmbeddingSpace
from .errors import ConfigurationError, DegenerateVectorError

logger = logging.getLogger(__name__)

METRICS = ("cosine", "csls")
DEFAULT_CSLS_K = 10
DEFAULT_BATCH_SIZE = 1024


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in float64, clipped to [-1, 1]."""

    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0 or norm_v == 0:
        raise DegenerateVectorError("Cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalise rows in float64; zero rows stay zero."""

    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    return matrix / np.where(norms == 0, 1.0, norms)


def _check_k(k: int, available: int, what: str) -> None:
    if k < 1:
        raise ConfigurationError(f"K must be at least 1, got {k}")
    if k > available:
        raise ConfigurationError(f"K={k} exceeds the number of {what} ({available})")


def mean_topk_similarity(
    queries: np.ndarray, candidates: np.ndarray, k: int, batch_size: int = DEFAULT_BATCH_SIZE
) -> np.ndarray:
    """Mean cosine of each query row to its ``k`` most similar candidate rows."""

    queries = normalize_rows(np.atleast_2d(queries))
    candidates = normalize_rows(candidates)
    _check_k(k, len(candidates), "candidates")
    result = np.empty(len(queries), dtype=np.float64)
    for start in range(0, len(queries), batch_size):
        sims = queries[start:start + batch_size] @ candidates.T
        top = np.partition(sims, -k, axis=1)[:, -k:]
        result[start:start + batch_size] = top.mean(axis=1)
    return result


def csls(
    query: np.ndarray,
    candidates: np.ndarray,
    sources: Optional[np.ndarray] = None,
    k: int = DEFAULT_CSLS_K,
    r_target: Optional[float] = None,
    r_source: Optional[np.ndarray] = None,
) -> np.ndarray:
    """CSLS score of one (mapped) query against every candidate row.

    ``2 cos(q, y) - r_T(q) - r_S(y)`` where ``r_T(q)`` is the mean cosine of
    ``q`` to its ``k`` nearest candidates and ``r_S(y)`` the mean cosine of
    ``y`` to its ``k`` nearest mapped sources. Either radius may be passed in
    precomputed.
    """

    query = np.asarray(query, dtype=np.float64)
    if not np.any(query):
        raise DegenerateVectorError("CSLS is undefined for a zero query vector")
    unit_candidates = normalize_rows(candidates)
    cosines = unit_candidates @ (query / np.linalg.norm(query))
    if r_target is None:
        r_target = float(mean_topk_similarity(query, unit_candidates, k)[0])
    if r_source is None:
        if sources is None:
            raise ConfigurationError("CSLS needs source vectors or precomputed source radii")
        _check_k(k, len(sources), "source vectors")
        r_source = mean_topk_similarity(unit_candidates, sources, k)
    return 2.0 * cosines - r_target - np.asarray(r_source)


class CSLSIndex:
    """Candidate side of CSLS with cached source radii.

    The radii ``r_S`` are computed once against a fixed set of mapped source
    vectors and reused for every query.
    """

    def __init__(self, candidates: np.ndarray, sources: np.ndarray, k: int = DEFAULT_CSLS_K) -> None:
        _check_k(k, len(candidates), "candidates")
        _check_k(k, len(sources), "source vectors")
        self.k = k
        self.candidates = normalize_rows(candidates)
        self.r_source = mean_topk_similarity(self.candidates, sources, k)
        self.r_source.setflags(write=False)

    def r_target(self, queries: np.ndarray) -> np.ndarray:
        return mean_topk_similarity(queries, self.candidates, self.k)

    def scores(self, queries: np.ndarray, r_target: Optional[np.ndarray] = None) -> np.ndarray:
        """CSLS matrix, one row per query."""

        queries = normalize_rows(np.atleast_2d(queries))
        if r_target is None:
            r_target = self.r_target(queries)
        return 2.0 * (queries @ self.candidates.T) - r_target[:, None] - self.r_source[None, :]


def rank_candidates(scores: np.ndarray, words: Sequence[str], k: int) -> List[Tuple[str, float]]:
    """Exact top-``k`` by score, ties broken by word."""

    count = len(scores)
    if count == 0:
        return []
    if k >= count:
        indices = np.arange(count)
    else:
        # keep every candidate tied with the k-th best so ties resolve by word
        kth_best = np.partition(scores, count - k)[count - k]
        indices = np.flatnonzero(scores >= kth_best)
    ordered = sorted(indices.tolist(), key=lambda i: (-scores[i], words[i]))[:k]
    return [(words[i], float(scores[i])) for i in ordered]


@dataclass
class NeighborResult:
    query: str
    neighbors: List[Tuple[str, float]]
    metric: str = "cosine"
    k: int = 10
    truncated: bool = False

    @property
    def words(self) -> List[str]:
        return [word for word, _ in self.neighbors]

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["neighbors"] = [[word, score] for word, score in self.neighbors]
        return data

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def score_candidates(
    query_vector: np.ndarray,
    unit_candidates: np.ndarray,
    metric: str = "cosine",
    index: Optional[CSLSIndex] = None,
) -> np.ndarray:
    """Scores of ``query_vector`` against pre-normalised candidate rows."""

    if metric not in METRICS:
        raise ConfigurationError(f"Unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    query_vector = np.asarray(query_vector, dtype=np.float64)
    norm = np.linalg.norm(query_vector)
    if norm == 0:
        raise DegenerateVectorError("Cannot rank neighbours of a zero vector")
    if metric == "cosine":
        return unit_candidates @ (query_vector / norm)
    if index is None:
        raise ConfigurationError("CSLS retrieval needs a CSLSIndex")
    return index.scores(query_vector)[0]


def nearest_neighbors(
    query_vector: np.ndarray,
    space: EmbeddingSpace,
    k: int = 10,
    metric: str = "cosine",
    *,
    sources: Optional[np.ndarray] = None,
    csls_k: int = DEFAULT_CSLS_K,
    index: Optional[CSLSIndex] = None,
    query: str = "",
) -> NeighborResult:
    """The ``k`` vocabulary words of ``space`` closest to ``query_vector``.

    CSLS needs either a prebuilt ``index`` or the mapped ``sources`` used for
    the candidate radii. Asking for more neighbours than the vocabulary holds
    returns the whole vocabulary with ``truncated`` set.
    """

    if k < 1:
        raise ConfigurationError(f"k must be at least 1, got {k}")
    unit_candidates = index.candidates if index is not None else normalize_rows(space.matrix())
    if metric == "csls" and index is None:
        if sources is None:
            raise ConfigurationError("CSLS retrieval needs the mapped source vectors")
        index = CSLSIndex(unit_candidates, sources, csls_k)
    scores = score_candidates(query_vector, unit_candidates, metric, index)
    truncated = k > len(space)
    if truncated:
        logger.warning(
            "k exceeds vocabulary size", extra={"payload": {"k": k, "vocabulary": len(space), "query": query}}
        )
    return NeighborResult(
        query=query,
        neighbors=rank_candidates(scores, space.words, k),
        metric=metric,
        k=k,
        truncated=truncated,
    )


@dataclass
class HubnessReport:
    """How often each target word appears in query neighbour lists."""

    k: int
    metric: str
    counts: Dict[str, int]
    max_occurrence: int
    skewness: float
    hubs: List[Tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def hubness_report(
    space: EmbeddingSpace,
    queries: np.ndarray,
    k: int = 10,
    metric: str = "cosine",
    *,
    sources: Optional[np.ndarray] = None,
    csls_k: int = DEFAULT_CSLS_K,
    top: int = 10,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> HubnessReport:
    """Count k-occurrences of every word in ``space`` over ``queries``.

    For CSLS the candidate radii use ``sources`` (the queries themselves when
    omitted).
    """

    if metric not in METRICS:
        raise ConfigurationError(f"Unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    queries = normalize_rows(np.atleast_2d(queries))
    candidates = normalize_rows(space.matrix())
    k = min(k, len(candidates))
    _check_k(k, len(candidates), "candidates")
    index = None
    if metric == "csls":
        index = CSLSIndex(candidates, queries if sources is None else sources, csls_k)

    occurrences = np.zeros(len(candidates), dtype=np.int64)
    words = space.words
    for start in range(0, len(queries), batch_size):
        block = queries[start:start + batch_size]
        scores = block @ candidates.T if index is None else index.scores(block)
        for row in scores:
            for word, _ in rank_candidates(row, words, k):
                occurrences[space.vocab.index[word]] += 1

    if occurrences.size and np.all(occurrences == occurrences[0]):
        skewness = 0.0
    else:
        skewness = float(skew(occurrences))
    ranked = sorted(range(len(words)), key=lambda i: (-occurrences[i], words[i]))[:top]
    return HubnessReport(
        k=k,
        metric=metric,
        counts={word: int(count) for word, count in zip(words, occurrences)},
        max_occurrence=int(occurrences.max()) if occurrences.size else 0,
        skewness=skewness,
        hubs=[(words[i], int(occurrences[i])) for i in ranked],
    )
