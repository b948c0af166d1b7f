"""Linear maps between a source and a target embedding space.

Anchors (identical strings, a gold list, or an induced dictionary) give
matched columns ``X`` (source) and ``Y`` (target). The orthogonal map is the
closed-form Procrustes solution ``W = U Vᵀ`` with ``U Σ Vᵀ = svd(Y Xᵀ)``.
Iterative refinement alternates that solve with re-inducing a dictionary from
CSLS mutual nearest neighbours.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .embeddings import EmbeddingSpace, word_vector
from .errors import AlignmentError, ConfigurationError, NumericalError
from .metrics import (
    DEFAULT_CSLS_K,
    METRICS,
    CSLSIndex,
    NeighborResult,
    normalize_rows,
    rank_candidates,
    score_candidates,
)

logger = logging.getLogger(__name__)

PROVENANCES = ("identical-strings", "refined", "gold", "synthetic")
STATUSES = ("ok", "degraded", "unrefined")
ORTHOGONALITY_TOLERANCE = 1e-6
DEFAULT_REFINE_ITERATIONS = 20
DEFAULT_VOCAB_CAP = 10_000
_SINGULAR_RTOL = 1e-10
_CHUNK = 1024


@dataclass
class AnchorDictionary:
    """Ordered (source, target) word pairs without duplicates."""

    pairs: List[Tuple[str, str]] = field(default_factory=list)
    provenance: str = "identical-strings"

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ConfigurationError(f"Unknown anchor provenance {self.provenance!r}")
        seen = set()
        unique: List[Tuple[str, str]] = []
        for source, target in self.pairs:
            pair = (str(source), str(target))
            if pair not in seen:
                seen.add(pair)
                unique.append(pair)
        self.pairs = unique

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Tuple[str, str]]:
        return iter(self.pairs)

    @property
    def source_words(self) -> List[str]:
        return [source for source, _ in self.pairs]

    @property
    def target_words(self) -> List[str]:
        return [target for _, target in self.pairs]

    def missing_words(self, src: EmbeddingSpace, tgt: EmbeddingSpace) -> List[str]:
        missing = [source for source in self.source_words if source not in src]
        missing += [target for target in self.target_words if target not in tgt]
        return missing

    def to_dict(self) -> Dict[str, object]:
        return {"pairs": [list(pair) for pair in self.pairs], "provenance": self.provenance}


@dataclass
class IterationRecord:
    iteration: int
    dictionary_size: int
    residual: float

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class AlignmentMatrix:
    """A learnt map ``W`` applied as ``W @ p`` to source vectors."""

    W: np.ndarray
    orthogonal: bool = True
    residual: Optional[float] = None
    iterations_used: int = 0
    ambiguous: bool = False
    status: str = "ok"
    converged: bool = False
    method: str = "procrustes"
    normalization: str = "unit"
    dictionary_size: int = 0
    history: List[IterationRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise AlignmentError(f"Alignment matrix must be square, got shape {self.W.shape}")
        if not np.isfinite(self.W).all():
            raise NumericalError("Alignment matrix contains non-finite entries")
        if self.status not in STATUSES:
            raise ConfigurationError(f"Unknown alignment status {self.status!r}")

    @classmethod
    def identity(cls, dim: int, normalization: str = "unit", method: str = "identity") -> "AlignmentMatrix":
        return cls(W=np.eye(dim), orthogonal=True, residual=None, method=method, normalization=normalization)

    @property
    def dim(self) -> int:
        return int(self.W.shape[0])

    def orthogonality_error(self) -> float:
        return float(np.linalg.norm(self.W.T @ self.W - np.eye(self.dim)))

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Map one vector or a row-per-word matrix into the target space."""

        return np.asarray(vectors, dtype=np.float64) @ self.W.T

    def metadata(self) -> Dict[str, object]:
        return {
            "dim": self.dim,
            "orthogonal": self.orthogonal,
            "residual": self.residual,
            "iterations_used": self.iterations_used,
            "ambiguous": self.ambiguous,
            "status": self.status,
            "converged": self.converged,
            "method": self.method,
            "normalization": self.normalization,
            "dictionary_size": self.dictionary_size,
            "history": [record.to_dict() for record in self.history],
        }

    @classmethod
    def from_metadata(cls, W: np.ndarray, metadata: Dict[str, object]) -> "AlignmentMatrix":
        history = [IterationRecord(**record) for record in metadata.get("history", [])]  # type: ignore[arg-type]
        known = {
            key: metadata[key]
            for key in (
                "orthogonal",
                "residual",
                "iterations_used",
                "ambiguous",
                "status",
                "converged",
                "method",
                "normalization",
                "dictionary_size",
            )
            if key in metadata
        }
        return cls(W=W, history=history, **known)  # type: ignore[arg-type]


def _check_pair(X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or X.shape != Y.shape:
        raise AlignmentError(f"Anchor matrices must share a d x k shape, got {X.shape} and {Y.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise AlignmentError("Need at least one anchor and one dimension")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise AlignmentError("Anchor matrices contain non-finite values")
    return X, Y


def _is_ambiguous(singular_values: np.ndarray) -> bool:
    # zero or repeated singular values leave the optimum non-unique
    scale = float(singular_values[0]) if singular_values.size else 0.0
    if scale == 0.0:
        return True
    tolerance = _SINGULAR_RTOL * scale
    if np.any(singular_values <= tolerance):
        return True
    return bool(np.any(np.abs(np.diff(singular_values)) <= tolerance))


def procrustes(X: np.ndarray, Y: np.ndarray) -> AlignmentMatrix:
    """Orthogonal ``W`` minimising ``||W X - Y||_F`` for d x k anchor columns."""

    X, Y = _check_pair(X, Y)
    # orthogonal_procrustes solves min ||A R - B|| with A = Xᵀ, B = Yᵀ, so W = Rᵀ
    rotation, _ = linalg.orthogonal_procrustes(X.T, Y.T)
    W = rotation.T
    ambiguous = _is_ambiguous(linalg.svdvals(Y @ X.T))
    if np.linalg.norm(W.T @ W - np.eye(W.shape[0])) > ORTHOGONALITY_TOLERANCE:
        W, _ = linalg.polar(W)
        if np.linalg.norm(W.T @ W - np.eye(W.shape[0])) > ORTHOGONALITY_TOLERANCE:
            raise NumericalError("Procrustes solution failed the orthogonality check")
    residual = float(np.linalg.norm(W @ X - Y))
    if ambiguous:
        logger.warning(
            "procrustes optimum is not unique", extra={"payload": {"anchors": X.shape[1], "dim": X.shape[0]}}
        )
    return AlignmentMatrix(W=W, orthogonal=True, residual=residual, ambiguous=ambiguous, method="procrustes")


def least_squares(X: np.ndarray, Y: np.ndarray) -> AlignmentMatrix:
    """Unconstrained ``W = Y X⁺``."""

    X, Y = _check_pair(X, Y)
    solution, _, rank, _ = linalg.lstsq(X.T, Y.T)
    W = solution.T
    return AlignmentMatrix(
        W=W,
        orthogonal=False,
        residual=float(np.linalg.norm(W @ X - Y)),
        ambiguous=bool(rank < X.shape[0]),
        method="least-squares",
    )


def extract_anchors(src: EmbeddingSpace, tgt: EmbeddingSpace, max_pairs: Optional[int] = None) -> AnchorDictionary:
    """Identical strings present in both vocabularies, most frequent first."""

    shared = [word for word in src.words if word in tgt]
    shared.sort(key=lambda word: (-src.vocab.count(word), word))
    if max_pairs is not None and max_pairs > 0:
        shared = shared[:max_pairs]
    anchors = AnchorDictionary([(word, word) for word in shared], provenance="identical-strings")
    if not anchors:
        logger.warning("no identical strings shared by the two vocabularies", extra={"payload": {"anchors": 0}})
    else:
        logger.info("extracted anchors", extra={"payload": {"anchors": len(anchors)}})
    return anchors


def _anchor_matrices(
    src: EmbeddingSpace, tgt: EmbeddingSpace, anchors: AnchorDictionary
) -> Tuple[np.ndarray, np.ndarray]:
    if not anchors:
        raise AlignmentError("No anchors: cannot align without at least one anchor pair")
    sources, targets, missing = [], [], []
    for source, target in anchors:
        source_vector = word_vector(src, source)
        target_vector = word_vector(tgt, target)
        if source_vector is None:
            missing.append(source)
        if target_vector is None:
            missing.append(target)
        if source_vector is not None and target_vector is not None:
            sources.append(source_vector)
            targets.append(target_vector)
    if missing:
        preview = ", ".join(repr(word) for word in missing[:5])
        raise AlignmentError(f"{len(missing)} anchor words are absent from their space (e.g. {preview})")
    if src.dim != tgt.dim:
        raise AlignmentError(f"Source dimension {src.dim} differs from target dimension {tgt.dim}")
    return np.stack(sources, axis=1), np.stack(targets, axis=1)


def _solve(src_n: EmbeddingSpace, tgt_n: EmbeddingSpace, anchors: AnchorDictionary, orthogonal: bool) -> AlignmentMatrix:
    X, Y = _anchor_matrices(src_n, tgt_n, anchors)
    return procrustes(X, Y) if orthogonal else least_squares(X, Y)


def align_with_anchors(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    anchors: AnchorDictionary,
    normalize: str = "unit",
    orthogonal: bool = True,
) -> AlignmentMatrix:
    """Normalise both spaces, stack anchor vectors as columns and solve."""

    result = _solve(src.normalized(normalize), tgt.normalized(normalize), anchors, orthogonal)
    return replace(
        result,
        normalization=normalize,
        iterations_used=1,
        dictionary_size=len(anchors),
        history=[IterationRecord(1, len(anchors), float(result.residual))],
    )


@dataclass
class CSLSMatches:
    """Forward best target per source and backward best source per target."""

    forward: np.ndarray
    forward_scores: np.ndarray
    backward: np.ndarray


def csls_matches(mapped: np.ndarray, targets: np.ndarray, csls_k: int = DEFAULT_CSLS_K) -> CSLSMatches:
    """Best CSLS matches in both directions, computed in row chunks.

    Ties go to the lower index, i.e. the more frequent word.
    """

    k = min(csls_k, len(targets), len(mapped))
    if k < csls_k:
        logger.warning("csls neighbourhood clamped", extra={"payload": {"requested": csls_k, "used": k}})
    index = CSLSIndex(targets, mapped, k)
    forward = np.empty(len(mapped), dtype=np.int64)
    forward_scores = np.empty(len(mapped), dtype=np.float64)
    backward = np.zeros(len(index.candidates), dtype=np.int64)
    backward_best = np.full(len(index.candidates), -np.inf)
    for start in range(0, len(mapped), _CHUNK):
        scores = index.scores(mapped[start:start + _CHUNK])
        forward[start:start + _CHUNK] = scores.argmax(axis=1)
        forward_scores[start:start + _CHUNK] = scores.max(axis=1)
        chunk_best = scores.max(axis=0)
        better = chunk_best > backward_best
        backward_best[better] = chunk_best[better]
        backward[better] = scores.argmax(axis=0)[better] + start
    return CSLSMatches(forward=forward, forward_scores=forward_scores, backward=backward)


def _induce(
    W: AlignmentMatrix,
    src_n: EmbeddingSpace,
    tgt_n: EmbeddingSpace,
    vocab_cap: int,
    csls_k: int,
    mutual: bool,
) -> AnchorDictionary:
    mapped = W.apply(src_n.matrix()[:vocab_cap])
    targets = tgt_n.matrix()[:vocab_cap]
    matches = csls_matches(mapped, targets, csls_k)
    source_words = src_n.words
    target_words = tgt_n.words
    pairs = [
        (source_words[i], target_words[j])
        for i, j in enumerate(matches.forward.tolist())
        if not mutual or matches.backward[j] == i
    ]
    return AnchorDictionary(pairs, provenance="refined")


def build_dictionary_csls(
    W: AlignmentMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    vocab_cap: int = DEFAULT_VOCAB_CAP,
    mutual: bool = True,
    csls_k: int = DEFAULT_CSLS_K,
) -> AnchorDictionary:
    """Dictionary of CSLS nearest neighbours over the most frequent words."""

    if vocab_cap < 1:
        raise ConfigurationError("vocab_cap must be positive")
    policy = W.normalization
    dictionary = _induce(W, src.normalized(policy), tgt.normalized(policy), vocab_cap, csls_k, mutual)
    if not dictionary:
        logger.warning("induced dictionary is empty", extra={"payload": {"dictionary_size": 0}})
    return dictionary


def iterative_procrustes(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    seed_dict: AnchorDictionary,
    iterations: int = DEFAULT_REFINE_ITERATIONS,
    vocab_cap: int = DEFAULT_VOCAB_CAP,
    *,
    csls_k: int = DEFAULT_CSLS_K,
    normalize: str = "unit",
    mutual: bool = True,
) -> AlignmentMatrix:
    """Alternate Procrustes and CSLS dictionary induction.

    Stops early once the induced dictionary equals the current one. If a
    dictionary ever comes back empty the last map is returned with status
    ``degraded``.
    """

    if iterations < 1:
        raise ConfigurationError(f"iterations must be at least 1, got {iterations}")
    if not seed_dict:
        raise AlignmentError("No anchors: iterative Procrustes needs a non-empty seed dictionary")
    src_n = src.normalized(normalize)
    tgt_n = tgt.normalized(normalize)

    current = seed_dict
    W = _solve(src_n, tgt_n, current, orthogonal=True)
    history = [IterationRecord(1, len(current), float(W.residual))]
    logger.info("refinement iteration", extra={"payload": history[-1].to_dict()})
    status = "ok"
    converged = False
    for iteration in range(2, iterations + 1):
        candidate = _induce(replace(W, normalization=normalize), src_n, tgt_n, vocab_cap, csls_k, mutual)
        if not candidate:
            status = "degraded"
            logger.warning("dictionary collapsed", extra={"payload": {"iteration": iteration, "dictionary_size": 0}})
            break
        if set(candidate.pairs) == set(current.pairs):
            converged = True
            break
        current = candidate
        W = _solve(src_n, tgt_n, current, orthogonal=True)
        history.append(IterationRecord(iteration, len(current), float(W.residual)))
        logger.info("refinement iteration", extra={"payload": history[-1].to_dict()})
    else:
        # one more induction tells us whether the last solve was a fixed point
        if iterations > 1:
            final = _induce(replace(W, normalization=normalize), src_n, tgt_n, vocab_cap, csls_k, mutual)
            converged = set(final.pairs) == set(current.pairs)

    return replace(
        W,
        normalization=normalize,
        iterations_used=len(history),
        status=status,
        converged=converged,
        method="procrustes-refined",
        dictionary_size=len(current),
        history=history,
    )


def refine_from_mapping(
    W: AlignmentMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    iterations: int = DEFAULT_REFINE_ITERATIONS,
    vocab_cap: int = DEFAULT_VOCAB_CAP,
    csls_k: int = DEFAULT_CSLS_K,
) -> AlignmentMatrix:
    """Seed iterative Procrustes with the mutual CSLS dictionary of ``W``."""

    seed = build_dictionary_csls(W, src, tgt, vocab_cap=vocab_cap, mutual=True, csls_k=csls_k)
    if not seed:
        return replace(W, status="unrefined")
    return iterative_procrustes(
        src, tgt, seed, iterations, vocab_cap, csls_k=csls_k, normalize=W.normalization
    )


class Translator:
    """Retrieve target words for mapped source words.

    The normalised target matrix and, for CSLS, the candidate radii over the
    mapped capped source vocabulary are computed once and shared by every
    query.
    """

    def __init__(
        self,
        alignment: AlignmentMatrix,
        src: EmbeddingSpace,
        tgt: EmbeddingSpace,
        metric: str = "csls",
        csls_k: int = DEFAULT_CSLS_K,
        vocab_cap: int = DEFAULT_VOCAB_CAP,
    ) -> None:
        if src.dim != alignment.dim or tgt.dim != alignment.dim:
            raise AlignmentError(
                f"Map dimension {alignment.dim} does not match spaces ({src.dim}, {tgt.dim})"
            )
        if metric not in METRICS:
            raise ConfigurationError(f"Unknown metric {metric!r}; choose from {', '.join(METRICS)}")
        self.alignment = alignment
        self.metric = metric
        policy = alignment.normalization
        self.src = src.normalized(policy)
        self.tgt = tgt.normalized(policy)
        self.target_words = self.tgt.words
        self.index: Optional[CSLSIndex] = None
        if metric == "csls":
            sources = alignment.apply(self.src.matrix()[:vocab_cap])
            k = min(csls_k, len(self.target_words), len(sources))
            if k < csls_k:
                logger.warning("csls neighbourhood clamped", extra={"payload": {"requested": csls_k, "used": k}})
            self.index = CSLSIndex(self.tgt.matrix(), sources, k)
            self.targets = self.index.candidates
        else:
            self.targets = normalize_rows(self.tgt.matrix())

    def map_word(self, word: str) -> Optional[np.ndarray]:
        vector = word_vector(self.src, word)
        return None if vector is None else self.alignment.apply(vector)

    def query_vector(self, vector: np.ndarray, k: int = 10, label: str = "") -> NeighborResult:
        if k < 1:
            raise ConfigurationError(f"k must be at least 1, got {k}")
        scores = score_candidates(vector, self.targets, self.metric, self.index)
        return NeighborResult(
            query=label,
            neighbors=rank_candidates(scores, self.target_words, k),
            metric=self.metric,
            k=k,
            truncated=k > len(self.target_words),
        )

    def translate(self, word: str, k: int = 10) -> Optional[NeighborResult]:
        mapped = self.map_word(word)
        if mapped is None:
            return None
        if not np.any(mapped):
            logger.warning("query vector is degenerate", extra={"payload": {"query": word}})
            return None
        return self.query_vector(mapped, k, label=word)


def translate(
    W: AlignmentMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    query_word: str,
    k: int = 10,
    metric: str = "csls",
    *,
    csls_k: int = DEFAULT_CSLS_K,
    vocab_cap: int = DEFAULT_VOCAB_CAP,
) -> Optional[NeighborResult]:
    """Top-``k`` target words for one source word; ``None`` when unresolvable."""

    return Translator(W, src, tgt, metric, csls_k, vocab_cap).translate(query_word, k)
