"""Precision@k scoring, neighbour tables and PCA coordinates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.decomposition import PCA

from .alignment import DEFAULT_VOCAB_CAP, AlignmentMatrix, Translator
from .embeddings import EmbeddingSpace
from .errors import EvaluationError, GoldFormatError
from .metrics import DEFAULT_CSLS_K

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 5, 10)
OOV_MARKER = "(oov)"


@dataclass
class GoldDictionary:
    """Source terms with one or more acceptable target terms each."""

    pairs: List[Tuple[str, FrozenSet[str]]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen = set()
        for source, targets in self.pairs:
            if not source:
                raise GoldFormatError("Gold source terms must be non-empty")
            if not targets or any(not target for target in targets):
                raise GoldFormatError(f"Gold entry {source!r} needs at least one non-empty target")
            if source in seen:
                raise GoldFormatError(f"Duplicate gold source term {source!r}")
            seen.add(source)

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, str]]) -> "GoldDictionary":
        grouped: Dict[str, set] = {}
        for source, target in pairs:
            grouped.setdefault(source, set()).add(target)
        return cls([(source, frozenset(targets)) for source, targets in grouped.items()])

    @classmethod
    def parse(cls, text: str, normalizer: Optional[Callable[[str], str]] = None, origin: str = "<gold>") -> "GoldDictionary":
        """Parse ``source<TAB>target1|target2`` lines; ``#`` starts a comment."""

        normalize = normalizer or (lambda term: term.strip())
        grouped: Dict[str, set] = {}
        order: List[str] = []
        for line_number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "\t" not in line:
                raise GoldFormatError(f"{origin}:{line_number}: expected 'source<TAB>target[|target...]'")
            source, _, rest = line.partition("\t")
            targets = [normalize(term) for term in rest.split("|") if term.strip()]
            source = normalize(source)
            if not source or not targets or any(not term for term in targets):
                raise GoldFormatError(f"{origin}:{line_number}: empty source or target term")
            if source not in grouped:
                grouped[source] = set()
                order.append(source)
            elif normalizer is not None:
                logger.warning(
                    "gold terms merged after normalisation",
                    extra={"payload": {"source": source, "line": line_number}},
                )
            else:
                raise GoldFormatError(f"{origin}:{line_number}: duplicate source term {source!r}")
            grouped[source].update(targets)
        return cls([(source, frozenset(grouped[source])) for source in order])

    @classmethod
    def from_tsv(cls, path: Path | str, normalizer: Optional[Callable[[str], str]] = None) -> "GoldDictionary":
        path = Path(path)
        if not path.exists():
            raise GoldFormatError(f"Gold dictionary does not exist: {path}")
        try:
            text = path.read_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GoldFormatError(f"{path} is not valid UTF-8: {exc}") from exc
        return cls.parse(text, normalizer, origin=str(path))

    def to_tsv(self) -> str:
        return "".join(f"{source}\t{'|'.join(sorted(targets))}\n" for source, targets in self.pairs)


@dataclass
class QueryResult:
    source: str
    retrieved: List[Tuple[str, float]]
    hit_rank: Optional[int]

    def to_dict(self) -> Dict[str, object]:
        return {
            "source": self.source,
            "retrieved": [[word, score] for word, score in self.retrieved],
            "hit_rank": self.hit_rank,
        }


@dataclass
class EvalReport:
    """Precision@k over evaluated queries, and over the whole gold list."""

    precision_at: Dict[int, float]
    precision_at_all: Dict[int, float]
    per_query: List[QueryResult]
    skipped: List[str]
    metric: str = "csls"
    config: Dict[str, object] = field(default_factory=dict)

    @property
    def evaluated(self) -> int:
        return len(self.per_query)

    def summary_line(self) -> str:
        return " ".join(f"P@{k} {value:.3f}" for k, value in sorted(self.precision_at.items()))

    def to_dict(self) -> Dict[str, object]:
        return {
            "precision_at": {str(k): v for k, v in sorted(self.precision_at.items())},
            "precision_at_all": {str(k): v for k, v in sorted(self.precision_at_all.items())},
            "evaluated": self.evaluated,
            "skipped": list(self.skipped),
            "metric": self.metric,
            "per_query": [query.to_dict() for query in self.per_query],
            "config": self.config,
        }


def _validate_ks(ks: Sequence[int]) -> List[int]:
    if not ks:
        raise EvaluationError("At least one k is required")
    if any(int(k) < 1 for k in ks):
        raise EvaluationError(f"Every k must be at least 1, got {list(ks)}")
    return sorted({int(k) for k in ks})


def precision_at_k(
    W: AlignmentMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    gold: GoldDictionary,
    ks: Sequence[int] = DEFAULT_KS,
    metric: str = "csls",
    *,
    csls_k: int = DEFAULT_CSLS_K,
    vocab_cap: int = DEFAULT_VOCAB_CAP,
    config: Optional[Mapping[str, object]] = None,
) -> EvalReport:
    """Hit rate of acceptable targets among the top-k retrieved words."""

    if not len(gold):
        raise EvaluationError("Gold dictionary is empty")
    ks = _validate_ks(ks)
    depth = max(ks)
    translator = Translator(W, src, tgt, metric=metric, csls_k=csls_k, vocab_cap=vocab_cap)

    per_query: List[QueryResult] = []
    skipped: List[str] = []
    for source, targets in gold.pairs:
        result = translator.translate(source, depth)
        if result is None:
            skipped.append(source)
            continue
        hit_rank = next((rank for rank, word in enumerate(result.words, start=1) if word in targets), None)
        per_query.append(QueryResult(source=source, retrieved=result.neighbors, hit_rank=hit_rank))

    def hits(k: int) -> int:
        return sum(1 for query in per_query if query.hit_rank is not None and query.hit_rank <= k)

    evaluated = len(per_query)
    report = EvalReport(
        precision_at={k: hits(k) / evaluated if evaluated else 0.0 for k in ks},
        precision_at_all={k: hits(k) / len(gold) for k in ks},
        per_query=per_query,
        skipped=skipped,
        metric=metric,
        config=dict(config or {}),
    )
    logger.info(
        "evaluation finished",
        extra={
            "payload": {
                "evaluated": evaluated,
                "skipped": len(skipped),
                "precision_at": {str(k): v for k, v in report.precision_at.items()},
            }
        },
    )
    return report


@dataclass
class NeighborColumn:
    query: str
    neighbors: Optional[List[Tuple[str, float]]]


@dataclass
class NeighborTable:
    columns: List[NeighborColumn]
    k: int

    def _cells(self) -> List[List[str]]:
        rows: List[List[str]] = []
        for rank in range(self.k):
            row = []
            for column in self.columns:
                if column.neighbors is None:
                    row.append(OOV_MARKER if rank == 0 else "")
                elif rank < len(column.neighbors):
                    row.append(column.neighbors[rank][0])
                else:
                    row.append("")
            rows.append(row)
        return rows

    def render(self) -> str:
        """Aligned plain text, one column per query."""

        if not self.columns:
            return ""
        header = [column.query for column in self.columns]
        rows = self._cells()
        widths = [max(len(cell) for cell in [header[i]] + [row[i] for row in rows]) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() for line in [header] + rows]
        lines.insert(1, "  ".join("-" * width for width in widths))
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        if not self.columns:
            return ""
        lines = ["\t".join(column.query for column in self.columns)]
        lines.extend("\t".join(row) for row in self._cells())
        return "\n".join(lines) + "\n"


def neighbor_table(
    W: AlignmentMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    query_terms: Sequence[str],
    k: int = 10,
    metric: str = "csls",
    *,
    csls_k: int = DEFAULT_CSLS_K,
    vocab_cap: int = DEFAULT_VOCAB_CAP,
) -> NeighborTable:
    """Top-``k`` target words for each query; unresolvable queries get a marker."""

    if not query_terms:
        return NeighborTable(columns=[], k=k)
    translator = Translator(W, src, tgt, metric=metric, csls_k=csls_k, vocab_cap=vocab_cap)
    columns = []
    for term in query_terms:
        result = translator.translate(term, k)
        if result is None:
            logger.warning("query is out of vocabulary", extra={"payload": {"query": term}})
        columns.append(NeighborColumn(query=term, neighbors=None if result is None else result.neighbors))
    return NeighborTable(columns=columns, k=k)


@dataclass
class PCAProjection:
    labels: List[str]
    words: List[str]
    points: np.ndarray
    explained_variance: np.ndarray
    components: np.ndarray

    def to_tsv(self) -> str:
        axes = ["x", "y", "z"][: self.points.shape[1]] if self.points.shape[1] <= 3 else [
            f"pc{i + 1}" for i in range(self.points.shape[1])
        ]
        lines = ["\t".join(["label", "word", *axes])]
        for label, word, point in zip(self.labels, self.words, self.points):
            lines.append("\t".join([label, word, *(repr(float(value)) for value in point)]))
        return "\n".join(lines) + "\n"


def pca_project(
    point_sets: Mapping[str, Sequence[Tuple[str, np.ndarray]]], out_dims: int = 2
) -> PCAProjection:
    """Project labelled vectors onto the top principal axes of the pooled set.

    Each axis is signed so that its largest-magnitude loading is positive.
    """

    labels: List[str] = []
    words: List[str] = []
    rows: List[np.ndarray] = []
    for label, members in point_sets.items():
        for word, vector in members:
            labels.append(label)
            words.append(word)
            rows.append(np.asarray(vector, dtype=np.float64))
    if not rows:
        raise EvaluationError("No points to project")
    data = np.vstack(rows)
    if out_dims < 1 or len(data) < out_dims or out_dims > data.shape[1]:
        raise EvaluationError(
            f"Cannot project {len(data)} points of dimension {data.shape[1]} onto {out_dims} components"
        )
    if np.ptp(data, axis=0).max() == 0:
        raise EvaluationError("All points are identical; principal axes are undefined")

    pca = PCA(n_components=out_dims, svd_solver="full")
    points = pca.fit_transform(data)
    components = pca.components_.copy()
    for axis in range(out_dims):
        pivot = int(np.argmax(np.abs(components[axis])))
        if components[axis, pivot] < 0:
            components[axis] *= -1
            points[:, axis] *= -1
    return PCAProjection(
        labels=labels,
        words=words,
        points=points,
        explained_variance=pca.explained_variance_.copy(),
        components=components,
    )
