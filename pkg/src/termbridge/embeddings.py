"""Vocabulary and embedding-space types.

An :class:`EmbeddingSpace` stores one row per vocabulary word and, in subword
mode, a table of hashed character n-gram buckets. The vector reported for a
word is its own row plus the rows of its n-gram buckets; out-of-vocabulary
words in subword mode are represented by their n-gram rows alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence

import numpy as np

from .corpus import TokenizedCorpus
from .errors import ConfigurationError, NumericalError, VocabularyError

MODES = ("word", "subword")
NORMALIZATION_POLICIES = ("unit", "center_unit", "raw")

FNV_OFFSET_BASIS = 2166136261
FNV_PRIME = 16777619


@dataclass
class Vocabulary:
    """Ordered word list with optional corpus counts."""

    words: List[str]
    counts: Dict[str, int] = field(default_factory=dict)
    total_tokens: int = 0
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.words = list(self.words)
        self.index = {word: position for position, word in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise VocabularyError("Vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def __iter__(self) -> Iterator[str]:
        return iter(self.words)

    def count(self, word: str) -> int:
        return self.counts.get(word, 0)

    @classmethod
    def from_words(cls, words: Iterable[str], counts: Optional[Mapping[str, int]] = None) -> "Vocabulary":
        """Keep ``words`` in the given order (loaded or synthetic spaces)."""

        counts = dict(counts or {})
        return cls(words=list(words), counts=counts, total_tokens=sum(counts.values()))


def build_vocab(corpus: TokenizedCorpus, min_count: int = 3) -> Vocabulary:
    """Keep words seen more than ``min_count`` times, most frequent first."""

    if not corpus.sentences:
        raise VocabularyError("Cannot build a vocabulary from an empty corpus")
    kept = {word: count for word, count in corpus.token_counts.items() if count > min_count}
    if not kept:
        raise VocabularyError(
            f"No word occurs more than {min_count} times; the corpus is too small for this min_count"
        )
    words = sorted(kept, key=lambda word: (-kept[word], word))
    return Vocabulary(words=words, counts=kept, total_tokens=sum(kept.values()))


def fnv1a_32(text: str) -> int:
    """32-bit FNV-1a over UTF-8 bytes, with fastText's signed-byte widening."""

    value = FNV_OFFSET_BASIS
    for byte in text.encode("utf-8"):
        widened = byte if byte < 128 else (byte - 256) & 0xFFFFFFFF
        value = ((value ^ widened) * FNV_PRIME) & 0xFFFFFFFF
    return value


def subword_ngrams(word: str, n_min: int = 3, n_max: int = 6, include_word: bool = True) -> List[str]:
    """Character n-grams of ``<word>`` for lengths ``n_min..n_max``.

    The wrapped word itself is never emitted as an n-gram; with
    ``include_word`` it is appended last as the word's special token.
    """

    if not 1 <= n_min <= n_max:
        raise ConfigurationError(f"Need 1 <= n_min <= n_max, got {n_min}, {n_max}")
    wrapped = f"<{word}>"
    grams: List[str] = []
    for size in range(n_min, n_max + 1):
        for start in range(len(wrapped) - size + 1):
            gram = wrapped[start:start + size]
            if gram != wrapped:
                grams.append(gram)
    if include_word:
        grams.append(wrapped)
    return grams


@dataclass
class SubwordTable:
    """Hashed n-gram bucket vectors."""

    buckets: np.ndarray
    n_min: int = 3
    n_max: int = 6

    @property
    def bucket_count(self) -> int:
        return int(self.buckets.shape[0])

    def bucket_ids(self, word: str) -> List[int]:
        return [
            fnv1a_32(gram) % self.bucket_count
            for gram in subword_ngrams(word, self.n_min, self.n_max, include_word=False)
        ]


@dataclass(frozen=True)
class Normalization:
    """A fitted normalisation policy (``unit``, ``center_unit`` or ``raw``)."""

    policy: str = "unit"
    mean: Optional[np.ndarray] = None

    @classmethod
    def fit(cls, matrix: np.ndarray, policy: str) -> "Normalization":
        if policy not in NORMALIZATION_POLICIES:
            raise ConfigurationError(
                f"Unknown normalisation {policy!r}; choose from {', '.join(NORMALIZATION_POLICIES)}"
            )
        mean = np.asarray(matrix, dtype=np.float64).mean(axis=0) if policy == "center_unit" else None
        return cls(policy=policy, mean=mean)

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = np.array(values, dtype=np.float64, copy=True)
        if self.policy == "raw":
            return out
        if self.policy == "center_unit" and self.mean is not None:
            out -= self.mean
        norms = np.linalg.norm(out, axis=-1, keepdims=True)
        norms[norms == 0] = 1.0
        return out / norms


@dataclass(frozen=True)
class WordLookup:
    vector: np.ndarray
    in_vocabulary: bool
    degenerate: bool


@dataclass
class EmbeddingSpace:
    """Vocabulary plus one dense vector per word (and per n-gram bucket)."""

    vocab: Vocabulary
    vectors: np.ndarray
    mode: str = "word"
    subwords: Optional[SubwordTable] = None
    normalization: Optional[Normalization] = None
    metadata: Dict[str, object] = field(default_factory=dict)
    _matrix: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)
    _word_buckets: Optional[List[List[int]]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"Unknown embedding mode {self.mode!r}")
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocab):
            raise ConfigurationError(
                f"Vector matrix shape {self.vectors.shape} does not match vocabulary size {len(self.vocab)}"
            )
        if self.vectors.shape[1] <= 0:
            raise ConfigurationError("Embedding dimension must be positive")
        if self.mode == "subword":
            if self.subwords is None:
                raise ConfigurationError("Subword mode requires an n-gram bucket table")
            if self.subwords.buckets.shape[1] != self.vectors.shape[1]:
                raise ConfigurationError("Bucket table dimension differs from word vectors")
        if not np.isfinite(self.vectors).all():
            raise NumericalError("Embedding space contains non-finite values")

    @classmethod
    def from_matrix(
        cls,
        words: Sequence[str],
        matrix: np.ndarray,
        counts: Optional[Mapping[str, int]] = None,
    ) -> "EmbeddingSpace":
        return cls(vocab=Vocabulary.from_words(words, counts), vectors=np.asarray(matrix))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def words(self) -> List[str]:
        return self.vocab.words

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: object) -> bool:
        return word in self.vocab

    def _buckets_for(self, word: str, position: Optional[int]) -> List[int]:
        assert self.subwords is not None
        if position is None:
            return self.subwords.bucket_ids(word)
        if self._word_buckets is None:
            self._word_buckets = [self.subwords.bucket_ids(w) for w in self.vocab.words]
        return self._word_buckets[position]

    def _compose(self, word: str) -> Optional[WordLookup]:
        position = self.vocab.index.get(word)
        if self.mode == "word":
            if position is None:
                return None
            raw = self.vectors[position].copy()
        else:
            bucket_ids = self._buckets_for(word, position)
            if position is None and not bucket_ids:
                return None
            raw = self.vectors[position].copy() if position is not None else np.zeros(self.dim, self.vectors.dtype)
            for bucket in bucket_ids:
                raw += self.subwords.buckets[bucket]
        return WordLookup(vector=raw, in_vocabulary=position is not None, degenerate=not np.any(raw))

    def lookup(self, word: str) -> Optional[WordLookup]:
        """Resolve ``word``; ``None`` when it has no representation."""

        found = self._compose(word)
        if found is None or self.normalization is None:
            return found
        return replace(found, vector=self.normalization.apply(found.vector))

    def raw_matrix(self) -> np.ndarray:
        """Reported vectors of every vocabulary word, before normalisation."""

        if self.mode == "word":
            return self.vectors
        return np.stack([self._compose(word).vector for word in self.vocab.words])

    def matrix(self) -> np.ndarray:
        """Reported (and normalised, if configured) vectors in vocabulary order."""

        if self._matrix is None:
            raw = self.raw_matrix()
            self._matrix = self.normalization.apply(raw) if self.normalization is not None else raw
        return self._matrix

    def normalized(self, policy: str) -> "EmbeddingSpace":
        """A view of this space whose lookups apply ``policy``."""

        fitted = Normalization.fit(self.raw_matrix(), policy)
        view = replace(self, normalization=fitted)
        view._word_buckets = self._word_buckets
        return view


def word_vector(space: EmbeddingSpace, word: str) -> Optional[np.ndarray]:
    """The vector of ``word`` in ``space``, or ``None`` when absent."""

    found = space.lookup(word)
    return None if found is None else found.vector
