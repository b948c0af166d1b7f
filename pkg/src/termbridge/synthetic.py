"""Embedding pairs with a planted orthogonal map, for checking alignment."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy.stats import ortho_group

from .alignment import AlignmentMatrix
from .embeddings import EmbeddingSpace, Vocabulary
from .errors import ConfigurationError
from .evaluation import GoldDictionary
from .storage import save_alignment, write_text
from .vector_io import save_vectors


@dataclass
class SyntheticPair:
    src: EmbeddingSpace
    tgt: EmbeddingSpace
    true_map: np.ndarray
    gold: GoldDictionary
    noise_sigma: float
    anchor_fraction: float
    anchor_words: List[str]
    seed: Optional[int] = None

    def held_out_gold(self) -> GoldDictionary:
        """Gold pairs whose source word is not an identical-string anchor."""

        anchors = set(self.anchor_words)
        return GoldDictionary([(source, targets) for source, targets in self.gold.pairs if source not in anchors])


def _source_vectors(rng: np.random.Generator, n_words: int, dim: int, clusters: int) -> np.ndarray:
    if clusters <= 0:
        vectors = rng.standard_normal((n_words, dim))
    else:
        # uneven mixture: cluster weights decay so the density has no rotational symmetry
        centers = rng.standard_normal((clusters, dim)) * 2.0
        weights = 1.0 / np.arange(1, clusters + 1)
        assignment = rng.choice(clusters, size=n_words, p=weights / weights.sum())
        scales = rng.uniform(0.3, 1.0, size=clusters)
        vectors = centers[assignment] + rng.standard_normal((n_words, dim)) * scales[assignment, None]
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def make_rotation_pair(
    n_words: int = 1000,
    d: int = 50,
    noise_sigma: float = 0.0,
    anchor_fraction: float = 0.2,
    seed: Optional[int] = 0,
    *,
    frequency_weighted: bool = False,
    clusters: int = 0,
) -> SyntheticPair:
    """Source of unit vectors, target = source rotated by a random ``Q`` plus noise.

    A random ``anchor_fraction`` of the words share their string across the
    two vocabularies (``w00042``); the rest are renamed ``p00042`` in the
    source and ``c00042`` in the target. Word ``i`` of the source corresponds
    to word ``i`` of the target.
    """

    if not n_words > d >= 2:
        raise ConfigurationError(f"Need n_words > d >= 2, got n_words={n_words}, d={d}")
    if not 0.0 <= anchor_fraction <= 1.0:
        raise ConfigurationError(f"anchor_fraction must be in [0, 1], got {anchor_fraction}")
    if noise_sigma < 0:
        raise ConfigurationError("noise_sigma cannot be negative")

    rng = np.random.default_rng(seed)
    source = _source_vectors(rng, n_words, d, clusters)
    true_map = ortho_group.rvs(dim=d, random_state=rng)
    target = source @ true_map.T
    if noise_sigma > 0:
        target = target + rng.normal(0.0, noise_sigma, size=target.shape)

    anchor_count = int(round(anchor_fraction * n_words))
    anchor_ids = set(rng.permutation(n_words)[:anchor_count].tolist())
    width = max(5, len(str(n_words - 1)))
    src_words = [f"w{i:0{width}d}" if i in anchor_ids else f"p{i:0{width}d}" for i in range(n_words)]
    tgt_words = [f"w{i:0{width}d}" if i in anchor_ids else f"c{i:0{width}d}" for i in range(n_words)]

    src_counts: Dict[str, int] = {}
    tgt_counts: Dict[str, int] = {}
    if frequency_weighted:
        # Zipf counts in vocabulary order
        counts = np.maximum(1, np.round(10 * n_words / np.arange(1, n_words + 1))).astype(int)
        src_counts = dict(zip(src_words, counts.tolist()))
        tgt_counts = dict(zip(tgt_words, counts.tolist()))

    gold = GoldDictionary([(s, frozenset([t])) for s, t in zip(src_words, tgt_words)])
    return SyntheticPair(
        src=EmbeddingSpace(vocab=Vocabulary.from_words(src_words, src_counts), vectors=source),
        tgt=EmbeddingSpace(vocab=Vocabulary.from_words(tgt_words, tgt_counts), vectors=target),
        true_map=true_map,
        gold=gold,
        noise_sigma=noise_sigma,
        anchor_fraction=anchor_fraction,
        anchor_words=[src_words[i] for i in sorted(anchor_ids)],
        seed=seed,
    )


def write_pair(pair: SyntheticPair, directory: Path | str, run_config: Optional[Dict[str, object]] = None) -> Dict[str, Path]:
    """Write ``src.vec``, ``tgt.vec``, ``gold.tsv`` and ``true_map.txt``."""

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config = dict(run_config or {})
    config.setdefault("seed", pair.seed)
    config.setdefault("noise_sigma", pair.noise_sigma)
    config.setdefault("anchor_fraction", pair.anchor_fraction)
    paths = {
        "src": directory / "src.vec",
        "tgt": directory / "tgt.vec",
        "gold": directory / "gold.tsv",
        "true_map": directory / "true_map.txt",
    }
    save_vectors(pair.src, paths["src"], run_config=config)
    save_vectors(pair.tgt, paths["tgt"], run_config=config)
    write_text(paths["gold"], pair.gold.to_tsv(), config)
    true_map = AlignmentMatrix(W=pair.true_map, orthogonal=True, method="planted", normalization="raw")
    save_alignment(true_map, paths["true_map"], config)
    return paths
