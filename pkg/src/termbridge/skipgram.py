"""Skip-gram with negative sampling, word and subword variants."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.special import expit

from .corpus import TokenizedCorpus
from .embeddings import MODES, EmbeddingSpace, SubwordTable, Vocabulary, build_vocab
from .errors import ConfigurationError, CorpusError, TrainingDivergedError

logger = logging.getLogger(__name__)

NOISE_EXPONENT = 0.75


@dataclass
class TrainConfig:
    """Hyperparameters for one skip-gram run."""

    dim: int = 200
    window: int = 5
    min_count: int = 3
    subsample_threshold: float = 1e-5
    negatives: int = 5
    learning_rate: float = 0.05
    epochs: int = 20
    mode: str = "word"
    n_min: int = 3
    n_max: int = 6
    bucket_count: int = 2_000_000
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        problems = []
        if self.dim < 1:
            problems.append("dim must be positive")
        if self.window < 1:
            problems.append("window must be positive")
        if self.min_count < 0:
            problems.append("min_count cannot be negative")
        if self.subsample_threshold < 0:
            problems.append("subsample_threshold cannot be negative")
        if self.negatives < 1:
            problems.append("negatives must be positive")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be positive")
        if self.epochs < 1:
            problems.append("epochs must be positive")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {', '.join(MODES)}")
        if self.mode == "subword":
            if not 1 <= self.n_min <= self.n_max:
                problems.append("need 1 <= n_min <= n_max")
            if self.bucket_count < 1:
                problems.append("bucket_count must be positive")
        if self.workers < 1:
            problems.append("workers must be positive")
        if problems:
            raise ConfigurationError("Invalid training configuration: " + "; ".join(problems))

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "TrainConfig":
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        return cls(**known)  # type: ignore[arg-type]


def sgns_pair_loss_and_grad(
    center: np.ndarray, outputs: np.ndarray, labels: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Negative-sampling loss for one centre vector against target rows.

    ``outputs`` holds one output vector per target (positive first by
    convention) and ``labels`` is 1 for positives, 0 for noise words. Returns
    the loss with the gradients for ``center`` and each output row.
    """

    scores = outputs @ center
    # -log sigmoid(s) for positives, -log sigmoid(-s) for negatives
    signs = np.where(labels > 0, 1.0, -1.0)
    loss = float(np.logaddexp(0.0, -signs * scores).sum())
    delta = expit(scores) - labels
    return loss, delta @ outputs, np.outer(delta, center)


def _uniform_float32(rng: np.random.Generator, shape: Tuple[int, int], bound: float) -> np.ndarray:
    """Uniform values in ``[-bound, bound)`` drawn straight into float32."""

    values = rng.random(shape, dtype=np.float32)
    values *= 2 * bound
    values -= bound
    return values


@dataclass
class _Model:
    inputs: np.ndarray
    outputs: np.ndarray
    buckets: Optional[np.ndarray]
    input_buckets: Optional[List[List[int]]]


class SkipGramTrainer:
    """Train an :class:`EmbeddingSpace` from a :class:`TokenizedCorpus`.

    With ``workers == 1`` a run is fully determined by ``config.seed``. More
    workers train sentence shards concurrently on shared parameters and are
    not bit-reproducible.
    """

    def __init__(self, config: Optional[TrainConfig] = None) -> None:
        self.config = config or TrainConfig()
        self.config.validate()
        self.history: List[Dict[str, float]] = []

    def train(self, corpus: TokenizedCorpus) -> EmbeddingSpace:
        config = self.config
        vocab = build_vocab(corpus, config.min_count)
        encoded = self._encode(corpus, vocab)
        in_vocab_tokens = sum(len(sentence) for sentence in encoded)
        if in_vocab_tokens < config.window + 1:
            raise CorpusError(
                f"Corpus has {in_vocab_tokens} in-vocabulary tokens, shorter than one window of {config.window}"
            )
        if not any(len(sentence) >= 2 for sentence in encoded):
            raise CorpusError("No sentence has two in-vocabulary tokens; nothing to train on")

        rng = np.random.default_rng(config.seed)
        model = self._initialise(vocab, rng)
        noise_table = self._noise_table(vocab)
        keep = self._keep_probabilities(vocab)

        self.history = []
        for epoch in range(1, config.epochs + 1):
            if config.workers == 1:
                loss_sum, examples = self._train_shard(encoded, model, noise_table, keep, rng)
            else:
                loss_sum, examples = self._train_parallel(encoded, model, noise_table, keep, epoch)
            mean_loss = loss_sum / examples if examples else 0.0
            if not math.isfinite(mean_loss) or not np.isfinite(model.inputs).all():
                raise TrainingDivergedError(
                    f"Training diverged in epoch {epoch} (mean loss {mean_loss}); "
                    f"try a smaller learning rate than {config.learning_rate}"
                )
            record = {
                "epoch": epoch,
                "examples": examples,
                "mean_loss": mean_loss,
                "learning_rate": config.learning_rate,
            }
            self.history.append(record)
            logger.info("skip-gram epoch", extra={"payload": record})

        subwords = None
        if config.mode == "subword":
            subwords = SubwordTable(model.buckets, config.n_min, config.n_max)
        return EmbeddingSpace(
            vocab=vocab,
            vectors=model.inputs,
            mode=config.mode,
            subwords=subwords,
            metadata={"train_config": config.to_dict(), "history": list(self.history)},
        )

    @staticmethod
    def _encode(corpus: TokenizedCorpus, vocab: Vocabulary) -> List[np.ndarray]:
        index = vocab.index
        encoded = []
        for sentence in corpus.sentences:
            ids = [index[token] for token in sentence if token in index]
            if ids:
                encoded.append(np.asarray(ids, dtype=np.int64))
        return encoded

    def _initialise(self, vocab: Vocabulary, rng: np.random.Generator) -> _Model:
        config = self.config
        bound = 0.5 / config.dim
        inputs = _uniform_float32(rng, (len(vocab), config.dim), bound)
        outputs = np.zeros((len(vocab), config.dim), dtype=np.float32)
        buckets = None
        input_buckets = None
        if config.mode == "subword":
            buckets = _uniform_float32(rng, (config.bucket_count, config.dim), bound)
            table = SubwordTable(buckets, config.n_min, config.n_max)
            input_buckets = [table.bucket_ids(word) for word in vocab.words]
        return _Model(inputs, outputs, buckets, input_buckets)

    @staticmethod
    def _noise_table(vocab: Vocabulary) -> np.ndarray:
        weights = np.array([vocab.count(word) for word in vocab.words], dtype=np.float64) ** NOISE_EXPONENT
        cumulative = np.cumsum(weights / weights.sum())
        cumulative[-1] = 1.0
        return cumulative

    def _keep_probabilities(self, vocab: Vocabulary) -> Optional[np.ndarray]:
        threshold = self.config.subsample_threshold
        if threshold == 0:
            return None
        counts = np.array([vocab.count(word) for word in vocab.words], dtype=np.float64)
        scaled = threshold * vocab.total_tokens
        return np.minimum(1.0, (np.sqrt(counts / scaled) + 1.0) * scaled / counts)

    def _train_shard(
        self,
        sentences: List[np.ndarray],
        model: _Model,
        noise_table: np.ndarray,
        keep: Optional[np.ndarray],
        rng: np.random.Generator,
    ) -> Tuple[float, int]:
        config = self.config
        lr = config.learning_rate
        loss_sum = 0.0
        examples = 0
        labels = np.zeros(config.negatives + 1, dtype=np.float32)
        labels[0] = 1.0
        for sentence in sentences:
            if keep is not None:
                sentence = sentence[rng.random(len(sentence)) < keep[sentence]]
            length = len(sentence)
            if length < 2:
                continue
            spans = rng.integers(1, config.window + 1, size=length)
            for position in range(length):
                center = sentence[position]
                bucket_ids = model.input_buckets[center] if model.input_buckets is not None else None
                low = max(0, position - spans[position])
                high = min(length, position + spans[position] + 1)
                for context_position in range(low, high):
                    if context_position == position:
                        continue
                    context = sentence[context_position]
                    noise = np.searchsorted(noise_table, rng.random(config.negatives), side="right")
                    noise = noise[noise != context]
                    targets = np.concatenate(([context], noise))
                    hidden = model.inputs[center].copy()
                    if bucket_ids:
                        hidden += model.buckets[bucket_ids].sum(axis=0)
                    loss, grad_hidden, grad_outputs = sgns_pair_loss_and_grad(
                        hidden, model.outputs[targets], labels[: len(targets)]
                    )
                    np.add.at(model.outputs, targets, -lr * grad_outputs)
                    model.inputs[center] -= lr * grad_hidden
                    if bucket_ids:
                        np.add.at(model.buckets, bucket_ids, -lr * grad_hidden)
                    loss_sum += loss
                    examples += 1
        return loss_sum, examples

    def _train_parallel(
        self,
        sentences: List[np.ndarray],
        model: _Model,
        noise_table: np.ndarray,
        keep: Optional[np.ndarray],
        epoch: int,
    ) -> Tuple[float, int]:
        workers = self.config.workers
        shards = [sentences[start::workers] for start in range(workers)]
        rngs = [np.random.default_rng([self.config.seed, epoch, worker]) for worker in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda args: self._train_shard(args[0], model, noise_table, keep, args[1]),
                    zip(shards, rngs),
                )
            )
        return sum(r[0] for r in results), sum(r[1] for r in results)


def train_skipgram(corpus: TokenizedCorpus, config: Optional[TrainConfig] = None) -> EmbeddingSpace:
    """Train one embedding space; see :class:`SkipGramTrainer`."""

    return SkipGramTrainer(config).train(corpus)
