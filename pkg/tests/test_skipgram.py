from __future__ import annotations

import logging

import numpy as np
import pytest

from termbridge.corpus import TokenizedCorpus
from termbridge.embeddings import build_vocab
from termbridge.errors import ConfigurationError, CorpusError, TrainingDivergedError
from termbridge.skipgram import SkipGramTrainer, TrainConfig, sgns_pair_loss_and_grad, train_skipgram


def _unit(vector):
    return vector / np.linalg.norm(vector)


def _two_topic_corpus(seed: int = 0) -> TokenizedCorpus:
    rng = np.random.default_rng(seed)
    topic_a = [f"a{i}" for i in range(5)]
    topic_b = [f"b{i}" for i in range(5)]
    sentences = []
    for _ in range(500):
        sentences.append(list(rng.choice(topic_a, size=5)))
        sentences.append(list(rng.choice(topic_b, size=5)))
    return TokenizedCorpus.from_sentences(sentences)


def test_default_config_values():
    config = TrainConfig()
    assert (config.dim, config.epochs, config.learning_rate) == (200, 20, 0.05)
    assert config.min_count == 3
    assert config.subsample_threshold == 1e-5
    assert config.negatives == 5
    assert (config.n_min, config.n_max, config.bucket_count) == (3, 6, 2_000_000)


@pytest.mark.parametrize(
    "overrides",
    [{"window": 0}, {"dim": 0}, {"learning_rate": 0.0}, {"negatives": 0}, {"mode": "cbow"}, {"workers": 0}],
)
def test_config_validation(overrides):
    with pytest.raises(ConfigurationError):
        TrainConfig(**overrides).validate()


def test_config_round_trip():
    config = TrainConfig(dim=16, mode="subword", seed=9)
    assert TrainConfig.from_dict(config.to_dict()) == config


def test_pair_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    eps = 1e-6
    for _ in range(100):
        dim = int(rng.integers(2, 12))
        targets = int(rng.integers(2, 7))
        center = rng.normal(scale=0.5, size=dim)
        outputs = rng.normal(scale=0.5, size=(targets, dim))
        labels = np.zeros(targets)
        labels[0] = 1.0
        _, grad_center, grad_outputs = sgns_pair_loss_and_grad(center, outputs, labels)

        numeric_center = np.zeros(dim)
        for i in range(dim):
            step = np.zeros(dim)
            step[i] = eps
            plus = sgns_pair_loss_and_grad(center + step, outputs, labels)[0]
            minus = sgns_pair_loss_and_grad(center - step, outputs, labels)[0]
            numeric_center[i] = (plus - minus) / (2 * eps)
        np.testing.assert_allclose(grad_center, numeric_center, rtol=1e-4, atol=1e-8)

        row, col = int(rng.integers(targets)), int(rng.integers(dim))
        step = np.zeros_like(outputs)
        step[row, col] = eps
        plus = sgns_pair_loss_and_grad(center, outputs + step, labels)[0]
        minus = sgns_pair_loss_and_grad(center, outputs - step, labels)[0]
        np.testing.assert_allclose(grad_outputs[row, col], (plus - minus) / (2 * eps), rtol=1e-4, atol=1e-8)


def test_pair_loss_value():
    center = np.zeros(3)
    outputs = np.ones((2, 3))
    loss, _, _ = sgns_pair_loss_and_grad(center, outputs, np.array([1.0, 0.0]))
    assert loss == pytest.approx(2 * np.log(2.0))


@pytest.mark.parametrize("seed", range(5))
def test_two_topics_separate(seed):
    config = TrainConfig(dim=16, window=2, min_count=0, subsample_threshold=0.0, epochs=5, seed=seed)
    space = train_skipgram(_two_topic_corpus(seed), config)
    vectors = {word: _unit(space.lookup(word).vector) for word in space.words}
    intra, inter = [], []
    words = sorted(vectors)
    for i, left in enumerate(words):
        for right in words[i + 1:]:
            similarity = float(vectors[left] @ vectors[right])
            (intra if left[0] == right[0] else inter).append(similarity)
    assert np.mean(intra) - np.mean(inter) >= 0.2


def test_shared_context_words_end_up_similar():
    corpus = TokenizedCorpus.from_sentences([["a", "c"]] * 1000 + [["b", "c"]] * 1000)
    pair_similarity, random_similarity = [], []
    for seed in range(5):
        config = TrainConfig(dim=10, window=1, min_count=0, subsample_threshold=0.0, epochs=3, seed=seed)
        space = train_skipgram(corpus, config)
        a = _unit(space.lookup("a").vector)
        b = _unit(space.lookup("b").vector)
        direction = _unit(np.random.default_rng(100 + seed).normal(size=10))
        pair_similarity.append(float(a @ b))
        random_similarity.append(abs(float(a @ direction)))
    assert np.mean(pair_similarity) > np.mean(random_similarity)


def test_training_is_seed_deterministic():
    corpus = _two_topic_corpus()
    config = TrainConfig(dim=8, window=2, min_count=0, epochs=1, seed=42)
    first = train_skipgram(corpus, config)
    second = train_skipgram(corpus, config)
    assert first.words == second.words
    np.testing.assert_array_equal(first.vectors, second.vectors)


def test_trained_vectors_are_finite_and_nonzero():
    config = TrainConfig(dim=8, window=2, min_count=3, epochs=1, seed=3)
    space = train_skipgram(_two_topic_corpus(), config)
    matrix = space.matrix()
    assert np.isfinite(matrix).all()
    assert (np.linalg.norm(matrix, axis=1) > 0).all()
    assert all(space.vocab.count(word) > 3 for word in space.words)


def test_initial_tables_are_float32_within_bound():
    config = TrainConfig(dim=8, window=2, min_count=0, mode="subword", bucket_count=1000, seed=0)
    vocab = build_vocab(_two_topic_corpus(), min_count=0)
    model = SkipGramTrainer(config)._initialise(vocab, np.random.default_rng(0))
    bound = 0.5 / config.dim
    for table in (model.inputs, model.buckets):
        assert table.dtype == np.float32
        assert table.min() >= -bound and table.max() <= bound
        assert table.std() > 0
    assert not model.outputs.any()


def test_subword_training_reports_row_plus_buckets():
    config = TrainConfig(dim=8, window=2, min_count=0, epochs=1, mode="subword", bucket_count=500, seed=5)
    space = train_skipgram(_two_topic_corpus(), config)
    assert space.subwords is not None and space.subwords.bucket_count == 500
    for position, word in enumerate(space.words):
        expected = space.vectors[position].copy()
        for bucket in space.subwords.bucket_ids(word):
            expected += space.subwords.buckets[bucket]
        np.testing.assert_array_equal(space.lookup(word).vector, expected)
    assert space.lookup("a12") is not None


def test_epoch_records_are_logged(caplog):
    trainer = SkipGramTrainer(TrainConfig(dim=4, window=1, min_count=0, epochs=2, seed=0))
    with caplog.at_level(logging.INFO, logger="termbridge"):
        trainer.train(_two_topic_corpus())
    assert [record["epoch"] for record in trainer.history] == [1, 2]
    assert set(trainer.history[0]) == {"epoch", "examples", "mean_loss", "learning_rate"}
    epochs = [r for r in caplog.records if r.getMessage() == "skip-gram epoch"]
    assert len(epochs) == 2
    assert epochs[0].payload["learning_rate"] == 0.05


def test_corpus_shorter_than_window():
    corpus = TokenizedCorpus.from_sentences([["fever", "cough"]])
    with pytest.raises(CorpusError):
        train_skipgram(corpus, TrainConfig(dim=4, window=5, min_count=0))


def test_corpus_without_pairs():
    corpus = TokenizedCorpus.from_sentences([["fever"]] * 10)
    with pytest.raises(CorpusError):
        train_skipgram(corpus, TrainConfig(dim=4, window=2, min_count=0))


def test_divergence_is_reported():
    config = TrainConfig(dim=4, window=2, min_count=0, subsample_threshold=0.0, epochs=3, learning_rate=1e30)
    with pytest.raises(TrainingDivergedError):
        with np.errstate(all="ignore"):
            train_skipgram(_two_topic_corpus(), config)


def test_multi_worker_training_runs():
    config = TrainConfig(dim=8, window=2, min_count=0, epochs=1, workers=2, seed=0)
    space = train_skipgram(_two_topic_corpus(), config)
    assert len(space) == 10
    assert np.isfinite(space.vectors).all()
