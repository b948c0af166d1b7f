"""Anchor-free alignment by adversarial training.

A discriminator learns to tell mapped source vectors from target vectors
while the map ``W`` is trained to fool it. ``W`` starts at the identity and
is pulled back toward the orthogonal manifold after every generator step.
Requires the optional ``adversarial`` dependency group (torch).
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

try:  # pragma: no cover - exercised only when torch is missing
    import torch
    from torch import nn
    from torch.nn import functional as F
except ModuleNotFoundError:  # pragma: no cover
    torch = None  # type: ignore[assignment]
    nn = None  # type: ignore[assignment]
    F = None  # type: ignore[assignment]

from .alignment import (
    DEFAULT_REFINE_ITERATIONS,
    DEFAULT_VOCAB_CAP,
    AlignmentMatrix,
    csls_matches,
    refine_from_mapping,
)
from .embeddings import EmbeddingSpace
from .errors import AlignmentError, ConfigurationError, TermbridgeError

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12
LOG_PROBABILITY_FLOOR = math.log(PROBABILITY_FLOOR)


class AdversarialDependencyError(TermbridgeError):
    """Raised when torch is not installed."""


def _require_torch() -> None:
    if torch is None:
        raise AdversarialDependencyError(
            "Adversarial alignment needs torch. Install it with 'pip install termbridge[adversarial]'."
        )


_ModuleBase: Any = nn.Module if nn is not None else object


class Discriminator(_ModuleBase):
    """Two-layer classifier: Linear, leaky ReLU, dropout, Linear to one logit."""

    def __init__(
        self,
        dim: int,
        hidden: int = 2048,
        dropout_rate: float = 0.1,
        leaky_slope: float = 0.2,
        dtype: Optional["torch.dtype"] = None,
    ) -> None:
        _require_torch()
        if not 0.0 <= dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        if dim < 1 or hidden < 1:
            raise ConfigurationError("Discriminator sizes must be positive")
        super().__init__()
        self.dropout_rate = dropout_rate
        self.leaky_slope = leaky_slope
        self.hidden_layer = nn.Linear(dim, hidden)
        self.activation = nn.LeakyReLU(leaky_slope)
        self.dropout = nn.Dropout(dropout_rate)
        self.output_layer = nn.Linear(hidden, 1)
        if dtype is not None:
            self.to(dtype)

    def forward(self, x: "torch.Tensor") -> "torch.Tensor":
        hidden = self.dropout(self.activation(self.hidden_layer(x)))
        return self.output_layer(hidden).squeeze(-1)

    @property
    def dtype(self) -> "torch.dtype":
        return self.output_layer.weight.dtype


def _as_tensor(values: Any, dtype: "torch.dtype") -> "torch.Tensor":
    if isinstance(values, torch.Tensor):
        return values.to(dtype)
    return torch.as_tensor(np.asarray(values), dtype=dtype)


def discriminator_forward(
    disc: Discriminator, v: Any, train_mode: bool = False, seed: Optional[int] = None
) -> Any:
    """Probability that ``v`` (one vector or a batch) is a mapped source vector.

    Dropout is active only with ``train_mode``; ``seed`` fixes its mask.
    """

    x = _as_tensor(v, disc.dtype)
    single = x.dim() == 1
    if single:
        x = x.unsqueeze(0)
    if not torch.isfinite(x).all():
        raise ConfigurationError("Discriminator input contains non-finite values")
    was_training = disc.training
    disc.train(train_mode)
    try:
        with torch.no_grad():
            if train_mode and seed is not None:
                with torch.random.fork_rng(devices=[]):
                    torch.manual_seed(seed)
                    logits = disc(x)
            else:
                logits = disc(x)
    finally:
        disc.train(was_training)
    probabilities = torch.sigmoid(logits).numpy()
    return float(probabilities[0]) if single else probabilities


def _binary_nll(logits: "torch.Tensor", target: float) -> Tuple["torch.Tensor", int]:
    """Mean ``-[t log p + (1-t) log(1-p)]`` with log-probabilities floored."""

    log_p = F.logsigmoid(logits)
    log_q = F.logsigmoid(-logits)
    clamped = 0
    if target > 0:
        clamped += int((log_p < LOG_PROBABILITY_FLOOR).sum())
    if target < 1:
        clamped += int((log_q < LOG_PROBABILITY_FLOOR).sum())
    log_p = log_p.clamp(min=LOG_PROBABILITY_FLOOR)
    log_q = log_q.clamp(min=LOG_PROBABILITY_FLOOR)
    return -(target * log_p + (1.0 - target) * log_q).mean(), clamped


def _log_clamping(clamped: int, loss_name: str) -> None:
    if clamped:
        logger.debug("probability clamped", extra={"payload": {"loss": loss_name, "clamped": clamped}})


def _check_batches(*batches: "torch.Tensor") -> None:
    for batch in batches:
        if batch.dim() != 2 or batch.shape[0] == 0:
            raise ConfigurationError("Loss batches must be non-empty matrices")


def discriminator_loss(
    disc: Discriminator, aligned_src: "torch.Tensor", tgt: "torch.Tensor", smoothing: float = 0.0
) -> "torch.Tensor":
    """Source rows labelled 1, target rows labelled 0 (smoothed toward 0.5)."""

    _check_batches(aligned_src, tgt)
    src_loss, src_clamped = _binary_nll(disc(aligned_src), 1.0 - smoothing)
    tgt_loss, tgt_clamped = _binary_nll(disc(tgt), smoothing)
    _log_clamping(src_clamped + tgt_clamped, "discriminator")
    return src_loss + tgt_loss


def generator_loss(
    disc: Discriminator,
    W: "torch.Tensor",
    src: "torch.Tensor",
    tgt: "torch.Tensor",
    smoothing: float = 0.0,
) -> "torch.Tensor":
    """The discriminator objective with flipped labels, as a function of ``W``."""

    _check_batches(src, tgt)
    src_loss, src_clamped = _binary_nll(disc(src @ W.T), smoothing)
    tgt_loss, tgt_clamped = _binary_nll(disc(tgt), 1.0 - smoothing)
    _log_clamping(src_clamped + tgt_clamped, "generator")
    return src_loss + tgt_loss


def orthogonalize(W: Any, beta: float = 0.01) -> Any:
    """One step of ``(1 + beta) W - beta (W Wᵀ) W``; works on arrays and tensors."""

    if not 0.0 <= beta <= 0.5:
        raise ConfigurationError(f"beta must be in [0, 0.5], got {beta}")
    return (1.0 + beta) * W - beta * (W @ W.T) @ W


@dataclass
class AdvConfig:
    lr_discriminator: float = 1e-3
    lr_generator: float = 1e-3
    batch_size: int = 32
    steps_per_epoch: int = 1000
    epochs: int = 5
    discriminator_steps: int = 1
    orthogonalization_beta: float = 0.01
    smoothing: float = 0.1
    seed: int = 0
    hidden: int = 2048
    dropout_rate: float = 0.1
    leaky_slope: float = 0.2
    vocab_cap: int = DEFAULT_VOCAB_CAP
    selection_cap: int = 1000
    csls_k: int = 10
    normalize: str = "unit"

    def validate(self) -> None:
        problems = []
        if not (self.lr_discriminator > 0 and self.lr_generator > 0):
            problems.append("learning rates must be positive")
        for name in ("batch_size", "steps_per_epoch", "discriminator_steps", "hidden", "vocab_cap", "selection_cap", "csls_k"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.epochs < 0:
            problems.append("epochs cannot be negative")
        if not 0.0 <= self.orthogonalization_beta <= 0.5:
            problems.append("orthogonalization_beta must be in [0, 0.5]")
        if not 0.0 <= self.smoothing < 0.5:
            problems.append("smoothing must be in [0, 0.5)")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append("dropout_rate must be in [0, 1)")
        if problems:
            raise ConfigurationError("Invalid adversarial configuration: " + "; ".join(problems))

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "AdvConfig":
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        return cls(**known)  # type: ignore[arg-type]


@dataclass
class EpochRecord:
    epoch: int
    L_D: float
    L_W: float
    orth_error: float
    selection_score: float

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class AdversarialResult:
    alignment: AlignmentMatrix
    history: List[EpochRecord] = field(default_factory=list)
    discriminator: Optional[Discriminator] = None
    best_epoch: int = 0
    unrefined: Optional[AlignmentMatrix] = None


def selection_score(W: np.ndarray, src_matrix: np.ndarray, tgt_matrix: np.ndarray, config: AdvConfig) -> float:
    """Mean CSLS of the forward dictionary induced over the most frequent words."""

    mapped = np.asarray(src_matrix[: config.selection_cap], dtype=np.float64) @ W.T
    targets = tgt_matrix[: config.selection_cap]
    return float(csls_matches(mapped, targets, config.csls_k).forward_scores.mean())


def _orth_error(W: np.ndarray) -> float:
    return float(np.linalg.norm(W.T @ W - np.eye(W.shape[0])))


def adversarial_align(src: EmbeddingSpace, tgt: EmbeddingSpace, config: Optional[AdvConfig] = None) -> AdversarialResult:
    """Train ``W`` against a discriminator and return the best checkpoint.

    Checkpoints are scored at the end of every epoch with
    :func:`selection_score`. A non-finite loss stops training and returns the
    best (or last finite) checkpoint with status ``degraded``.
    """

    _require_torch()
    config = config or AdvConfig()
    config.validate()
    if src.dim != tgt.dim:
        raise AlignmentError(f"Source dimension {src.dim} differs from target dimension {tgt.dim}")

    rng = np.random.default_rng(config.seed)
    torch.manual_seed(config.seed)
    src_matrix = src.normalized(config.normalize).matrix()[: config.vocab_cap]
    tgt_matrix = tgt.normalized(config.normalize).matrix()[: config.vocab_cap]
    S = torch.from_numpy(np.ascontiguousarray(src_matrix, dtype=np.float64))
    T = torch.from_numpy(np.ascontiguousarray(tgt_matrix, dtype=np.float64))
    dim = src.dim

    disc = Discriminator(dim, config.hidden, config.dropout_rate, config.leaky_slope, dtype=torch.float64)
    W = torch.eye(dim, dtype=torch.float64, requires_grad=True)
    disc_optimizer = torch.optim.SGD(disc.parameters(), lr=config.lr_discriminator)
    map_optimizer = torch.optim.SGD([W], lr=config.lr_generator)

    best_W = np.eye(dim)
    best_score = -math.inf
    best_epoch = 0
    history: List[EpochRecord] = []
    status = "ok"

    def batch(matrix: "torch.Tensor") -> "torch.Tensor":
        return matrix[torch.from_numpy(rng.integers(0, len(matrix), size=config.batch_size))]

    for epoch in range(1, config.epochs + 1):
        d_losses: List[float] = []
        w_losses: List[float] = []
        diverged = False
        for _ in range(config.steps_per_epoch):
            disc.train()
            for _ in range(config.discriminator_steps):
                with torch.no_grad():
                    mapped = batch(S) @ W.T
                loss_d = discriminator_loss(disc, mapped, batch(T), config.smoothing)
                disc_optimizer.zero_grad()
                loss_d.backward()
                disc_optimizer.step()
                d_losses.append(loss_d.item())

            disc.eval()
            loss_w = generator_loss(disc, W, batch(S), batch(T), config.smoothing)
            map_optimizer.zero_grad()
            loss_w.backward()
            map_optimizer.step()
            with torch.no_grad():
                W.copy_(orthogonalize(W, config.orthogonalization_beta))
            w_losses.append(loss_w.item())

            if not (math.isfinite(d_losses[-1]) and math.isfinite(w_losses[-1]) and torch.isfinite(W).all()):
                diverged = True
                break

        if diverged:
            status = "degraded"
            logger.error("adversarial training diverged", extra={"payload": {"epoch": epoch}})
            break

        current = W.detach().numpy().copy()
        score = selection_score(current, src_matrix, tgt_matrix, config)
        record = EpochRecord(
            epoch=epoch,
            L_D=float(np.mean(d_losses)),
            L_W=float(np.mean(w_losses)),
            orth_error=_orth_error(current),
            selection_score=score,
        )
        history.append(record)
        logger.info("adversarial epoch", extra={"payload": record.to_dict()})
        if score > best_score:
            best_W, best_score, best_epoch = current, score, epoch

    alignment = AlignmentMatrix(
        W=best_W,
        orthogonal=_orth_error(best_W) <= 1e-6,
        residual=None,
        iterations_used=len(history),
        status=status,
        method="adversarial",
        normalization=config.normalize,
    )
    return AdversarialResult(alignment=alignment, history=history, discriminator=disc, best_epoch=best_epoch)


def adversarial_then_refine(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    adv_config: Optional[AdvConfig] = None,
    refine_iterations: int = DEFAULT_REFINE_ITERATIONS,
    vocab_cap: Optional[int] = None,
) -> AdversarialResult:
    """Adversarial map followed by iterative Procrustes from its mutual dictionary."""

    adv_config = adv_config or AdvConfig()
    result = adversarial_align(src, tgt, adv_config)
    refined = refine_from_mapping(
        result.alignment,
        src,
        tgt,
        iterations=refine_iterations,
        vocab_cap=vocab_cap or adv_config.vocab_cap,
        csls_k=adv_config.csls_k,
    )
    if refined.status != "unrefined":
        refined = replace(refined, method="adversarial+refine")
        if result.alignment.status == "degraded":
            refined = replace(refined, status="degraded")
    else:
        logger.warning("refinement skipped: induced dictionary is empty", extra={"payload": {"dictionary_size": 0}})
    return replace(result, alignment=refined, unrefined=result.alignment)


def discriminator_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".discriminator.pt")


def save_discriminator(disc: Discriminator, path: Path | str) -> Path:
    """Write the discriminator's ``state_dict`` next to an alignment file."""

    _require_torch()
    target = discriminator_path(path)
    torch.save(disc.state_dict(), target)
    return target


def load_discriminator(path: Path | str, dim: int, hidden: int = 2048) -> Discriminator:
    _require_torch()
    disc = Discriminator(dim, hidden, dtype=torch.float64)
    disc.load_state_dict(torch.load(Path(path), weights_only=True))
    return disc
