"""Resolved run settings: built-in defaults, config file, command-line flags.

Flags win over the config file, which wins over the defaults below. The
config file is flat ``key = value`` text; ``TERMBRIDGE_CONFIG`` names one
when ``--config`` is not given.
"""
from __future__ import annotations

import os
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from .corpus import DEFAULT_DOCUMENT_DELIMITER
from .errors import ConfigurationError
from .skipgram import TrainConfig

CONFIG_ENV_VAR = "TERMBRIDGE_CONFIG"
VERSION = "0.1.0"

# "sections" and "output" hold repeated groups, separated by "|" in a config file.
GROUP_LISTS = {"sections", "output"}

# keys whose default is None still need a type for config-file values
OPTION_TYPES: Dict[str, type] = {
    "seed": int,
    "buckets": int,
}

COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "preprocess": {
        "input": None,
        "sections": [],
        "output": [],
        "output_dir": ".",
        "stem": True,
        "stopwords": None,
        "lowercase": True,
        "stemmer": "martin",
        "delimiter": DEFAULT_DOCUMENT_DELIMITER,
    },
    "train": {
        "corpus": None,
        "mode": "word",
        "dim": 200,
        "window": 5,
        "epochs": 20,
        "lr": 0.05,
        "min_count": 3,
        "subsample": 1e-5,
        "negatives": 5,
        "minn": 3,
        "maxn": 6,
        "buckets": 2_000_000,
        "workers": 1,
        "seed": None,
        "output": None,
        "binary": False,
    },
    "align": {
        "src": None,
        "tgt": None,
        "method": "procrustes",
        "refine_iters": 20,
        "anchors": "auto",
        "max_anchors": 0,
        "vocab_cap": 10_000,
        "csls_k": 10,
        "normalize": "unit",
        "seed": None,
        "output": None,
        "adv_epochs": 5,
        "adv_steps": 1000,
        "batch_size": 32,
        "lr_discriminator": 1e-3,
        "lr_generator": 1e-3,
        "dis_steps": 1,
        "beta": 0.01,
        "smoothing": 0.1,
        "hidden": 2048,
        "dropout": 0.1,
        "leaky_slope": 0.2,
    },
    "evaluate": {
        "src": None,
        "tgt": None,
        "map": None,
        "gold": None,
        "k": [1, 5, 10],
        "metric": "csls",
        "csls_k": 10,
        "vocab_cap": 10_000,
        "report": None,
        "normalize_gold": True,
        "stem": True,
        "lowercase": True,
        "stemmer": "martin",
    },
    "retrieve": {
        "src": None,
        "tgt": None,
        "map": None,
        "query": [],
        "k": 10,
        "metric": "csls",
        "csls_k": 10,
        "vocab_cap": 10_000,
        "output": None,
        "jsonl": None,
    },
    "export-pca": {
        "src": None,
        "tgt": None,
        "map": None,
        "terms": None,
        "out": None,
        "dims": 2,
    },
    "synthesize": {
        "words": 1000,
        "dim": 50,
        "noise": 0.0,
        "anchor_fraction": 0.2,
        "clusters": 0,
        "frequency_weighted": False,
        "seed": None,
        "out_dir": None,
    },
    "profiles": {},
    "reproduce": {
        "profile": "subword-w3",
        "input": None,
        "gold": None,
        "workdir": None,
        "delimiter": DEFAULT_DOCUMENT_DELIMITER,
        "buckets": None,
        "seed": None,
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str, default: Any) -> Any:
    raw = raw.strip()
    if isinstance(default, bool):
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigurationError(f"Config key {key!r} expects a boolean, got {raw!r}")
    if isinstance(default, list):
        if key in GROUP_LISTS:
            return [part.strip() for part in raw.split("|") if part.strip()]
        element = type(default[0]) if default else str
        try:
            return [element(part.strip()) for part in raw.split(",") if part.strip()]
        except ValueError:
            raise ConfigurationError(f"Config key {key!r} expects a comma list, got {raw!r}") from None
    target = OPTION_TYPES.get(key) or (type(default) if default is not None else str)
    try:
        return target(raw)
    except ValueError:
        raise ConfigurationError(f"Config key {key!r} expects {target.__name__}, got {raw!r}") from None


def load_config_file(path: Path | str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` comments and blank lines are ignored."""

    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file does not exist: {path}")
    values: Dict[str, str] = {}
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{line_number}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def resolve_seed(seed: Optional[int]) -> int:
    """Use ``seed`` when given, otherwise draw one from OS entropy."""

    return int(seed) if seed is not None else secrets.randbits(31)


@dataclass
class RunConfig:
    """Fully resolved settings of one command invocation."""

    command: str
    settings: Dict[str, Any] = field(default_factory=dict)
    config_file: Optional[str] = None
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    version: str = VERSION

    @property
    def seed(self) -> Optional[int]:
        return self.settings.get("seed")

    def __getitem__(self, key: str) -> Any:
        return self.settings[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.settings.get(key, default)

    def require(self, *keys: str) -> None:
        missing = [key for key in keys if self.settings.get(key) in (None, "", [])]
        if missing:
            flags = ", ".join("--" + key.replace("_", "-") for key in missing)
            raise ConfigurationError(f"Missing required option(s) for {self.command}: {flags}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "settings": dict(self.settings),
            "config_file": self.config_file,
            "created_at": self.created_at,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        return cls(
            command=str(data["command"]),
            settings=dict(data.get("settings", {})),
            config_file=data.get("config_file"),
            created_at=str(data.get("created_at", "")),
            version=str(data.get("version", VERSION)),
        )


def resolve_config(
    command: str,
    cli_values: Mapping[str, Any],
    config_path: Optional[Path | str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge defaults, config file and flags for ``command``."""

    if command not in COMMAND_DEFAULTS:
        raise ConfigurationError(f"Unknown command {command!r}")
    defaults = COMMAND_DEFAULTS[command]
    environ = os.environ if environ is None else environ
    path = config_path or environ.get(CONFIG_ENV_VAR) or None

    settings = dict(defaults)
    if path:
        for key, raw in load_config_file(path).items():
            if key not in defaults:
                raise ConfigurationError(f"Unknown config key {key!r} for command {command!r}")
            settings[key] = _coerce(key, raw, defaults[key])
    for key, value in cli_values.items():
        if key in defaults:
            settings[key] = value
    if "seed" in defaults:
        settings["seed"] = resolve_seed(settings.get("seed"))
    return RunConfig(command=command, settings=settings, config_file=str(path) if path else None)


@dataclass(frozen=True)
class ReferenceProfile:
    """A corpus-trained configuration and the precision it was reported with."""

    name: str
    description: str
    mode: str
    source_window: int
    target_window: int
    reported: Tuple[Tuple[int, float], ...]
    dim: int = 200
    epochs: int = 20
    learning_rate: float = 0.05
    min_count: int = 3
    subsample_threshold: float = 1e-5
    negatives: int = 5
    anchors: str = "identical-strings"
    refine_iterations: int = 20
    metric: str = "csls"

    def train_config(self, side: str, seed: int, bucket_count: Optional[int] = None) -> TrainConfig:
        if side not in ("source", "target"):
            raise ConfigurationError(f"side must be 'source' or 'target', got {side!r}")
        config = TrainConfig(
            dim=self.dim,
            window=self.source_window if side == "source" else self.target_window,
            min_count=self.min_count,
            subsample_threshold=self.subsample_threshold,
            negatives=self.negatives,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            mode=self.mode,
            seed=seed,
        )
        if bucket_count is not None:
            config.bucket_count = bucket_count
        return config

    def reported_line(self) -> str:
        return " ".join(f"P@{k} {value:.3f}" for k, value in self.reported)


REFERENCE_PROFILES: Dict[str, ReferenceProfile] = {
    profile.name: profile
    for profile in (
        ReferenceProfile(
            name="word-w3",
            description="word-level skip-gram, window 3 on both sides",
            mode="word",
            source_window=3,
            target_window=3,
            reported=((1, 0.17), (5, 0.39), (10, 0.48)),
        ),
        ReferenceProfile(
            name="word-w5",
            description="word-level skip-gram, window 5 on both sides",
            mode="word",
            source_window=5,
            target_window=5,
            reported=((1, 0.19), (5, 0.42), (10, 0.54)),
        ),
        ReferenceProfile(
            name="subword-w3",
            description="subword skip-gram, window 3 on both sides",
            mode="subword",
            source_window=3,
            target_window=3,
            reported=((1, 0.27), (5, 0.57), (10, 0.78)),
        ),
        ReferenceProfile(
            name="subword-w5",
            description="subword skip-gram, window 5 on both sides",
            mode="subword",
            source_window=5,
            target_window=5,
            reported=((1, 0.30), (5, 0.55), (10, 0.68)),
        ),
    )
}
DEFAULT_PROFILE = "subword-w3"


def get_profile(name: str) -> ReferenceProfile:
    try:
        return REFERENCE_PROFILES[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown profile {name!r}; choose from {', '.join(sorted(REFERENCE_PROFILES))}"
        ) from None
