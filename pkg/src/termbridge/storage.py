"""File formats for alignment maps, dictionaries and reports.

Alignment text file::

    # {"method": "procrustes", "orthogonal": true, ...}
    d
    w11 w12 ... w1d
    ...

Binary sidecar ``<file>.bin``: magic ``TBW1``, little-endian uint32 ``d``,
then ``d*d`` little-endian float64 values in row-major order.
"""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .alignment import AlignmentMatrix, AnchorDictionary
from .errors import AlignmentError, EvaluationError

logger = logging.getLogger(__name__)

ALIGNMENT_MAGIC = b"TBW1"
_ALIGNMENT_HEADER = struct.Struct("<4sI")


def dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default)


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "to_dict"):
        return value.to_dict()
    return str(value)


def config_comment(run_config: Optional[Mapping[str, Any]]) -> str:
    """Leading ``# config: {...}`` line for TSV artifacts."""

    compact = json.dumps(dict(run_config or {}), sort_keys=True, default=_json_default)
    return f"# config: {compact}\n"


def write_text(path: Path | str, body: str, run_config: Optional[Mapping[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    prefix = config_comment(run_config) if run_config is not None else ""
    path.write_text(prefix + body, encoding="utf-8", newline="\n")
    return path


def write_json(path: Path | str, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def alignment_binary_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".bin")


class AlignmentStorage:
    """Persist an :class:`AlignmentMatrix` as text plus binary sidecar."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)

    def save(self, alignment: AlignmentMatrix, run_config: Optional[Mapping[str, Any]] = None) -> Tuple[Path, Path]:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        metadata: Dict[str, Any] = alignment.metadata()
        metadata["run_config"] = dict(run_config or {})
        lines = [
            "# " + json.dumps(metadata, sort_keys=True, default=_json_default),
            str(alignment.dim),
        ]
        lines.extend(" ".join(repr(value) for value in row) for row in alignment.W.tolist())
        self.path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

        binary = alignment_binary_path(self.path)
        with binary.open("wb") as handle:
            handle.write(_ALIGNMENT_HEADER.pack(ALIGNMENT_MAGIC, alignment.dim))
            handle.write(np.asarray(alignment.W, dtype="<f8").tobytes(order="C"))
        logger.info("saved alignment", extra={"payload": {"path": str(self.path), "dim": alignment.dim}})
        return self.path, binary

    def load(self) -> AlignmentMatrix:
        """Read the text file, or the binary file if ``path`` points at one.

        A binary file alone carries no metadata; the text companion is used
        for it when present.
        """

        if not self.path.exists():
            raise AlignmentError(f"Alignment file does not exist: {self.path}")
        with self.path.open("rb") as handle:
            is_binary = handle.read(len(ALIGNMENT_MAGIC)) == ALIGNMENT_MAGIC
        if is_binary:
            W = self._read_binary(self.path)
            text_path = self.path.with_suffix("") if self.path.suffix == ".bin" else None
            metadata = self._read_text(text_path)[1] if text_path and text_path.exists() else {}
        else:
            W, metadata = self._read_text(self.path)
        metadata.pop("run_config", None)
        return AlignmentMatrix.from_metadata(W, metadata)

    @staticmethod
    def _read_binary(path: Path) -> np.ndarray:
        data = path.read_bytes()
        if len(data) < _ALIGNMENT_HEADER.size:
            raise AlignmentError(f"{path}: truncated alignment header")
        _, dim = _ALIGNMENT_HEADER.unpack_from(data, 0)
        expected = _ALIGNMENT_HEADER.size + 8 * dim * dim
        if len(data) != expected:
            raise AlignmentError(f"{path}: expected {expected} bytes for d={dim}, found {len(data)}")
        return np.frombuffer(data, dtype="<f8", offset=_ALIGNMENT_HEADER.size).reshape(dim, dim).astype(np.float64)

    @staticmethod
    def _read_text(path: Path) -> Tuple[np.ndarray, Dict[str, Any]]:
        try:
            lines = path.read_bytes().decode("utf-8").splitlines()
        except UnicodeDecodeError as exc:
            raise AlignmentError(f"{path} is not valid UTF-8: {exc}") from exc
        metadata: Dict[str, Any] = {}
        body = []
        for line_number, line in enumerate(lines, start=1):
            if line.startswith("#"):
                if not metadata and not body:
                    try:
                        metadata = json.loads(line[1:].strip() or "{}")
                    except json.JSONDecodeError:
                        raise AlignmentError(f"{path}:{line_number}: metadata line is not JSON") from None
                continue
            if line.strip():
                body.append((line_number, line))
        if not body:
            raise AlignmentError(f"{path}: missing dimension line")
        line_number, first = body[0]
        try:
            dim = int(first.strip())
        except ValueError:
            raise AlignmentError(f"{path}:{line_number}: expected the dimension, found {first.strip()!r}") from None
        rows = body[1:]
        if len(rows) != dim:
            raise AlignmentError(f"{path}: expected {dim} matrix rows, found {len(rows)}")
        W = np.empty((dim, dim), dtype=np.float64)
        for index, (line_number, line) in enumerate(rows):
            values = line.split()
            if len(values) != dim:
                raise AlignmentError(f"{path}:{line_number}: expected {dim} values, found {len(values)}")
            try:
                W[index] = [float(value) for value in values]
            except ValueError:
                raise AlignmentError(f"{path}:{line_number}: unparseable value") from None
        return W, metadata


def save_alignment(
    alignment: AlignmentMatrix, path: Path | str, run_config: Optional[Mapping[str, Any]] = None
) -> Tuple[Path, Path]:
    return AlignmentStorage(path).save(alignment, run_config)


def load_alignment(path: Path | str) -> AlignmentMatrix:
    return AlignmentStorage(path).load()


def write_dictionary(
    anchors: AnchorDictionary, path: Path | str, run_config: Optional[Mapping[str, Any]] = None
) -> Path:
    """``source<TAB>target`` per line, after a config comment."""

    body = "".join(f"{source}\t{target}\n" for source, target in anchors)
    config = {"provenance": anchors.provenance, **dict(run_config or {})}
    return write_text(path, body, config)


def read_dictionary(path: Path | str, provenance: str = "gold") -> AnchorDictionary:
    path = Path(path)
    if not path.exists():
        raise AlignmentError(f"Dictionary file does not exist: {path}")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise AlignmentError(f"{path} is not valid UTF-8: {exc}") from exc
    pairs = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise AlignmentError(f"{path}:{line_number}: expected 'source<TAB>target'")
        pairs.append((parts[0].strip(), parts[1].strip()))
    return AnchorDictionary(pairs, provenance=provenance)


def write_jsonl(path: Path | str, records: Iterable[Any]) -> Path:
    """One JSON object per line; records expose ``to_dict()``."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(record.to_dict() if hasattr(record, "to_dict") else record, sort_keys=True, ensure_ascii=False)
        for record in records
    ]
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def read_terms(path: Path | str) -> Dict[str, list]:
    """Labelled term lists: ``source|target<TAB>word`` per line."""

    path = Path(path)
    if not path.exists():
        raise EvaluationError(f"Terms file does not exist: {path}")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EvaluationError(f"{path} is not valid UTF-8: {exc}") from exc
    groups: Dict[str, list] = {"source": [], "target": []}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        side, _, word = line.partition("\t")
        side = side.strip().lower()
        if side not in groups or not word.strip():
            raise EvaluationError(f"{path}:{line_number}: expected 'source|target<TAB>word'")
        groups[side].append(word.strip())
    return groups
