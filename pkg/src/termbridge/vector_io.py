"""Read and write embedding spaces.

Text files follow the word2vec convention: an ``n d`` header, then one line
per word with ``d`` space-separated floats. Values are written with Python's
shortest round-trip ``repr`` so a save/load cycle reproduces the stored
vectors exactly. The binary sidecar stores the same content compactly:

``TBV1`` magic, little-endian uint32 ``n`` and ``d``, then per word a uint32
byte length, the UTF-8 word, and ``d`` little-endian float32 values.
"""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .embeddings import EmbeddingSpace, SubwordTable, Vocabulary
from .errors import VectorFormatError

logger = logging.getLogger(__name__)

BINARY_MAGIC = b"TBV1"
_HEADER = struct.Struct("<4sII")
_LENGTH = struct.Struct("<I")


def meta_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def subword_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".subword.npz")


def binary_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".bin")


def save_vectors(
    space: EmbeddingSpace,
    path: Path | str,
    *,
    binary_sidecar: bool = False,
    run_config: Optional[Mapping[str, object]] = None,
) -> List[Path]:
    """Write ``space`` as text (plus optional sidecars); returns written paths."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = space.matrix()
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{len(space)} {space.dim}\n")
        for word, row in zip(space.words, matrix):
            handle.write(word + " " + " ".join(repr(value) for value in row.tolist()) + "\n")
    written = [path]

    if binary_sidecar:
        written.append(_write_binary(space.words, matrix, binary_path(path)))

    if space.mode == "subword":
        assert space.subwords is not None
        target = subword_path(path)
        with target.open("wb") as handle:
            np.savez(
                handle,
                word_rows=space.vectors,
                buckets=space.subwords.buckets,
                ngram_range=np.array([space.subwords.n_min, space.subwords.n_max]),
            )
        written.append(target)

    meta = {
        "mode": space.mode,
        "dim": space.dim,
        "words": len(space),
        "total_tokens": space.vocab.total_tokens,
        "counts": {word: space.vocab.count(word) for word in space.words if space.vocab.count(word)},
        "metadata": space.metadata,
        "normalization": space.normalization.policy if space.normalization else None,
        "run_config": dict(run_config or {}),
    }
    meta_file = meta_path(path)
    meta_file.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default), encoding="utf-8")
    written.append(meta_file)
    logger.info("saved vectors", extra={"payload": {"path": str(path), "words": len(space), "dim": space.dim}})
    return written


def _json_default(value: object) -> object:
    if hasattr(value, "tolist"):
        return value.tolist()  # type: ignore[union-attr]
    return str(value)


def _write_binary(words: List[str], matrix: np.ndarray, path: Path) -> Path:
    rows = np.asarray(matrix, dtype="<f4")
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(BINARY_MAGIC, len(words), rows.shape[1]))
        for word, row in zip(words, rows):
            encoded = word.encode("utf-8")
            handle.write(_LENGTH.pack(len(encoded)))
            handle.write(encoded)
            handle.write(row.tobytes())
    return path


def load_vectors(path: Path | str, dtype: Optional[np.dtype | type] = None) -> EmbeddingSpace:
    """Load a text or binary vector file (detected by its magic bytes).

    Values keep the precision they were stored with unless ``dtype`` is given.
    """

    path = Path(path)
    if not path.exists():
        raise VectorFormatError(f"Vector file does not exist: {path}")
    with path.open("rb") as handle:
        is_binary = handle.read(len(BINARY_MAGIC)) == BINARY_MAGIC
    if is_binary:
        words, matrix = _read_binary(path)
    else:
        words, matrix = _read_text(path)
    matrix = _cast(matrix, dtype)

    meta: Dict[str, object] = {}
    meta_file = meta_path(path)
    if meta_file.exists():
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
    counts = meta.get("counts") or {}
    vocab = Vocabulary(words=words, counts=dict(counts), total_tokens=int(meta.get("total_tokens") or 0))
    metadata = dict(meta.get("metadata") or {})

    sidecar = subword_path(path)
    if meta.get("mode") == "subword" and sidecar.exists():
        with np.load(sidecar) as stored:
            word_rows = stored["word_rows"]
            if word_rows.shape != matrix.shape:
                raise VectorFormatError(f"{sidecar} does not match the vocabulary of {path}")
            n_min, n_max = (int(v) for v in stored["ngram_range"])
            table = SubwordTable(_cast(stored["buckets"], dtype), n_min, n_max)
            return EmbeddingSpace(
                vocab=vocab,
                vectors=_cast(word_rows, dtype),
                mode="subword",
                subwords=table,
                metadata=metadata,
            )
    return EmbeddingSpace(vocab=vocab, vectors=matrix, metadata=metadata)


def _cast(values: np.ndarray, dtype: Optional[np.dtype | type]) -> np.ndarray:
    return values if dtype is None else values.astype(dtype, copy=False)


def _parse_header(line: str, path: Path) -> Tuple[int, int]:
    parts = line.split()
    try:
        count, dim = (int(part) for part in parts)
    except ValueError:
        raise VectorFormatError(f"{path}:1: expected an 'n d' header, found {line.strip()!r}") from None
    if count < 0 or dim <= 0:
        raise VectorFormatError(f"{path}:1: invalid header {line.strip()!r}")
    return count, dim


def _read_text(path: Path) -> Tuple[List[str], np.ndarray]:
    try:
        lines = path.read_bytes().decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise VectorFormatError(f"{path} is not valid UTF-8: {exc}") from exc
    if not lines:
        raise VectorFormatError(f"{path} is empty")
    count, dim = _parse_header(lines[0], path)

    words: List[str] = []
    seen = set()
    matrix = np.empty((count, dim), dtype=np.float64)
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        word, values = parts[0], parts[1:]
        if len(values) != dim:
            raise VectorFormatError(f"{path}:{line_number}: expected {dim} values for {word!r}, found {len(values)}")
        if word in seen:
            raise VectorFormatError(f"{path}:{line_number}: duplicate word {word!r}")
        if len(words) >= count:
            raise VectorFormatError(f"{path}:{line_number}: more rows than the header count {count}")
        try:
            row = np.array(values, dtype=np.float64)
        except ValueError:
            raise VectorFormatError(f"{path}:{line_number}: unparseable value for {word!r}") from None
        if not np.isfinite(row).all():
            raise VectorFormatError(f"{path}:{line_number}: non-finite value for {word!r}")
        matrix[len(words)] = row
        words.append(word)
        seen.add(word)
    if len(words) != count:
        raise VectorFormatError(f"{path}: header declares {count} rows but {len(words)} were found")
    return words, matrix


def _read_binary(path: Path) -> Tuple[List[str], np.ndarray]:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise VectorFormatError(f"{path}: truncated binary header")
    _, count, dim = _HEADER.unpack_from(data, 0)
    offset = _HEADER.size
    row_bytes = 4 * dim
    words: List[str] = []
    matrix = np.empty((count, dim), dtype=np.float32)
    for index in range(count):
        if offset + _LENGTH.size > len(data):
            raise VectorFormatError(f"{path}: truncated at row {index + 1}")
        (length,) = _LENGTH.unpack_from(data, offset)
        offset += _LENGTH.size
        if offset + length + row_bytes > len(data):
            raise VectorFormatError(f"{path}: truncated at row {index + 1}")
        try:
            word = data[offset:offset + length].decode("utf-8")
        except UnicodeDecodeError:
            raise VectorFormatError(f"{path}: row {index + 1} word is not valid UTF-8") from None
        offset += length
        row = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += row_bytes
        if not np.isfinite(row).all():
            raise VectorFormatError(f"{path}: non-finite value at row {index + 1}")
        matrix[index] = row
        words.append(word)
    if len(set(words)) != len(words):
        raise VectorFormatError(f"{path}: duplicate words")
    if offset != len(data):
        raise VectorFormatError(f"{path}: {len(data) - offset} trailing bytes after {count} rows")
    return words, matrix
