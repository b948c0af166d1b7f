"""Turn clinical notes or plain text into tokenised sentence streams.

Notes are segmented into named sections by header lines, the requested
sections are split into sentences, tokenised, filtered against a stopword list
and Porter-stemmed. The output of a run is a :class:`TokenizedCorpus` that the
embedding trainer consumes directly or through the one-sentence-per-line corpus
file.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from nltk.stem.porter import PorterStemmer

from .errors import ConfigurationError, CorpusError

logger = logging.getLogger(__name__)

PREAMBLE = "_preamble"
DEFAULT_DOCUMENT_DELIMITER = "<<<NOTE>>>"

# Header variants seen in discharge summaries, mapped to canonical section names.
DEFAULT_HEADER_ALIASES: Dict[str, str] = {
    "history of present illness:": "History of present illness",
    "hpi:": "History of present illness",
    "brief hospital course:": "Brief hospital course",
    "hospital course:": "Brief hospital course",
    "discharge instructions:": "Discharge instruction",
    "discharge instruction:": "Discharge instruction",
    "followup instructions:": "Followup instruction",
    "followup instruction:": "Followup instruction",
    "follow-up instructions:": "Followup instruction",
    "follow up instructions:": "Followup instruction",
}

DEFAULT_HEADERS: Tuple[str, ...] = (
    "History of Present Illness:",
    "HPI:",
    "Brief Hospital Course:",
    "Hospital Course:",
    "Discharge Instructions:",
    "Discharge Instruction:",
    "Followup Instructions:",
    "Followup Instruction:",
    "Follow-up Instructions:",
    "Follow up Instructions:",
)

SECTION_GROUPS: Dict[str, Tuple[str, ...]] = {
    "professional": ("History of present illness", "Brief hospital course"),
    "consumer": ("Discharge instruction", "Followup instruction"),
}

STEMMER_MODES = {
    "martin": PorterStemmer.MARTIN_EXTENSIONS,
    "original": PorterStemmer.ORIGINAL_ALGORITHM,
}

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+|\n+")
_TOKEN_SEPARATORS = re.compile(r"[\s,;()\[\]{}\"]+")


@dataclass(frozen=True)
class RawDocument:
    """A single note as ingested from disk."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("Document id cannot be empty")


@dataclass(frozen=True)
class SectionedDocument:
    """A note split into ``(section_name, body)`` pairs in document order."""

    id: str
    sections: Tuple[Tuple[str, str], ...] = ()

    def names(self) -> List[str]:
        return [name for name, _ in self.sections]

    def body(self, name: str) -> Optional[str]:
        for section_name, body in self.sections:
            if section_name == name:
                return body
        return None


def load_stopwords(path: Path | str) -> FrozenSet[str]:
    """Read a stopword file: one word per line, ``#`` comments ignored."""

    path = Path(path)
    if not path.exists():
        raise CorpusError(f"Stopword file does not exist: {path}")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path} is not valid UTF-8: {exc}") from exc
    words = set()
    for line in text.splitlines():
        token = line.strip()
        if token and not token.startswith("#"):
            words.add(token.lower())
    return frozenset(words)


@lru_cache(maxsize=1)
def default_stopwords() -> FrozenSet[str]:
    """Return the bundled English stopword list."""

    source = resources.files("termbridge").joinpath("data/stopwords.txt")
    with resources.as_file(source) as path:
        return load_stopwords(path)


@dataclass(frozen=True)
class PreprocessConfig:
    """Options controlling :func:`preprocess`."""

    lowercase: bool = True
    stopwords: FrozenSet[str] = field(default_factory=default_stopwords)
    stem: bool = True
    stemmer_mode: str = "martin"

    def validate(self) -> None:
        if self.stemmer_mode not in STEMMER_MODES:
            raise ConfigurationError(
                f"Unknown stemmer mode {self.stemmer_mode!r}; choose from {sorted(STEMMER_MODES)}"
            )

    def to_dict(self) -> Dict[str, object]:
        return {
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords),
            "stem": self.stem,
            "stemmer_mode": self.stemmer_mode,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "PreprocessConfig":
        stopwords = data.get("stopwords")
        return cls(
            lowercase=bool(data.get("lowercase", True)),
            stopwords=frozenset(stopwords) if stopwords is not None else default_stopwords(),
            stem=bool(data.get("stem", True)),
            stemmer_mode=str(data.get("stemmer_mode", "martin")),
        )

    def fingerprint(self) -> str:
        encoded = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(encoded).hexdigest()


@dataclass
class TokenizedCorpus:
    """Preprocessed sentences plus their token counts."""

    sentences: List[List[str]]
    token_counts: Counter = field(default_factory=Counter)
    config_fingerprint: str = ""

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[str]], fingerprint: str = "") -> "TokenizedCorpus":
        materialised = [list(sentence) for sentence in sentences if sentence]
        counts = Counter(token for sentence in materialised for token in sentence)
        return cls(sentences=materialised, token_counts=counts, config_fingerprint=fingerprint)

    @property
    def total_tokens(self) -> int:
        return sum(self.token_counts.values())

    def __len__(self) -> int:
        return len(self.sentences)

    def to_lines(self) -> List[str]:
        return [" ".join(sentence) for sentence in self.sentences]

    def write(self, path: Path | str, run_config: Optional[Mapping[str, object]] = None) -> Path:
        """Write the corpus file and its ``.meta.json`` companion."""

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = "".join(f"{line}\n" for line in self.to_lines())
        path.write_text(body, encoding="utf-8", newline="\n")
        meta = {
            "config_fingerprint": self.config_fingerprint,
            "sentences": len(self.sentences),
            "total_tokens": self.total_tokens,
            "token_counts": dict(sorted(self.token_counts.items())),
            "run_config": dict(run_config or {}),
        }
        meta_path = corpus_meta_path(path)
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
        return meta_path

    @classmethod
    def read(cls, path: Path | str) -> "TokenizedCorpus":
        path = Path(path)
        if not path.exists():
            raise CorpusError(f"Corpus file does not exist: {path}")
        text = _read_utf8(path)
        sentences = [line.split() for line in text.splitlines() if line.strip()]
        fingerprint = ""
        meta_path = corpus_meta_path(path)
        if meta_path.exists():
            fingerprint = json.loads(meta_path.read_text(encoding="utf-8")).get("config_fingerprint", "")
        return cls.from_sentences(sentences, fingerprint)


def corpus_meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def canonical_header(pattern: str) -> str:
    """``"HISTORY OF PRESENT ILLNESS:"`` -> ``"History of present illness"``."""

    text = " ".join(pattern.strip().rstrip(":").split())
    return text[:1].upper() + text[1:].lower()


def _compile_headers(
    header_set: Sequence[str],
    aliases: Optional[Mapping[str, str]],
) -> List[Tuple[str, str]]:
    if not header_set:
        raise ConfigurationError("At least one section header pattern is required")
    lookup = {key.lower(): value for key, value in DEFAULT_HEADER_ALIASES.items()}
    extra = {key.strip().lower(): value for key, value in (aliases or {}).items()}
    lookup.update(extra)

    compiled: Dict[str, str] = {}
    for pattern in header_set:
        key = pattern.strip().lower()
        if key:
            compiled[key] = lookup.get(key, canonical_header(pattern))
    for key, canonical in extra.items():
        compiled[key] = canonical
    # longest first so "discharge instructions:" wins over shorter variants
    return sorted(compiled.items(), key=lambda item: (-len(item[0]), item[0]))


def known_sections(
    header_set: Sequence[str] = DEFAULT_HEADERS,
    aliases: Optional[Mapping[str, str]] = None,
) -> List[str]:
    """Canonical section names reachable with the given headers."""

    return sorted({canonical for _, canonical in _compile_headers(header_set, aliases)} | {PREAMBLE})


def segment_sections(
    doc: RawDocument,
    header_set: Sequence[str] = DEFAULT_HEADERS,
    aliases: Optional[Mapping[str, str]] = None,
) -> SectionedDocument:
    """Split a note into sections at lines starting with a known header.

    Header matching is a case-insensitive prefix match on the line after
    leading whitespace. Text before the first header becomes ``_preamble``.
    """

    patterns = _compile_headers(header_set, aliases)
    if not doc.text.strip():
        return SectionedDocument(id=doc.id)

    sections: List[Tuple[str, str]] = []
    current_name = PREAMBLE
    current_lines: List[str] = []

    def flush() -> None:
        body = "".join(current_lines)
        if current_name == PREAMBLE and not body.strip():
            return
        sections.append((current_name, body))

    for line in doc.text.splitlines(keepends=True):
        stripped = line.lstrip()
        match = next(
            ((pattern, canonical) for pattern, canonical in patterns if stripped[: len(pattern)].lower() == pattern),
            None,
        )
        if match is None:
            current_lines.append(line)
            continue

        flush()
        pattern, canonical = match
        remainder = stripped[len(pattern):]
        current_name = canonical
        current_lines = [remainder.lstrip(" \t")] if remainder.strip() else []

    flush()
    return SectionedDocument(id=doc.id, sections=tuple(sections))


@lru_cache(maxsize=None)
def _stemmer(mode: str) -> PorterStemmer:
    return PorterStemmer(mode=STEMMER_MODES[mode])


def porter_stem(word: str, mode: str = "martin") -> str:
    """Return the Porter stem of a lowercase word."""

    if mode not in STEMMER_MODES:
        raise ConfigurationError(f"Unknown stemmer mode {mode!r}")
    return _stemmer(mode).stem(word, to_lowercase=False)


def split_sentences(text: str) -> List[str]:
    return [chunk.strip() for chunk in _SENTENCE_BOUNDARY.split(text) if chunk and chunk.strip()]


def tokenize(sentence: str) -> List[str]:
    """Split on whitespace and hard separators, keeping ``40mg``/``c/w`` whole."""

    tokens: List[str] = []
    for chunk in _TOKEN_SEPARATORS.split(sentence):
        token = chunk.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def _stemmable(token: str) -> bool:
    return token.isascii() and token.isalpha() and token.islower()


def preprocess(text: str, config: Optional[PreprocessConfig] = None) -> List[List[str]]:
    """Sentence-split, tokenise, filter and stem ``text``."""

    config = config or PreprocessConfig()
    stopwords = config.stopwords
    output: List[List[str]] = []
    for sentence in split_sentences(text):
        kept: List[str] = []
        for token in tokenize(sentence):
            if config.lowercase:
                token = token.lower()
            if token.lower() in stopwords:
                continue
            if config.stem and _stemmable(token):
                token = porter_stem(token, config.stemmer_mode)
                # a stem can collide with a stopword ("is" style reductions)
                if not token or token in stopwords:
                    continue
            kept.append(token)
        if kept:
            output.append(kept)
    return output


def normalize_term(term: str, config: Optional[PreprocessConfig] = None) -> str:
    """Apply the corpus normalisation to a single dictionary or query term."""

    config = config or PreprocessConfig()
    token = term.strip()
    if config.lowercase:
        token = token.lower()
    if config.stem and _stemmable(token):
        token = porter_stem(token, config.stemmer_mode)
    return token


def _read_utf8(path: Path) -> str:
    try:
        return path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path} is not valid UTF-8: {exc}") from exc


def load_documents(path: Path | str, delimiter: str = DEFAULT_DOCUMENT_DELIMITER) -> List[RawDocument]:
    """Read notes from a directory (one per file) or a delimited single file."""

    path = Path(path)
    if not path.exists():
        raise CorpusError(f"Input path does not exist: {path}")

    documents: List[RawDocument] = []
    if path.is_dir():
        for file_path in sorted(p for p in path.iterdir() if p.is_file() and not p.name.startswith(".")):
            documents.append(RawDocument(id=file_path.stem, text=_read_utf8(file_path)))
    else:
        chunks: List[List[str]] = [[]]
        for line in _read_utf8(path).splitlines(keepends=True):
            if line.strip() == delimiter:
                chunks.append([])
            else:
                chunks[-1].append(line)
        bodies = ["".join(chunk) for chunk in chunks if "".join(chunk).strip()]
        documents = [RawDocument(id=f"{path.stem}:{index}", text=body) for index, body in enumerate(bodies, start=1)]

    seen = set()
    for doc in documents:
        if doc.id in seen:
            raise CorpusError(f"Duplicate document id {doc.id!r} in {path}")
        seen.add(doc.id)
    logger.info("loaded documents", extra={"payload": {"path": str(path), "documents": len(documents)}})
    return documents


def build_corpus(
    documents: Iterable[RawDocument],
    sections: Sequence[str],
    config: Optional[PreprocessConfig] = None,
    *,
    header_set: Sequence[str] = DEFAULT_HEADERS,
    aliases: Optional[Mapping[str, str]] = None,
) -> TokenizedCorpus:
    """Preprocess the named sections of every document into one corpus."""

    config = config or PreprocessConfig()
    config.validate()
    wanted = {name.strip().lower() for name in sections}
    sentences: List[List[str]] = []
    for doc in documents:
        for name, body in segment_sections(doc, header_set, aliases).sections:
            if name.lower() in wanted:
                sentences.extend(preprocess(body, config))
    return TokenizedCorpus.from_sentences(sentences, config.fingerprint())
