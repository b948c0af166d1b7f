"""End-to-end run of one reference profile over a set of notes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .alignment import AlignmentMatrix, extract_anchors, iterative_procrustes
from .config import DEFAULT_PROFILE, ReferenceProfile, get_profile
from .corpus import (
    DEFAULT_DOCUMENT_DELIMITER,
    SECTION_GROUPS,
    PreprocessConfig,
    TokenizedCorpus,
    build_corpus,
    load_documents,
    normalize_term,
)
from .errors import AlignmentError
from .evaluation import EvalReport, GoldDictionary, precision_at_k
from .skipgram import SkipGramTrainer
from .storage import save_alignment, write_dictionary, write_json
from .vector_io import save_vectors

logger = logging.getLogger(__name__)


@dataclass
class PipelineOutcome:
    alignment: AlignmentMatrix
    paths: Dict[str, Path] = field(default_factory=dict)
    report: Optional[EvalReport] = None


class ReproductionPipeline:
    """Preprocess, train both sides, align from identical strings, evaluate.

    Every stage writes its artifact into ``workdir`` in the same formats the
    individual commands use, so a run can be resumed or inspected stage by
    stage.
    """

    def __init__(
        self,
        workdir: Path | str,
        profile: ReferenceProfile | str = DEFAULT_PROFILE,
        *,
        seed: int = 0,
        preprocess_config: Optional[PreprocessConfig] = None,
        bucket_count: Optional[int] = None,
        delimiter: str = DEFAULT_DOCUMENT_DELIMITER,
        run_config: Optional[Mapping[str, Any]] = None,
    ) -> None:
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.profile = get_profile(profile) if isinstance(profile, str) else profile
        self.seed = seed
        self.preprocess_config = preprocess_config or PreprocessConfig()
        self.bucket_count = bucket_count
        self.delimiter = delimiter
        self.run_config = dict(run_config or {})

    def _corpora(self, input_path: Path | str) -> Dict[str, TokenizedCorpus]:
        documents = load_documents(input_path, self.delimiter)
        corpora = {}
        for group, sections in SECTION_GROUPS.items():
            corpus = build_corpus(documents, sections, self.preprocess_config)
            logger.info("built corpus", extra={"payload": {"group": group, "sentences": len(corpus)}})
            corpora[group] = corpus
        return corpora

    def run(self, input_path: Path | str, gold_path: Optional[Path | str] = None) -> PipelineOutcome:
        paths: Dict[str, Path] = {}
        corpora = self._corpora(input_path)
        for group, corpus in corpora.items():
            paths[f"{group}_corpus"] = self.workdir / f"{group}.txt"
            corpus.write(paths[f"{group}_corpus"], self.run_config)

        spaces = {}
        for side, group in (("source", "professional"), ("target", "consumer")):
            config = self.profile.train_config(side, self.seed, self.bucket_count)
            spaces[side] = SkipGramTrainer(config).train(corpora[group])
            paths[f"{side}_vectors"] = self.workdir / f"{group}.vec"
            save_vectors(spaces[side], paths[f"{side}_vectors"], run_config=self.run_config)

        anchors = extract_anchors(spaces["source"], spaces["target"])
        if not anchors:
            raise AlignmentError("No anchors: the two vocabularies share no identical strings")
        paths["anchors"] = self.workdir / "anchors.tsv"
        write_dictionary(anchors, paths["anchors"], self.run_config)

        alignment = iterative_procrustes(
            spaces["source"], spaces["target"], anchors, iterations=self.profile.refine_iterations
        )
        paths["alignment"] = self.workdir / "alignment.txt"
        save_alignment(alignment, paths["alignment"], self.run_config)

        report = None
        if gold_path is not None:
            gold = GoldDictionary.from_tsv(
                gold_path, normalizer=lambda term: normalize_term(term, self.preprocess_config)
            )
            report = precision_at_k(
                alignment,
                spaces["source"],
                spaces["target"],
                gold,
                metric=self.profile.metric,
                config=self.run_config,
            )
            paths["report"] = self.workdir / "report.json"
            write_json(paths["report"], report.to_dict())
        return PipelineOutcome(alignment=alignment, paths=paths, report=report)
