"""Termbridge – aligning professional and consumer word embedding spaces."""

from .adversarial import (
    AdvConfig,
    AdversarialDependencyError,
    AdversarialResult,
    adversarial_align,
    adversarial_then_refine,
)
from .alignment import (
    AlignmentMatrix,
    AnchorDictionary,
    Translator,
    align_with_anchors,
    build_dictionary_csls,
    extract_anchors,
    iterative_procrustes,
    least_squares,
    procrustes,
    refine_from_mapping,
    translate,
)
from .config import REFERENCE_PROFILES, ReferenceProfile, RunConfig, get_profile, resolve_config
from .corpus import (
    PreprocessConfig,
    RawDocument,
    SectionedDocument,
    TokenizedCorpus,
    build_corpus,
    load_documents,
    normalize_term,
    preprocess,
    segment_sections,
)
from .embeddings import EmbeddingSpace, Vocabulary, build_vocab, subword_ngrams, word_vector
from .errors import (
    ConfigurationError,
    DataError,
    NumericalError,
    TermbridgeError,
)
from .evaluation import EvalReport, GoldDictionary, neighbor_table, pca_project, precision_at_k
from .metrics import csls, hubness_report, nearest_neighbors
from .pipeline import ReproductionPipeline
from .skipgram import SkipGramTrainer, TrainConfig, train_skipgram
from .storage import load_alignment, save_alignment
from .synthetic import SyntheticPair, make_rotation_pair
from .vector_io import load_vectors, save_vectors

__all__ = [
    "RawDocument",
    "SectionedDocument",
    "PreprocessConfig",
    "TokenizedCorpus",
    "segment_sections",
    "preprocess",
    "normalize_term",
    "load_documents",
    "build_corpus",
    "Vocabulary",
    "EmbeddingSpace",
    "build_vocab",
    "subword_ngrams",
    "word_vector",
    "TrainConfig",
    "SkipGramTrainer",
    "train_skipgram",
    "load_vectors",
    "save_vectors",
    "csls",
    "nearest_neighbors",
    "hubness_report",
    "AnchorDictionary",
    "AlignmentMatrix",
    "Translator",
    "procrustes",
    "least_squares",
    "extract_anchors",
    "align_with_anchors",
    "build_dictionary_csls",
    "iterative_procrustes",
    "refine_from_mapping",
    "translate",
    "AdvConfig",
    "AdversarialResult",
    "AdversarialDependencyError",
    "adversarial_align",
    "adversarial_then_refine",
    "GoldDictionary",
    "EvalReport",
    "precision_at_k",
    "neighbor_table",
    "pca_project",
    "SyntheticPair",
    "make_rotation_pair",
    "RunConfig",
    "ReferenceProfile",
    "REFERENCE_PROFILES",
    "get_profile",
    "resolve_config",
    "ReproductionPipeline",
    "save_alignment",
    "load_alignment",
    "TermbridgeError",
    "ConfigurationError",
    "DataError",
    "NumericalError",
]
