"""Command line interface for the termbridge pipeline."""
from __future__ import annotations

import argparse
import logging
import sys
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional

from .adversarial import AdvConfig, adversarial_align, adversarial_then_refine, save_discriminator
from .alignment import AnchorDictionary, align_with_anchors, extract_anchors, iterative_procrustes
from .config import (
    REFERENCE_PROFILES,
    VERSION,
    RunConfig,
    get_profile,
    resolve_config,
)
from .corpus import (
    SECTION_GROUPS,
    PreprocessConfig,
    TokenizedCorpus,
    build_corpus,
    default_stopwords,
    known_sections,
    load_documents,
    load_stopwords,
    normalize_term,
)
from .embeddings import MODES, NORMALIZATION_POLICIES
from .errors import EXIT_OK, EXIT_USAGE, AlignmentError, ConfigurationError, TermbridgeError, exit_code_for
from .evaluation import GoldDictionary, NeighborTable, neighbor_table, pca_project, precision_at_k
from .logs import configure_logging
from .metrics import METRICS
from .pipeline import ReproductionPipeline
from .skipgram import SkipGramTrainer, TrainConfig
from .storage import (
    load_alignment,
    read_dictionary,
    read_terms,
    save_alignment,
    write_dictionary,
    write_json,
    write_jsonl,
    write_text,
)
from .synthetic import make_rotation_pair, write_pair
from .vector_io import load_vectors, save_vectors

logger = logging.getLogger(__name__)

LOG_LEVELS = ("debug", "info", "warning", "error")
# argparse bookkeeping that never reaches RunConfig
_PARSER_KEYS = {"func", "command", "config", "log_level"}


class TermbridgeArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with 1 instead of argparse's 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def non_negative_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"cannot be negative, got {value}")
    return value


def int_list(raw: str) -> List[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from None
    if not values or any(value < 1 for value in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {raw!r}")
    return values


def word_list(raw: str) -> List[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _paired_flag(parser: argparse.ArgumentParser, name: str, help_text: str) -> None:
    dest = name.replace("-", "_")
    parser.add_argument(f"--{name}", dest=dest, action="store_true", default=argparse.SUPPRESS, help=help_text)
    parser.add_argument(f"--no-{name}", dest=dest, action="store_false", default=argparse.SUPPRESS)


def _preprocess_config(run: RunConfig) -> PreprocessConfig:
    stopwords = run["stopwords"]
    if stopwords is None:
        words = default_stopwords()
    elif str(stopwords).lower() == "none":
        words = frozenset()
    else:
        words = load_stopwords(stopwords)
    return PreprocessConfig(
        lowercase=run["lowercase"], stopwords=words, stem=run["stem"], stemmer_mode=run["stemmer"]
    )


def cmd_preprocess(run: RunConfig) -> None:
    run.require("input")
    config = _preprocess_config(run)
    config.validate()
    documents = load_documents(run["input"], run["delimiter"])

    sections, outputs = list(run["sections"]), list(run["output"])
    if len(sections) != len(outputs):
        raise ConfigurationError("--sections and --output must be given the same number of times")
    if sections:
        groups = [(word_list(group), Path(out)) for group, out in zip(sections, outputs)]
    else:
        out_dir = Path(run["output_dir"])
        groups = [(list(names), out_dir / f"{name}.txt") for name, names in SECTION_GROUPS.items()]

    known = {name.lower() for name in known_sections()}
    for names, out in groups:
        unknown = [name for name in names if name.strip().lower() not in known]
        if unknown:
            logger.warning("unknown section name", extra={"payload": {"sections": unknown, "output": str(out)}})
        corpus = build_corpus(documents, names, config)
        corpus.write(out, run.to_dict())
        logger.info(
            "wrote corpus",
            extra={"payload": {"output": str(out), "sentences": len(corpus), "tokens": corpus.total_tokens}},
        )
        print(f"{out}: {len(corpus)} sentences, {corpus.total_tokens} tokens")


def cmd_train(run: RunConfig) -> None:
    run.require("corpus", "output")
    config = TrainConfig(
        dim=run["dim"],
        window=run["window"],
        min_count=run["min_count"],
        subsample_threshold=run["subsample"],
        negatives=run["negatives"],
        learning_rate=run["lr"],
        epochs=run["epochs"],
        mode=run["mode"],
        n_min=run["minn"],
        n_max=run["maxn"],
        bucket_count=run["buckets"],
        seed=run.seed,
        workers=run["workers"],
    )
    config.validate()
    corpus = TokenizedCorpus.read(run["corpus"])
    trainer = SkipGramTrainer(config)
    space = trainer.train(corpus)
    output = Path(run["output"])
    save_vectors(space, output, binary_sidecar=run["binary"], run_config=run.to_dict())
    write_jsonl(output.with_name(output.name + ".train.jsonl"), trainer.history)
    print(f"{output}: {len(space)} words, dim {space.dim}, {len(trainer.history)} epochs")


def _load_anchors(run: RunConfig, src, tgt) -> AnchorDictionary:
    if run["anchors"] == "auto":
        return extract_anchors(src, tgt, run["max_anchors"] or None)
    return read_dictionary(run["anchors"], provenance="gold")


def cmd_align(run: RunConfig) -> None:
    run.require("src", "tgt", "output")
    src = load_vectors(run["src"])
    tgt = load_vectors(run["tgt"])
    output = Path(run["output"])
    iterations = run["refine_iters"]

    if run["method"] == "procrustes":
        anchors = _load_anchors(run, src, tgt)
        if not anchors:
            raise AlignmentError("No anchors: the source and target vocabularies share no anchor pairs")
        write_dictionary(anchors, output.with_name(output.name + ".anchors.tsv"), run.to_dict())
        if iterations > 0:
            alignment = iterative_procrustes(
                src, tgt, anchors, iterations, run["vocab_cap"], csls_k=run["csls_k"], normalize=run["normalize"]
            )
            write_jsonl(output.with_name(output.name + ".iterations.jsonl"), alignment.history)
        else:
            alignment = align_with_anchors(src, tgt, anchors, normalize=run["normalize"])
    elif run["method"] == "adversarial":
        adv_config = AdvConfig(
            lr_discriminator=run["lr_discriminator"],
            lr_generator=run["lr_generator"],
            batch_size=run["batch_size"],
            steps_per_epoch=run["adv_steps"],
            epochs=run["adv_epochs"],
            discriminator_steps=run["dis_steps"],
            orthogonalization_beta=run["beta"],
            smoothing=run["smoothing"],
            seed=run.seed,
            hidden=run["hidden"],
            dropout_rate=run["dropout"],
            leaky_slope=run["leaky_slope"],
            vocab_cap=run["vocab_cap"],
            csls_k=run["csls_k"],
            normalize=run["normalize"],
        )
        adv_config.validate()
        if iterations > 0:
            result = adversarial_then_refine(src, tgt, adv_config, iterations, run["vocab_cap"])
        else:
            result = adversarial_align(src, tgt, adv_config)
        alignment = result.alignment
        write_jsonl(output.with_name(output.name + ".epochs.jsonl"), result.history)
        output.parent.mkdir(parents=True, exist_ok=True)
        save_discriminator(result.discriminator, output)
    else:
        raise ConfigurationError(f"Unknown alignment method {run['method']!r}")

    save_alignment(alignment, output, run.to_dict())
    print(
        f"{output}: method {alignment.method}, orthogonal {str(alignment.orthogonal).lower()}, "
        f"status {alignment.status}, iterations {alignment.iterations_used}, dictionary {alignment.dictionary_size}"
    )


def cmd_evaluate(run: RunConfig) -> None:
    run.require("src", "tgt", "map", "gold")
    src = load_vectors(run["src"])
    tgt = load_vectors(run["tgt"])
    alignment = load_alignment(run["map"])
    normalizer = None
    if run["normalize_gold"]:
        term_config = PreprocessConfig(lowercase=run["lowercase"], stem=run["stem"], stemmer_mode=run["stemmer"])
        term_config.validate()
        normalizer = partial(normalize_term, config=term_config)
    gold = GoldDictionary.from_tsv(run["gold"], normalizer=normalizer)
    report = precision_at_k(
        alignment,
        src,
        tgt,
        gold,
        ks=run["k"],
        metric=run["metric"],
        csls_k=run["csls_k"],
        vocab_cap=run["vocab_cap"],
        config=run.to_dict(),
    )
    if run["report"]:
        write_json(run["report"], report.to_dict())
    print(report.summary_line())
    if report.skipped:
        print(f"{len(report.skipped)} of {len(gold)} gold terms skipped (out of vocabulary)")


def cmd_retrieve(run: RunConfig) -> None:
    run.require("src", "tgt", "map")
    src = load_vectors(run["src"])
    tgt = load_vectors(run["tgt"])
    alignment = load_alignment(run["map"])
    table = neighbor_table(
        alignment,
        src,
        tgt,
        run["query"],
        k=run["k"],
        metric=run["metric"],
        csls_k=run["csls_k"],
        vocab_cap=run["vocab_cap"],
    )
    if all(column.neighbors is None for column in table.columns):
        logger.warning("no query could be resolved", extra={"payload": {"queries": list(run["query"])}})
        table = NeighborTable(columns=[], k=table.k)

    if run["output"]:
        write_text(run["output"], table.to_tsv(), run.to_dict())
    if run["jsonl"]:
        records = [
            {
                "query": column.query,
                "metric": run["metric"],
                "k": run["k"],
                "neighbors": [[word, score] for word, score in column.neighbors],
            }
            for column in table.columns
            if column.neighbors is not None
        ]
        write_jsonl(run["jsonl"], records)
    print(table.render(), end="")


def cmd_export_pca(run: RunConfig) -> None:
    run.require("src", "tgt", "map", "terms", "out")
    src = load_vectors(run["src"])
    tgt = load_vectors(run["tgt"])
    alignment = load_alignment(run["map"])
    terms = read_terms(run["terms"])
    src_n = src.normalized(alignment.normalization)
    tgt_n = tgt.normalized(alignment.normalization)

    point_sets: Dict[str, List[Any]] = {"source": [], "target": []}
    for word in terms["source"]:
        lookup = src_n.lookup(word)
        if lookup is None or lookup.degenerate:
            logger.warning("term skipped", extra={"payload": {"side": "source", "word": word}})
            continue
        point_sets["source"].append((word, alignment.apply(lookup.vector)))
    for word in terms["target"]:
        lookup = tgt_n.lookup(word)
        if lookup is None or lookup.degenerate:
            logger.warning("term skipped", extra={"payload": {"side": "target", "word": word}})
            continue
        point_sets["target"].append((word, lookup.vector))

    projection = pca_project(point_sets, out_dims=run["dims"])
    write_text(run["out"], projection.to_tsv(), run.to_dict())
    print(f"{run['out']}: {len(projection.words)} points")


def cmd_synthesize(run: RunConfig) -> None:
    run.require("out_dir")
    pair = make_rotation_pair(
        n_words=run["words"],
        d=run["dim"],
        noise_sigma=run["noise"],
        anchor_fraction=run["anchor_fraction"],
        seed=run.seed,
        frequency_weighted=run["frequency_weighted"],
        clusters=run["clusters"],
    )
    paths = write_pair(pair, run["out_dir"], run.to_dict())
    for name, path in paths.items():
        print(f"{name}: {path}")


def cmd_profiles(run: RunConfig) -> None:
    for name in sorted(REFERENCE_PROFILES):
        profile = REFERENCE_PROFILES[name]
        print(f"{name:<12} {profile.description} (reported {profile.reported_line()})")


def cmd_reproduce(run: RunConfig) -> None:
    run.require("input", "workdir")
    profile = get_profile(run["profile"])
    pipeline = ReproductionPipeline(
        run["workdir"],
        profile,
        seed=run.seed,
        bucket_count=run["buckets"],
        delimiter=run["delimiter"],
        run_config=run.to_dict(),
    )
    outcome = pipeline.run(run["input"], run["gold"])
    print(f"alignment: {outcome.paths['alignment']}")
    if outcome.report is not None:
        print(f"measured: {outcome.report.summary_line()}")
    print(f"reported: {profile.reported_line()}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat key = value settings file (default: $TERMBRIDGE_CONFIG)")
    common.add_argument("--log-level", choices=LOG_LEVELS, default="info")

    parser = TermbridgeArgumentParser(
        prog="termbridge", description="Align professional and consumer word embedding spaces"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=TermbridgeArgumentParser)
    S = argparse.SUPPRESS

    preprocess = sub.add_parser("preprocess", parents=[common], help="Split notes into tokenized section corpora")
    preprocess.add_argument("--input", default=S, help="Directory of notes or one delimited file")
    preprocess.add_argument(
        "--sections", action="append", default=S, help="Comma-separated section names for one output group"
    )
    preprocess.add_argument("--output", action="append", default=S, help="Corpus file for the matching --sections")
    preprocess.add_argument("--output-dir", default=S, help="Where default section groups are written")
    preprocess.add_argument("--stopwords", default=S, help="Stopword file, or 'none'")
    preprocess.add_argument("--stemmer", choices=("martin", "original"), default=S)
    preprocess.add_argument("--delimiter", default=S)
    _paired_flag(preprocess, "stem", "Apply Porter stemming")
    _paired_flag(preprocess, "lowercase", "Lowercase tokens")
    preprocess.set_defaults(func=cmd_preprocess)

    train = sub.add_parser("train", parents=[common], help="Train skip-gram vectors on a corpus file")
    train.add_argument("--corpus", default=S)
    train.add_argument("--mode", choices=MODES, default=S)
    train.add_argument("--dim", type=positive_int, default=S)
    train.add_argument("--window", type=positive_int, default=S)
    train.add_argument("--epochs", type=positive_int, default=S)
    train.add_argument("--lr", type=float, default=S)
    train.add_argument("--min-count", type=non_negative_int, default=S)
    train.add_argument("--subsample", type=float, default=S)
    train.add_argument("--negatives", type=positive_int, default=S)
    train.add_argument("--minn", type=positive_int, default=S)
    train.add_argument("--maxn", type=positive_int, default=S)
    train.add_argument("--buckets", type=positive_int, default=S)
    train.add_argument("--workers", type=positive_int, default=S)
    train.add_argument("--seed", type=int, default=S)
    train.add_argument("--output", default=S)
    _paired_flag(train, "binary", "Also write the binary vector sidecar")
    train.set_defaults(func=cmd_train)

    align = sub.add_parser("align", parents=[common], help="Learn a map from source to target space")
    align.add_argument("--src", default=S)
    align.add_argument("--tgt", default=S)
    align.add_argument("--method", choices=("procrustes", "adversarial"), default=S)
    align.add_argument("--refine-iters", type=non_negative_int, default=S)
    align.add_argument("--anchors", default=S, help="'auto' for identical strings, or a source<TAB>target file")
    align.add_argument("--max-anchors", type=non_negative_int, default=S)
    align.add_argument("--vocab-cap", type=positive_int, default=S)
    align.add_argument("--csls-k", type=positive_int, default=S)
    align.add_argument("--normalize", choices=NORMALIZATION_POLICIES, default=S)
    align.add_argument("--seed", type=int, default=S)
    align.add_argument("--output", default=S)
    align.add_argument("--adv-epochs", type=positive_int, default=S)
    align.add_argument("--adv-steps", type=positive_int, default=S)
    align.add_argument("--batch-size", type=positive_int, default=S)
    align.add_argument("--lr-discriminator", type=float, default=S)
    align.add_argument("--lr-generator", type=float, default=S)
    align.add_argument("--dis-steps", type=positive_int, default=S)
    align.add_argument("--beta", type=float, default=S)
    align.add_argument("--smoothing", type=float, default=S)
    align.add_argument("--hidden", type=positive_int, default=S)
    align.add_argument("--dropout", type=float, default=S)
    align.add_argument("--leaky-slope", type=float, default=S)
    align.set_defaults(func=cmd_align)

    evaluate = sub.add_parser("evaluate", parents=[common], help="Precision@k against a gold dictionary")
    evaluate.add_argument("--src", default=S)
    evaluate.add_argument("--tgt", default=S)
    evaluate.add_argument("--map", default=S)
    evaluate.add_argument("--gold", default=S)
    evaluate.add_argument("--k", type=int_list, default=S, help="Comma-separated cut-offs, e.g. 1,5,10")
    evaluate.add_argument("--metric", choices=METRICS, default=S)
    evaluate.add_argument("--csls-k", type=positive_int, default=S)
    evaluate.add_argument("--vocab-cap", type=positive_int, default=S)
    evaluate.add_argument("--report", default=S)
    evaluate.add_argument("--stemmer", choices=("martin", "original"), default=S)
    _paired_flag(evaluate, "normalize-gold", "Normalise gold terms like the corpus")
    _paired_flag(evaluate, "stem", "Stem gold terms")
    _paired_flag(evaluate, "lowercase", "Lowercase gold terms")
    evaluate.set_defaults(func=cmd_evaluate)

    retrieve = sub.add_parser("retrieve", parents=[common], help="Nearest target words of source queries")
    retrieve.add_argument("--src", default=S)
    retrieve.add_argument("--tgt", default=S)
    retrieve.add_argument("--map", default=S)
    retrieve.add_argument("--query", type=word_list, action="extend", default=S)
    retrieve.add_argument("--k", type=positive_int, default=S)
    retrieve.add_argument("--metric", choices=METRICS, default=S)
    retrieve.add_argument("--csls-k", type=positive_int, default=S)
    retrieve.add_argument("--vocab-cap", type=positive_int, default=S)
    retrieve.add_argument("--output", default=S, help="Neighbour table as TSV")
    retrieve.add_argument("--jsonl", default=S, help="Neighbour lists as JSON lines")
    retrieve.set_defaults(func=cmd_retrieve)

    export_pca = sub.add_parser("export-pca", parents=[common], help="2-D coordinates of labelled terms")
    export_pca.add_argument("--src", default=S)
    export_pca.add_argument("--tgt", default=S)
    export_pca.add_argument("--map", default=S)
    export_pca.add_argument("--terms", default=S, help="source|target<TAB>word lines")
    export_pca.add_argument("--out", default=S)
    export_pca.add_argument("--dims", type=positive_int, default=S)
    export_pca.set_defaults(func=cmd_export_pca)

    synthesize = sub.add_parser("synthesize", parents=[common], help="Write a planted-rotation vector pair")
    synthesize.add_argument("--words", type=positive_int, default=S)
    synthesize.add_argument("--dim", type=positive_int, default=S)
    synthesize.add_argument("--noise", type=float, default=S)
    synthesize.add_argument("--anchor-fraction", type=float, default=S)
    synthesize.add_argument("--clusters", type=non_negative_int, default=S)
    synthesize.add_argument("--seed", type=int, default=S)
    synthesize.add_argument("--out-dir", default=S)
    _paired_flag(synthesize, "frequency-weighted", "Attach Zipf word counts")
    synthesize.set_defaults(func=cmd_synthesize)

    profiles = sub.add_parser("profiles", parents=[common], help="List reference profiles")
    profiles.set_defaults(func=cmd_profiles)

    reproduce = sub.add_parser("reproduce", parents=[common], help="Run a reference profile end to end")
    reproduce.add_argument("--profile", choices=sorted(REFERENCE_PROFILES), default=S)
    reproduce.add_argument("--input", default=S)
    reproduce.add_argument("--gold", default=S)
    reproduce.add_argument("--workdir", default=S)
    reproduce.add_argument("--delimiter", default=S)
    reproduce.add_argument("--buckets", type=positive_int, default=S)
    reproduce.add_argument("--seed", type=int, default=S)
    reproduce.set_defaults(func=cmd_reproduce)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    values = {key: value for key, value in vars(args).items() if key not in _PARSER_KEYS}
    try:
        run = resolve_config(args.command, values, args.config)
        args.func(run)
    except TermbridgeError as exc:
        logger.debug("command failed", exc_info=True)
        print(f"termbridge: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
