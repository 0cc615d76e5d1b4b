# Licensed under a 3-clause BSD style license - see LICENSE.md
"""The ``biphone`` command.

Each pipeline stage is a subcommand reading its inputs from the
configuration file (``--config``) or from flags, which take precedence::

    biphone mine --lexicon cmudict.txt --pairs rtt_hi.tsv --l1 hi
    biphone train-pgm --lexicon cmudict.txt
    biphone corrupt --matrix out/matrix_hi.tsv --pgm out/pgm.tsv --word they
    biphone score-corpus --corpus sentences.txt --dictionary words.txt --candidates out/candidates_hi.tsv
    biphone noise --task boolq --task-file val.jsonl --candidates out/candidates_hi.tsv --seed 1
    biphone emit-mixture --corpus sentences.txt --wordfreq words.txt
    biphone report --scored out/scored.tsv --pool-size 1000

Artifacts are written atomically and one JSON summary line goes to
stdout.  The exit status is 0 on success, 1 for a usage or configuration
error and 2 for a data error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from biphone import align, bench_noiser, confusion, corpus, generator, pretrain_mix
from biphone.config import PipelineConfig, load_config
from biphone.errors import ConfigError, EmptyInputError
from biphone.formats import atomic_write
from biphone.phonology import PhonemeInventory, load_lexicon, merge_lexicons, normalize_word, write_rejects

__all__ = ["main"]

logger = logging.getLogger(__name__)

LOGGING_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

EXIT = {
    "OK": 0,
    "USAGE": 1,
    "DATA": 2,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT["USAGE"], f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("-c", "--config", type=Path, help="YAML pipeline configuration")
    parent.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging level (default INFO)")
    parent.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    parent.add_argument("--progress", action="store_true", help="show progress bars")
    parent.add_argument("--workers", dest="workers", type=int, help="worker processes (default: CPU count)")
    parent.add_argument("--seed", dest="seed", type=int, help="random seed")
    parent.add_argument("--output-dir", dest="paths.output_dir", type=Path, help="directory of the artifacts")
    parent.add_argument("--lexicon", dest="paths.lexicon", type=Path, help="CMUdict-format pronunciation lexicon")
    parent.add_argument("--extra-lexicon", dest="paths.extra_lexicons", type=Path, action="append", help="more lexicon entries, repeatable")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _common()
    parser = _Parser(prog="biphone", description="Generate and apply native-language-influenced misspellings.")
    commands = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    mine = commands.add_parser("mine", parents=[parent], help="mine a phoneme confusion matrix from round-trip pairs")
    mine.add_argument("--pairs", dest="paths.rtt_pairs", type=Path, help="original<TAB>roundtrip<TAB>pivot file")
    mine.add_argument("--l1", dest="confusion.l1", help="native language code (default: the pivot)")
    mine.add_argument("--l2", dest="confusion.l2", help="second language code (default en)")
    mine.add_argument("--top-k", dest="confusion.top_k", type=int, help="number of shifts kept (default 10)")
    mine.add_argument("--output", type=Path, help="matrix file (default OUTPUT_DIR/matrix_<l1>.tsv)")

    pgm = commands.add_parser("train-pgm", parents=[parent], help="align the lexicon and estimate the phoneme-grapheme model")
    pgm.add_argument("--max-chunk-len", dest="pgm.max_chunk_len", type=int, help="longest letter chunk (default 4)")
    pgm.add_argument("--max-iters", dest="pgm.max_iters", type=int, help="alignment passes (default 10)")
    pgm.add_argument("--empty-weight", dest="pgm.empty_weight", type=float, help="first-pass weight of the empty chunk (default 0.1)")
    pgm.add_argument("--output", type=Path, help="model file (default OUTPUT_DIR/pgm.tsv)")

    corrupt = commands.add_parser("corrupt", parents=[parent], help="generate misspellings of words")
    corrupt.add_argument("--matrix", dest="paths.matrix", type=Path, help="confusion matrix file")
    corrupt.add_argument("--pgm", dest="paths.pgm", type=Path, help="phoneme-grapheme model file")
    corrupt.add_argument("--word", action="append", help="a word to corrupt, repeatable")
    corrupt.add_argument("--words", dest="paths.words", type=Path, help="file of words, one per line")
    corrupt.add_argument("--corpus", dest="paths.corpus", type=Path, help="take the most frequent words of this corpus")
    corrupt.add_argument("--top-words", dest="corpus.top_words", type=int, help="how many corpus words (default 10000)")
    corrupt.add_argument("--beam-width", dest="generator.beam_width", type=int, help="candidates per word (default 10)")
    corrupt.add_argument("--min-prob", dest="generator.min_prob", type=float, help="drop candidates below this score")
    corrupt.add_argument("--merge", dest="generator.merge", choices=generator.CONSTANTS["MERGES"], help="combine paths of one spelling")
    corrupt.add_argument("--output", type=Path, help="candidate file (default OUTPUT_DIR/candidates_<l1>.tsv)")

    score = commands.add_parser("score-corpus", parents=[parent], help="find misspellings in a corpus and score them")
    score.add_argument("--corpus", dest="paths.corpus", type=Path, help="one sentence per line")
    score.add_argument("--dictionary", dest="paths.dictionary", type=Path, help="correct words, one per line")
    score.add_argument("--candidates", dest="paths.candidates", type=Path, action="append", help="candidate file, repeatable")
    score.add_argument("--reference-corpus", dest="paths.reference_corpus", type=Path, help="count n-grams here instead of the clean sentences")
    score.add_argument("--threshold", dest="thresholds", type=float, action="append", help="coverage threshold, repeatable")

    noise = commands.add_parser("noise", parents=[parent], help="add misspellings to a benchmark task file")
    noise.add_argument("--task", dest="noise.task", help="task name, e.g. boolq")
    noise.add_argument("--task-file", dest="paths.task_file", type=Path, help="JSONL task records")
    noise.add_argument("--split", dest="noise.split", help="split of the task file (default validation)")
    noise.add_argument("--field-map", dest="paths.field_map", type=Path, help="YAML map of task to field")
    noise.add_argument("--candidates", dest="paths.candidates", type=Path, action="append", help="candidate file, repeatable")
    noise.add_argument("--blocklist", dest="paths.blocklist", type=Path, help="vetoed word<TAB>misspelling pairs")
    noise.add_argument("--strategy", dest="noise.strategy", choices=bench_noiser.CONSTANTS["STRATEGIES"], help="how a replacement is picked")
    noise.add_argument("--output", type=Path, help="noised file (default OUTPUT_DIR/<task>.noised.jsonl)")

    mixture = commands.add_parser("emit-mixture", parents=[parent], help="write the pre-training mixture")
    mixture.add_argument("--corpus", dest="paths.corpus", type=Path, help="one sentence per line")
    mixture.add_argument("--wordfreq", dest="paths.wordfreq", type=Path, help="words by descending frequency")
    mixture.add_argument("--phoneme-fraction", dest="mixture.phoneme_fraction", type=float, help="share of phoneme examples (default 0.2)")
    mixture.add_argument("--max-examples", dest="mixture.max_examples", type=int, help="stop after this many examples")
    mixture.add_argument("--output", type=Path, help="JSONL file (default OUTPUT_DIR/mixture.jsonl)")

    report = commands.add_parser("report", parents=[parent], help="coverage table or noise audit")
    report.add_argument("--scored", type=Path, help="scored occurrence file")
    report.add_argument("--pool-size", type=int, help="sentences in the candidate pool")
    report.add_argument("--threshold", dest="thresholds", type=float, action="append", help="coverage threshold, repeatable")
    report.add_argument("--clean", type=Path, help="clean task file to audit")
    report.add_argument("--noised", type=Path, help="noised task file to audit")
    report.add_argument("--task", dest="noise.task", help="task of the audited files")
    report.add_argument("--candidates", dest="paths.candidates", type=Path, action="append", help="check replacements against these candidate files")
    report.add_argument("--output", type=Path, help="report file")
    return parser


def _configure(args) -> PipelineConfig:
    """Load the configuration and apply the dotted flag overrides."""
    config = load_config(args.config)
    data = config.model_dump()
    for key, value in vars(args).items():
        if "." not in key or value is None:
            continue
        block, name = key.split(".", 1)
        data[block][name] = value
    for key in ("workers", "seed"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    try:
        return PipelineConfig.model_validate(data)
    except ValueError as error:
        raise ConfigError(f"Invalid flags:\n{error}") from error


def _lexicon(config: PipelineConfig):
    paths = config.paths
    inventory = PhonemeInventory(paths.extra_phonemes, paths.extra_vowels)
    lex = load_lexicon(paths.lexicon, inventory)
    extras = [load_lexicon(path, inventory) for path in paths.extra_lexicons]
    return merge_lexicons(lex, *extras) if extras else lex


def _lines(path) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        return [line.rstrip("\r\n") for line in handle]


def _words(path) -> list[str]:
    """First column of a word list, blank and ``#`` lines skipped."""
    return [
        line.split("\t")[0].strip()
        for line in _lines(path)
        if line.strip() and not line.startswith("#")
    ]


def _candidates(paths) -> dict:
    merged: dict = {}
    for path in paths:
        for word, found in generator.read_candidates(path).items():
            merged.setdefault(word, []).extend(found)
    return merged


def run_mine(args, config):
    lex = _lexicon(config)
    pairs = confusion.read_rtt_pairs(config.paths.rtt_pairs)
    block = config.confusion
    matrix = confusion.mine_confusions(
        pairs,
        lex,
        config.alignment.params(),
        top_k=block.top_k,
        l1=block.l1,
        l2=block.l2,
        stress_sensitive=block.stress_sensitive,
        workers=config.workers,
    )
    output = args.output or config.paths.output_dir / f"matrix_{matrix.l1}.tsv"
    confusion.save_matrix(matrix, output)
    shifts = matrix.shifts()
    return {
        "l1": matrix.l1,
        "pairs": len(pairs),
        "shifts": len(shifts),
        "top_shift": f"{shifts[0][0]}>{shifts[0][1]}" if shifts else None,
        "output": str(output),
    }


def run_train_pgm(args, config):
    lex = _lexicon(config)
    segmentations, model = align.align_lexicon(
        lex,
        max_chunk_len=config.pgm.max_chunk_len,
        max_iters=config.pgm.max_iters,
        empty_weight=config.pgm.empty_weight,
        workers=config.workers,
        progress=args.progress,
    )
    output = args.output or config.paths.output_dir / "pgm.tsv"
    align.save_pgm(model, output)
    align.write_segmentations(segmentations, output.with_name("segmentations.tsv"))
    if lex.rejects:
        write_rejects(lex.rejects, output.with_name("lexicon_rejects.tsv"))
    return {
        "words": len(lex),
        "segmented": len(segmentations),
        "skipped": len(model.skipped),
        "phonemes": len(model.counts),
        "rejects": len(lex.rejects),
        "output": str(output),
    }


def run_corrupt(args, config):
    lex = _lexicon(config)
    matrix = confusion.load_matrix(config.paths.matrix, lex.inventory)
    model = align.load_pgm(config.paths.pgm, lex.inventory)
    if args.word:
        words = list(args.word)
    elif config.paths.words is not None:
        words = _words(config.paths.words)
    elif config.paths.corpus is not None:
        words = [word for word, _ in corpus.top_words(_lines(config.paths.corpus), config.corpus.top_words)]
    else:
        raise ConfigError("Give --word, paths.words or paths.corpus to choose the words to corrupt.")
    if not words:
        raise EmptyInputError("There are no words to corrupt.")
    results = generator.corrupt_batch(
        words,
        lex,
        matrix,
        model,
        config.generator.generator_config(),
        workers=config.workers,
        progress=args.progress,
    )
    output = args.output or config.paths.output_dir / f"candidates_{matrix.l1}.tsv"
    generator.write_candidates(results, output, l1=matrix.l1)
    summary = {
        "l1": matrix.l1,
        "words": len(words),
        "corrupted": len(results),
        "candidates": sum(map(len, results.values())),
        "output": str(output),
    }
    if args.word:
        summary["misspellings"] = {
            word: [candidate.misspelling for candidate in found]
            for word, found in results.items()
        }
    return summary


def run_score_corpus(args, config):
    sentences = _lines(config.paths.corpus)
    dictionary = {normalize_word(word) for word in _words(config.paths.dictionary)}
    index = corpus.build_misspelling_index(_candidates(config.paths.candidates), dictionary)
    pool, clean = corpus.split_pool(sentences, dictionary)
    if config.corpus.reference == "external":
        reference = _lines(config.paths.reference_corpus)
    else:
        reference = clean
    store = corpus.build_ngrams(reference, workers=config.workers)
    occurrences = list(corpus.retrieve_candidates(sentences, index, dictionary))
    scored = corpus.score_occurrences(store, occurrences)
    output_dir = config.paths.output_dir
    corpus.save_store(store, output_dir / "ngrams.tsv")
    corpus.write_scored(scored, output_dir / "scored.tsv")
    summary = {
        "sentences": len(sentences),
        "pool": len(pool),
        "occurrences": len(scored),
        "misspellings": len(index),
        "output": str(output_dir / "scored.tsv"),
    }
    if pool:
        table = corpus.coverage_report(scored, args.thresholds or config.corpus.thresholds, len(pool))
        _write_table(table, output_dir / "coverage.tsv")
        summary["coverage"] = table.to_dict(orient="records")
    return summary


def _write_table(table, path):
    with atomic_write(Path(path)) as handle:
        table.to_csv(handle, sep="\t", index=False)


def _noise_config(config):
    paths = config.paths
    fields = bench_noiser.load_field_map(paths.field_map) if paths.field_map else None
    blocklist = bench_noiser.load_blocklist(paths.blocklist) if paths.blocklist else frozenset()
    return config.noise.noise_config(config.seed, fields, blocklist)


def run_noise(args, config):
    cfg = _noise_config(config)
    task = config.noise.task
    lines = bench_noiser.read_jsonl_lines(config.paths.task_file)
    records = bench_noiser.parse_jsonl(lines)
    noised, stats = bench_noiser.noise_dataset(
        records, task, _candidates(config.paths.candidates), cfg, split=config.noise.split
    )
    output = args.output or config.paths.output_dir / f"{task}.noised.jsonl"
    bench_noiser.write_noised_jsonl(lines, records, noised, output)
    bench_noiser.write_stats(stats, output.with_name(f"{task}.stats.json"))
    return {**stats.to_report(), "output": str(output)}


def run_emit_mixture(args, config):
    lex = _lexicon(config)
    cfg = config.mixture.mixture_config(config.seed)
    examples = pretrain_mix.emit_mixture(
        _lines(config.paths.corpus), _words(config.paths.wordfreq), lex, cfg
    )
    output = args.output or config.paths.output_dir / "mixture.jsonl"
    counts = pretrain_mix.write_mixture(examples, output)
    total = sum(counts.values())
    return {
        **dict(sorted(counts.items())),
        "phoneme_share": counts[pretrain_mix.KEYS["PHONEME"]] / total if total else 0.0,
        "output": str(output),
    }


def run_report(args, config):
    if args.scored is not None:
        if not args.scored.exists():
            raise ConfigError(f"The scored file {args.scored} does not exist.")
        if args.pool_size is None:
            raise ConfigError("A coverage report needs --pool-size.")
        scored = corpus.read_scored(args.scored)
        table = corpus.coverage_report(scored, args.thresholds or config.corpus.thresholds, args.pool_size)
        output = args.output or config.paths.output_dir / "coverage.tsv"
        _write_table(table, output)
        logger.info("Coverage:\n%s", table.to_string(index=False))
        return {"coverage": table.to_dict(orient="records"), "output": str(output)}
    if args.clean is not None and args.noised is not None:
        for path in (args.clean, args.noised):
            if not path.exists():
                raise ConfigError(f"The task file {path} does not exist.")
        cfg = _noise_config(config)
        candidates = _candidates(config.paths.candidates) if config.paths.candidates else None
        stats = bench_noiser.audit_noise(
            bench_noiser.read_jsonl(args.clean),
            bench_noiser.read_jsonl(args.noised),
            config.noise.task,
            cfg,
            candidates,
        )
        output = args.output or config.paths.output_dir / f"{config.noise.task}.audit.json"
        bench_noiser.write_stats(stats, output)
        return {**stats.to_report(), "output": str(output)}
    raise ConfigError("The report needs --scored and --pool-size, or --clean and --noised.")


COMMANDS = {
    "mine": run_mine,
    "train-pgm": run_train_pgm,
    "corrupt": run_corrupt,
    "score-corpus": run_score_corpus,
    "noise": run_noise,
    "emit-mixture": run_emit_mixture,
    "report": run_report,
}


def main(argv=None) -> int:
    """Run one subcommand and return the exit status."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as stop:
        return int(stop.code or 0)
    level = "WARNING" if args.quiet else args.log_level
    logging.basicConfig(format=LOGGING_FORMAT, level=level)
    try:
        config = _configure(args)
        config.validate_inputs(args.subcommand)
        summary = COMMANDS[args.subcommand](args, config)
    except ConfigError as error:
        logger.error("%s", error)
        return EXIT["USAGE"]
    except (ValueError, OSError) as error:
        logger.error("%s", error)
        return EXIT["DATA"]
    print(json.dumps({"subcommand": args.subcommand, **summary}, sort_keys=True, default=str))
    return EXIT["OK"]


if __name__ == "__main__":
    sys.exit(main())
