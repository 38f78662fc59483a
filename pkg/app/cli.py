# app/cli.py
"""
Selective-context command line.

Usage:
    python -m app.cli train-ngram corpus.txt --output data/model.scng
    python -m app.cli compress doc.txt --scorer ngram:data/model.scng --ratio 0.5 --level phrase --format json
    python -m app.cli visualize docs.jsonl --input-format jsonl --scorer ngram:data/model.scng --output-dir out/
    python -m app.cli evaluate --candidates cand.txt --references ref.txt --format tsv
    python -m app.cli sweep doc.txt --scorer ngram:data/model.scng --format tsv

Exit status: 0 on success, 1 if any document (or the run) failed, 2 on usage errors.
"""

import argparse
import json
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple, TypeVar

import pandas as pd

from .datatypes import Baseline, CompressionConfig, CompressionResult, Level, ScoringMode
from .doc_loader import FORMATS, InputDocument, check_unique_ids, ingest
from .errors import ConfigError, InvalidArgumentError, SelectiveContextError
from .log import get_logger, set_verbosity
from .metrics import BLEU_MAX_N_DEFAULT, evaluate_pairs
from .ngram import DEFAULT_ORDER, DEFAULT_SMOOTHING_K, save_ngram, train_ngram
from .report import build_report, dump_report, render_html, retained_text
from .run_config import RunConfig, build_backend, load_run_config
from .scoring import ScorerBackend
from .segmentation import document_stats, load_abbreviations, tokenize
from .selection import RATIO_GRID, compress, sweep_ratios
from .storage import atomic_write_text

logger = get_logger("app.cli")

T = TypeVar("T")

_UNSAFE_FILENAME = re.compile(r"[^\w.-]+")


@dataclass(frozen=True)
class DocumentOutcome:
    doc: InputDocument
    result: CompressionResult
    final_turn: Optional[str]


# =====================================================
# Batch runner
# =====================================================
def run_batch(items: Sequence[Tuple[str, T]], worker: Callable[[T], object],
              max_workers: int = 1) -> Dict[str, object]:
    """
    Run worker over (key, item) pairs in a thread pool.

    Each value in the returned dict is the worker result or the exception
    it raised. Progress is logged every 10 items and at the end:
        Progress: 10/50 (20.0%). Elapsed: 4.0s. Avg/task: 0.3s. ETA: 12.0s
    """
    results: Dict[str, object] = {}
    total = len(items)
    if total == 0:
        return results

    start_time = time.time()
    processed = 0

    def timed(item: T):
        t0 = time.time()
        out = worker(item)
        return out, time.time() - t0

    per_item_times: List[float] = []
    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        future_map = {ex.submit(timed, item): key for key, item in items}
        for fut in as_completed(future_map):
            key = future_map[fut]
            try:
                results[key], dur = fut.result()
                per_item_times.append(dur)
            except Exception as e:
                logger.error("%s: %s", key, e)
                results[key] = e
            processed += 1

            if processed % 10 == 0 or processed == total:
                elapsed = time.time() - start_time
                avg = sum(per_item_times) / len(per_item_times) if per_item_times else 0.0
                remaining = (total - processed) * avg / max_workers
                pct = (processed / total) * 100.0
                logger.info(
                    "Progress: %d/%d (%.1f%%). Elapsed: %.1fs. Avg/task: %.1fs. ETA: %.1fs",
                    processed, total, pct, elapsed, avg, remaining
                )
    return results


# =====================================================
# Helpers
# =====================================================
def _safe_filename(doc_id: str) -> str:
    return _UNSAFE_FILENAME.sub("_", doc_id).strip("._") or "document"


def _ingest_all(paths: Sequence[str], fmt: str) -> Tuple[List[InputDocument], int]:
    """Ingest every input; returns the documents and the number of files that failed."""
    docs: List[InputDocument] = []
    failed = 0
    for path in paths:
        try:
            docs.extend(ingest(path, fmt))
        except SelectiveContextError as e:
            logger.error("%s", e)
            failed += 1
    check_unique_ids(docs)
    return docs, failed


def compress_input(doc: InputDocument, backend: ScorerBackend, config: CompressionConfig,
                   abbreviations=None) -> DocumentOutcome:
    """Articles are compressed whole; conversations keep their final turn verbatim."""
    if doc.is_conversation:
        if len(doc.turns) < 2:
            raise InvalidArgumentError(f"conversation {doc.id!r} has no history before its final turn")
        result = compress(doc.history, backend, config, abbreviations=abbreviations)
        final_turn: Optional[str] = doc.final_turn
    else:
        result = compress(doc.body, backend, config, abbreviations=abbreviations)
        final_turn = None
    stats = document_stats(result.document)
    logger.info("%s: %d sentences, %d phrases, %d tokens; removed %.1f%% of tokens",
                doc.id, stats["sentences"], stats["phrases"], stats["tokens"],
                100.0 * result.achieved_token_ratio)
    return DocumentOutcome(doc, result, final_turn)


def _render_outcome(outcome: DocumentOutcome, fmt: str, compact_json: bool) -> str:
    if fmt == "html":
        return render_html(outcome.result, doc_id=outcome.doc.id, final_turn=outcome.final_turn)
    if fmt == "json":
        report = build_report(outcome.doc.id, outcome.result, outcome.final_turn)
        return dump_report(report, indent=None if compact_json else 2)
    return retained_text(outcome.result, outcome.final_turn) + "\n"


_EXTENSIONS = {"text": "txt", "json": "json", "html": "html"}


# =====================================================
# Subcommands
# =====================================================
def run_compress(config: RunConfig, stdout: Optional[TextIO] = None) -> int:
    stdout = stdout or sys.stdout
    if not config.inputs:
        raise ConfigError("no input files given")

    backend = build_backend(config)
    abbreviations = load_abbreviations(config.abbrev) if config.abbrev else None
    compression = config.compression_config()

    docs, failed_inputs = _ingest_all(config.inputs, config.input_format)
    logger.info("Compressing %d documents with %s (ratio=%.2f, level=%s, baseline=%s)",
                len(docs), backend.describe(), compression.ratio, compression.level.value,
                compression.baseline.value)

    results = run_batch(
        [(d.id, d) for d in docs],
        lambda d: compress_input(d, backend, compression, abbreviations),
        max_workers=config.jobs,
    )

    fmt = config.output_format
    to_files = fmt == "html" or config.output_dir is not None
    out_dir = config.output_dir or os.getcwd()
    failed = failed_inputs
    for doc in docs:
        outcome = results.get(doc.id)
        if not isinstance(outcome, DocumentOutcome):
            failed += 1
            continue
        rendered = _render_outcome(outcome, fmt, compact_json=not to_files)
        if to_files:
            path = os.path.join(out_dir, f"{_safe_filename(doc.id)}.{_EXTENSIONS[fmt]}")
            try:
                atomic_write_text(path, rendered)
            except OSError as e:
                logger.error("%s: cannot write %s: %s", doc.id, path, e)
                failed += 1
                continue
            logger.info("Wrote %s", path)
        else:
            stdout.write(rendered)
    stdout.flush()

    if failed:
        logger.error("%d of %d inputs failed", failed, len(docs) + failed_inputs)
        return 1
    return 0


def run_visualize(config: RunConfig, stdout: Optional[TextIO] = None) -> int:
    return run_compress(config.model_copy(update={"output_format": "html"}), stdout=stdout)


def _read_lines(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        return f.read().splitlines()


def run_evaluate(candidates: str, references: Sequence[str], fmt: str = "tsv",
                 max_n: int = BLEU_MAX_N_DEFAULT, smooth: bool = False,
                 stdout: Optional[TextIO] = None) -> int:
    """Line i of the candidate file is scored against line i of every reference file."""
    stdout = stdout or sys.stdout
    cand_lines = _read_lines(candidates)
    ref_files = [(path, _read_lines(path)) for path in references]
    for path, lines in ref_files:
        if len(lines) != len(cand_lines):
            shorter = candidates if len(cand_lines) < len(lines) else path
            raise InvalidArgumentError(
                f"{shorter} is shorter: {candidates} has {len(cand_lines)} lines, {path} has {len(lines)}"
            )
    if not cand_lines:
        raise InvalidArgumentError(f"{candidates} has no candidate lines")
    pair_refs = [[lines[i] for _, lines in ref_files] for i in range(len(cand_lines))]
    df, aggregate = evaluate_pairs(cand_lines, pair_refs, max_n=max_n, smooth=smooth)

    if fmt == "json":
        payload = {"pairs": json.loads(df.to_json(orient="records")), "aggregate": aggregate}
        stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        table = df.astype({"pair": str})
        if aggregate:
            table = pd.concat([table, pd.DataFrame([{"pair": "mean", **aggregate}])], ignore_index=True)
        stdout.write(table.to_csv(sep="\t", index=False, float_format="%.6g"))
    stdout.flush()
    return 0


def run_sweep(config: RunConfig, levels: Sequence[Level], ratios: Sequence[float], fmt: str = "tsv",
              stdout: Optional[TextIO] = None) -> int:
    stdout = stdout or sys.stdout
    if not config.inputs:
        raise ConfigError("no input files given")
    for r in ratios:
        if not 0.0 <= r <= 1.0:
            raise ConfigError(f"sweep ratio {r} is outside [0, 1]")

    backend = build_backend(config)
    abbreviations = load_abbreviations(config.abbrev) if config.abbrev else None
    base = config.compression_config()
    docs, failed = _ingest_all(config.inputs, config.input_format)

    def worker(doc: InputDocument) -> List[dict]:
        text = doc.history if doc.is_conversation else doc.body
        rows = sweep_ratios(text, backend, levels=levels, ratios=ratios, config=base,
                            abbreviations=abbreviations)
        return [{"id": doc.id, **row, "token_savings": row["achieved_token_ratio"]} for row in rows]

    results = run_batch([(d.id, d) for d in docs], worker, max_workers=config.jobs)
    rows: List[dict] = []
    for doc in docs:
        out = results.get(doc.id)
        if isinstance(out, list):
            rows.extend(out)
        else:
            failed += 1

    df = pd.DataFrame(rows)
    if fmt == "json":
        stdout.write(df.to_json(orient="records", indent=2) + "\n")
    else:
        stdout.write(df.to_csv(sep="\t", index=False, float_format="%.6g"))
    stdout.flush()
    return 1 if failed else 0


def run_train_ngram(corpus: str, output: str, order: int = DEFAULT_ORDER, k: float = DEFAULT_SMOOTHING_K,
                    stdout: Optional[TextIO] = None) -> int:
    stdout = stdout or sys.stdout
    with open(corpus, "r", encoding="utf-8") as f:
        tokens = [t.text for t in tokenize(f.read())]
    t0 = time.time()
    model = train_ngram(tokens, order=order, k=k)
    save_ngram(model, output)
    logger.info("Trained order-%d model on %s in %.2fs", order, corpus, time.time() - t0)
    stdout.write(f"vocab_size={model.vocab_size} tokens={len(tokens)} output={output}\n")
    stdout.flush()
    return 0


# =====================================================
# Argument parsing
# =====================================================
def _add_document_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("inputs", nargs="*", metavar="INPUT", help="input files")
    p.add_argument("--input-format", choices=FORMATS, default=None, help="input file format (default: txt)")
    p.add_argument("--scorer", default=None,
                   help="ngram:<model.scng> | remote:<url> | uniform:<vocab size>")
    p.add_argument("--mode", choices=[m.value for m in ScoringMode], default=None,
                   help="score each sentence as its own context, or the whole document (default: sentence)")
    p.add_argument("--abbrev", default=None, help="abbreviation stop-list, one entry per line")
    p.add_argument("--remote-profile", choices=["native", "openai"], default=None,
                   help="wire protocol of a remote scorer (default: native)")
    p.add_argument("--remote-model", default=None, help="model name sent by the openai profile")
    p.add_argument("--jobs", type=int, default=None, help="documents processed concurrently (default: 1)")
    p.add_argument("--config", default=None, help="JSON file with run settings; flags override it")


def _add_compress_flags(p: argparse.ArgumentParser, with_format: bool = True) -> None:
    _add_document_flags(p)
    p.add_argument("--ratio", type=float, default=None, help="fraction of lexical units to remove (default: 0.5)")
    p.add_argument("--level", choices=[lv.value for lv in Level], default=None,
                   help="lexical unit (default: phrase)")
    p.add_argument("--seed", type=int, default=None, help="u64 seed for the random baseline (default: 0)")
    p.add_argument("--baseline", choices=[b.value for b in Baseline], default=None,
                   help="selection strategy (default: selective)")
    p.add_argument("--output-dir", default=None, help="write one file per document here")
    if with_format:
        p.add_argument("--format", dest="output_format", choices=["text", "json", "html"], default=None,
                       help="output format (default: text)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m app.cli",
                                     description="Compress documents by dropping low self-information units.")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-ngram", help="train an n-gram model and write it as SCNG")
    p.add_argument("corpus", help="UTF-8 training text")
    p.add_argument("--output", required=True, help="model file to write")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER, help=f"n-gram order (default: {DEFAULT_ORDER})")
    p.add_argument("--k", type=float, default=DEFAULT_SMOOTHING_K,
                   help=f"add-k smoothing constant (default: {DEFAULT_SMOOTHING_K})")

    p = sub.add_parser("compress", help="compress documents")
    _add_compress_flags(p)

    p = sub.add_parser("visualize", help="write the self-information HTML view of each document")
    _add_compress_flags(p, with_format=False)

    p = sub.add_parser("evaluate", help="BLEU / ROUGE of paired candidate and reference files")
    p.add_argument("--candidates", required=True, help="one candidate text per line")
    p.add_argument("--references", required=True, nargs="+", help="reference files, line-aligned with candidates")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.add_argument("--bleu-max-n", type=int, default=BLEU_MAX_N_DEFAULT, help="highest BLEU n-gram order")
    p.add_argument("--smooth", action="store_true", help="add-one smoothing for BLEU orders >= 2")

    p = sub.add_parser("sweep", help="compress every document over a grid of levels and ratios")
    _add_document_flags(p)
    p.add_argument("--levels", nargs="+", choices=[lv.value for lv in Level], default=[lv.value for lv in Level])
    p.add_argument("--ratios", nargs="+", type=float, default=list(RATIO_GRID))
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    return parser


_CONFIG_KEYS = ("inputs", "input_format", "scorer", "ratio", "level", "mode", "output_format", "seed",
                "baseline", "jobs", "abbrev", "remote_profile", "remote_model", "output_dir")


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in _CONFIG_KEYS}
    if not overrides["inputs"]:
        overrides["inputs"] = None
    return load_run_config(args.config, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        sys.stderr.reconfigure(line_buffering=True)
    except (AttributeError, ValueError):
        pass
    args = build_parser().parse_args(argv)
    set_verbosity(verbose=args.verbose, quiet=args.quiet)

    try:
        if args.command == "train-ngram":
            return run_train_ngram(args.corpus, args.output, order=args.order, k=args.k)
        if args.command == "evaluate":
            return run_evaluate(args.candidates, args.references, fmt=args.format,
                                max_n=args.bleu_max_n, smooth=args.smooth)
        config = _run_config_from_args(args)
        if args.command == "compress":
            return run_compress(config)
        if args.command == "visualize":
            return run_visualize(config)
        return run_sweep(config, levels=[Level(v) for v in args.levels], ratios=args.ratios, fmt=args.format)
    except (SelectiveContextError, OSError) as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
