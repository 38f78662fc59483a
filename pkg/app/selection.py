# app/selection.py
"""
Percentile filtering of lexical units, the random-deletion baseline,
and rendering of the retained context.

A unit is retained iff its self-information is >= the p-th percentile
(linear interpolation) of all unit values in the document, p = 100 * ratio.
Ties at the threshold are kept, so the achieved ratio can undershoot the
requested one; both are reported.
"""

import dataclasses
import math
import time
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .datatypes import (Baseline, CompressionConfig, CompressionResult, Level, LexicalUnit,
                        ScoredToken, SegmentedDocument)
from .errors import InvalidArgumentError
from .log import get_logger
from .scoring import ScorerBackend, score_document
from .segmentation import is_opening_punct, is_punct, merge_units, normalize_text, segment

# ---------------------------
# CONFIG
# ---------------------------
RATIO_GRID = (0.2, 0.35, 0.5, 0.65, 0.8)
U64 = 2 ** 64

logger = get_logger("app.selection")


# =====================================================
# Percentile filter
# =====================================================
def percentile_threshold(values: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile over the inclusive range: rank = p/100 * (n - 1)."""
    if len(values) == 0:
        raise InvalidArgumentError("percentile of an empty value list is undefined")
    if math.isnan(p) or not 0.0 <= p <= 100.0:
        raise InvalidArgumentError(f"percentile must be in [0, 100], got {p!r}")
    arr = np.asarray(values, dtype=float)
    if not np.isfinite(arr).all():
        raise InvalidArgumentError("self-information values must be finite")
    return float(np.percentile(arr, p, method="linear"))


def filter_units(units: Sequence[LexicalUnit], p: float) -> CompressionResult:
    if not units:
        raise InvalidArgumentError("cannot filter an empty unit list")
    threshold = percentile_threshold([u.self_info for u in units], p)
    return CompressionResult(
        units=tuple(units),
        retained_mask=tuple(u.self_info >= threshold for u in units),
        threshold=threshold,
        requested_ratio=p / 100.0,
        level=units[0].kind,
    )


# =====================================================
# Random-deletion baseline
# =====================================================
def _bounded(bitgen: np.random.PCG64, bound: int) -> int:
    """Uniform integer in [0, bound) by rejection on raw 64-bit draws."""
    limit = (U64 // bound) * bound
    while True:
        x = int(bitgen.random_raw())
        if x < limit:
            return x % bound


def removal_indices(n: int, k: int, seed: int) -> List[int]:
    """
    k distinct indices out of range(n): a partial Fisher-Yates shuffle
    driven by PCG64 seeded with `seed`. Depends only on (n, k, seed).
    """
    bitgen = np.random.PCG64(seed)
    pool = list(range(n))
    for i in range(k):
        j = i + _bounded(bitgen, n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:k])


def random_compress(units: Sequence[LexicalUnit], ratio: float, seed: int = 0) -> CompressionResult:
    """Remove exactly round-half-up(ratio * n) units chosen uniformly at random."""
    if not units:
        raise InvalidArgumentError("cannot compress an empty unit list")
    if isinstance(ratio, bool) or not isinstance(ratio, (int, float)) or math.isnan(ratio) or not 0.0 <= ratio <= 1.0:
        raise InvalidArgumentError(f"ratio must be in [0, 1], got {ratio!r}")
    if seed is None or not 0 <= int(seed) < U64:
        raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    n = len(units)
    k = min(n, int(math.floor(ratio * n + 0.5)))
    removed = set(removal_indices(n, k, int(seed)))
    return CompressionResult(
        units=tuple(units),
        retained_mask=tuple(i not in removed for i in range(n)),
        threshold=None,
        requested_ratio=float(ratio),
        level=units[0].kind,
        baseline=Baseline.RANDOM,
    )


# =====================================================
# Pipeline
# =====================================================
def select_units(units: Sequence[LexicalUnit], config: CompressionConfig) -> CompressionResult:
    if config.baseline is Baseline.RANDOM:
        return random_compress(units, config.ratio, config.seed if config.seed is not None else 0)
    return filter_units(units, config.percentile)


def compress_scored(doc: SegmentedDocument, scored: Sequence[ScoredToken],
                    config: CompressionConfig) -> CompressionResult:
    units = merge_units(scored, config.level, doc)
    return dataclasses.replace(select_units(units, config), document=doc)


def compress(text: str, backend: ScorerBackend, config: Optional[CompressionConfig] = None,
             abbreviations: Optional[Iterable[str]] = None) -> CompressionResult:
    """tokenize -> split_sentences -> score_tokens -> merge_units -> filter_units."""
    config = config or CompressionConfig()
    t0 = time.time()
    doc = segment(text, abbreviations=abbreviations)
    if not doc.tokens:
        raise InvalidArgumentError("text is empty after normalization")
    scored = score_document(doc, backend, mode=config.mode)
    result = compress_scored(doc, scored, config)
    logger.info(
        "Built selective context: %d tokens, %d %s units, ratio %.2f -> kept %d tokens in %.1f ms",
        len(doc.tokens), len(result.units), result.level.value, config.ratio,
        result.retained_tokens, (time.time() - t0) * 1000.0,
    )
    return result


def sweep_ratios(text: str, backend: ScorerBackend, levels: Sequence[Level] = tuple(Level),
                 ratios: Sequence[float] = RATIO_GRID, config: Optional[CompressionConfig] = None,
                 abbreviations: Optional[Iterable[str]] = None) -> List[dict]:
    """One row per (level, ratio) cell; the document is scored once."""
    base = config or CompressionConfig()
    doc = segment(text, abbreviations=abbreviations)
    if not doc.tokens:
        raise InvalidArgumentError("text is empty after normalization")
    scored = score_document(doc, backend, mode=base.mode)

    rows: List[dict] = []
    for level in levels:
        units = merge_units(scored, Level(level), doc)
        for ratio in ratios:
            cfg = dataclasses.replace(base, ratio=ratio, level=Level(level))
            result = select_units(units, cfg)
            rows.append({
                "level": Level(level).value,
                "requested_ratio": float(ratio),
                "achieved_unit_ratio": result.achieved_unit_ratio,
                "achieved_token_ratio": result.achieved_token_ratio,
                "threshold_bits": result.threshold,
                "units": len(result.units),
                "retained_units": len(result.retained),
                "tokens": result.total_tokens,
                "retained_tokens": result.retained_tokens,
            })
    return rows


# =====================================================
# Rendering
# =====================================================
def _glues_left(unit: LexicalUnit) -> bool:
    compact = "".join(unit.text.split())
    return is_punct(compact) and not is_opening_punct(compact)


def render_retained(result: CompressionResult, original_text: Optional[str] = None) -> str:
    """
    Join retained unit texts with single spaces; a unit made only of
    closing or other punctuation attaches without a space.
    """
    if original_text is not None and result.document is not None \
            and normalize_text(original_text) != result.document.text:
        raise InvalidArgumentError("compression result was produced from a different document")
    parts: List[str] = []
    for unit in result.retained:
        if parts and not _glues_left(unit):
            parts.append(" ")
        parts.append(unit.text)
    return "".join(parts)
