# app/metrics.py
"""
Metrics Engine

✔ Token / unit savings of a compression result
✔ BLEU (clipped n-gram precision, brevity penalty, multi-reference)
✔ ROUGE-1 / ROUGE-2 (n-gram overlap) and ROUGE-L (longest common subsequence)
✔ Paired evaluation table (per pair + arithmetic-mean aggregate) via pandas

Metric tokenization: lowercase + app.segmentation.tokenize, so scores are
reproducible from the raw strings alone.

METEOR and BERTScore are intentionally not provided (they need synonym
resources / pretrained embeddings).
"""

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from .datatypes import CompressionResult
from .errors import InvalidArgumentError
from .log import get_logger
from .segmentation import tokenize

# ---------------------------
# CONFIG
# ---------------------------
BLEU_MAX_N_DEFAULT = 4

logger = get_logger("app.metrics")


# =====================================================
# Reports
# =====================================================
@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, cand_total: int, ref_total: int) -> "PRF":
        precision = overlap / cand_total if cand_total else 0.0
        recall = overlap / ref_total if ref_total else 0.0
        return cls(precision, recall, _f1(precision, recall))


@dataclass(frozen=True)
class OverlapReport:
    bleu: float
    rouge1: PRF
    rouge2: PRF
    rougeL: PRF

    def to_row(self) -> Dict[str, float]:
        row = {"bleu": self.bleu}
        for name in ("rouge1", "rouge2", "rougeL"):
            for k, v in asdict(getattr(self, name)).items():
                row[f"{name}_{k}"] = v
        return row


@dataclass(frozen=True)
class SavingsReport:
    original_tokens: int
    retained_tokens: int
    token_savings: float
    unit_savings: float


# =====================================================
# Helpers
# =====================================================
def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _require(tokens: Sequence[str], name: str) -> None:
    if not tokens:
        raise InvalidArgumentError(f"{name} must be a non-empty token sequence")


def metric_tokens(text: str) -> List[str]:
    return [t.text.lower() for t in tokenize(text)]


# =====================================================
# BLEU
# =====================================================
def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]],
         max_n: int = BLEU_MAX_N_DEFAULT, smooth: bool = False) -> float:
    """
    Geometric mean of clipped n-gram precisions (n = 1..max_n) times the
    brevity penalty against the closest reference length.

    Orders longer than the candidate contribute no n-grams and are left
    out of the mean. Without smoothing a zero match at any order gives 0;
    with smoothing, orders n >= 2 use (clipped + 1) / (total + 1).
    """
    _require(candidate, "candidate")
    if not references:
        raise InvalidArgumentError("bleu needs at least one reference")
    for i, ref in enumerate(references):
        _require(ref, f"reference {i}")
    if max_n < 1:
        raise InvalidArgumentError(f"max_n must be >= 1, got {max_n}")

    c = len(candidate)
    log_sum = 0.0
    orders = 0
    for n in range(1, min(max_n, c) + 1):
        cand_counts = _ngrams(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for gram, cnt in _ngrams(ref, n).items():
                if cnt > max_ref[gram]:
                    max_ref[gram] = cnt
        clipped = sum(min(cnt, max_ref[gram]) for gram, cnt in cand_counts.items())
        total = c - n + 1
        if smooth and n >= 2:
            p_n = (clipped + 1) / (total + 1)
        elif clipped == 0:
            return 0.0
        else:
            p_n = clipped / total
        log_sum += math.log(p_n)
        orders += 1

    r = min((len(ref) for ref in references), key=lambda length: (abs(length - c), length))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / orders)


# =====================================================
# ROUGE
# =====================================================
def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> PRF:
    _require(candidate, "candidate")
    _require(reference, "reference")
    if n not in (1, 2):
        raise InvalidArgumentError(f"rouge_n supports n = 1 or 2, got {n}")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    overlap = sum(min(cnt, ref[gram]) for gram, cnt in cand.items())
    return PRF.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PRF:
    _require(candidate, "candidate")
    _require(reference, "reference")
    lcs = lcs_length(candidate, reference)
    return PRF.from_counts(lcs, len(candidate), len(reference))


def overlap_report(candidate: Sequence[str], references: Sequence[Sequence[str]],
                   max_n: int = BLEU_MAX_N_DEFAULT, smooth: bool = False) -> OverlapReport:
    """BLEU over all references; each ROUGE variant max-pooled (by F1) over references."""
    def pooled(fn) -> PRF:
        return max((fn(candidate, ref) for ref in references), key=lambda prf: prf.f1)

    return OverlapReport(
        bleu=bleu(candidate, references, max_n=max_n, smooth=smooth),
        rouge1=pooled(lambda c, r: rouge_n(c, r, 1)),
        rouge2=pooled(lambda c, r: rouge_n(c, r, 2)),
        rougeL=pooled(rouge_l),
    )


# =====================================================
# Savings
# =====================================================
def savings(result: CompressionResult) -> SavingsReport:
    original = result.total_tokens
    retained = result.retained_tokens
    n_units = len(result.units)
    return SavingsReport(
        original_tokens=original,
        retained_tokens=retained,
        token_savings=1.0 - retained / original if original else 0.0,
        unit_savings=1.0 - len(result.retained) / n_units if n_units else 0.0,
    )


# =====================================================
# Paired evaluation
# =====================================================
def evaluate_pairs(candidates: Sequence[str], references: Sequence[Sequence[str]],
                   max_n: int = BLEU_MAX_N_DEFAULT, smooth: bool = False) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """
    Score candidate i against references[i] (one or more texts).

    Returns the per-pair table and the arithmetic mean of every column.
    """
    if len(candidates) != len(references):
        raise InvalidArgumentError(f"{len(candidates)} candidates but {len(references)} reference sets")

    rows: List[Dict[str, float]] = []
    for i, (cand, refs) in enumerate(zip(candidates, references)):
        try:
            report = overlap_report(metric_tokens(cand), [metric_tokens(r) for r in refs],
                                    max_n=max_n, smooth=smooth)
        except InvalidArgumentError as e:
            raise InvalidArgumentError(f"pair {i + 1}: {e}") from e
        rows.append({"pair": i + 1, **report.to_row()})

    df = pd.DataFrame(rows)
    aggregate: Dict[str, float] = {}
    if not df.empty:
        aggregate = {col: float(df[col].mean()) for col in df.columns if col != "pair"}
    logger.info("Evaluated %d pairs (max_n=%d, smooth=%s)", len(rows), max_n, smooth)
    return df, aggregate
