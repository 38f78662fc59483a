# app/datatypes.py
"""
Records shared by the scoring, segmentation and selection layers.

All records are frozen: a scored or segmented document is never mutated
after construction, so it can be handed to worker threads freely.

Spans are (start, end) character offsets into the NFC-normalized text;
token ranges are half-open [start, end) indices into the token list.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from .errors import InvalidArgumentError, ScoringError

LN2 = math.log(2.0)

Span = Tuple[int, int]


class Level(str, Enum):
    TOKEN = "token"
    PHRASE = "phrase"
    SENTENCE = "sentence"


class ScoringMode(str, Enum):
    SENTENCE = "sentence"
    DOCUMENT = "document"


class Baseline(str, Enum):
    SELECTIVE = "selective"
    RANDOM = "random"


def logprob_to_bits(logprob: float) -> float:
    """Natural-log probability -> self-information in bits."""
    return -logprob / LN2


@dataclass(frozen=True)
class Token:
    text: str
    span: Span
    sentence: int = 0


@dataclass(frozen=True)
class ScoredToken:
    text: str
    span: Span
    self_info: float
    logprob: float

    @classmethod
    def from_logprob(cls, text: str, span: Span, logprob: float) -> "ScoredToken":
        if math.isnan(logprob) or logprob > 0.0:
            raise ScoringError(f"invalid logprob {logprob!r} for token {text!r}", span=span)
        bits = logprob_to_bits(logprob)
        # -0.0 for certain tokens
        return cls(text=text, span=span, self_info=bits + 0.0, logprob=logprob)


@dataclass(frozen=True)
class SegmentedDocument:
    text: str
    sentences: Tuple[Span, ...]
    tokens: Tuple[Token, ...]

    def sentence_token_ranges(self) -> List[Tuple[int, int]]:
        """Half-open token index range of every sentence, in order."""
        ranges: List[Tuple[int, int]] = []
        start = 0
        for s_idx in range(len(self.sentences)):
            end = start
            while end < len(self.tokens) and self.tokens[end].sentence == s_idx:
                end += 1
            ranges.append((start, end))
            start = end
        return ranges

    @property
    def token_texts(self) -> List[str]:
        return [t.text for t in self.tokens]


@dataclass(frozen=True)
class LexicalUnit:
    kind: Level
    token_range: Tuple[int, int]
    text: str
    self_info: float

    @property
    def n_tokens(self) -> int:
        return self.token_range[1] - self.token_range[0]


@dataclass(frozen=True)
class CompressionConfig:
    ratio: float = 0.5
    level: Level = Level.PHRASE
    seed: Optional[int] = None
    mode: ScoringMode = ScoringMode.SENTENCE
    baseline: Baseline = Baseline.SELECTIVE

    def __post_init__(self):
        if not isinstance(self.ratio, (int, float)) or math.isnan(self.ratio) or not 0.0 <= self.ratio <= 1.0:
            raise InvalidArgumentError(f"ratio must be in [0, 1], got {self.ratio!r}")
        object.__setattr__(self, "level", Level(self.level))
        object.__setattr__(self, "mode", ScoringMode(self.mode))
        object.__setattr__(self, "baseline", Baseline(self.baseline))
        if self.seed is not None and not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def percentile(self) -> float:
        return 100.0 * self.ratio


@dataclass(frozen=True)
class CompressionResult:
    """
    Partition of a document's lexical units into retained and removed.

    threshold is None for the random baseline (no percentile applies).
    Achieved ratios are removed fractions, comparable to requested_ratio.
    """
    units: Tuple[LexicalUnit, ...]
    retained_mask: Tuple[bool, ...]
    threshold: Optional[float]
    requested_ratio: float
    level: Level
    document: Optional[SegmentedDocument] = field(default=None, compare=False, repr=False)
    baseline: Baseline = Baseline.SELECTIVE

    @property
    def retained(self) -> List[LexicalUnit]:
        return [u for u, keep in zip(self.units, self.retained_mask) if keep]

    @property
    def removed(self) -> List[LexicalUnit]:
        return [u for u, keep in zip(self.units, self.retained_mask) if not keep]

    @property
    def total_tokens(self) -> int:
        return sum(u.n_tokens for u in self.units)

    @property
    def retained_tokens(self) -> int:
        return sum(u.n_tokens for u in self.retained)

    @property
    def achieved_unit_ratio(self) -> float:
        if not self.units:
            return 0.0
        return 1.0 - sum(self.retained_mask) / len(self.units)

    @property
    def achieved_token_ratio(self) -> float:
        total = self.total_tokens
        if total == 0:
            return 0.0
        return 1.0 - self.retained_tokens / total
