# app/scoring.py
"""
Per-token self-information from a pluggable causal language model.

Backends deliver natural-log probabilities; conversion to bits happens
once, in ScoredToken.from_logprob. Every scoring context starts from a
begin-of-sequence state, so the first token of a sentence (per-sentence
mode) or of the document (whole-document mode) is scored too.
"""

import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, List, Optional, Sequence, Tuple, Union

from .datatypes import ScoredToken, ScoringMode, SegmentedDocument, Span, Token
from .errors import InvalidArgumentError, ScoringError, SelectiveContextError
from .log import get_logger
from .ngram import NgramModel

logger = get_logger("app.scoring")

TokenRange = Tuple[int, int]


@dataclass(frozen=True)
class ScoringRequest:
    """One conditioning context: tokens scored left to right after BOS + prefix."""
    text: str
    tokens: Tuple[Token, ...]
    prefix: Tuple[str, ...] = ()

    @property
    def span(self) -> Span:
        return (self.tokens[0].span[0], self.tokens[-1].span[1])

    @property
    def chunk_text(self) -> str:
        start, end = self.span
        return self.text[start:end]


# =====================================================
# Backends
# =====================================================
class ScorerBackend(ABC):
    """
    Source of P(token | preceding tokens).

    Implementations are immutable after construction and must return the
    same values for the same request (no sampling).
    """
    kind: ClassVar[str] = "abstract"
    # byte budget per request; None means unbounded
    max_request_bytes: Optional[int] = None

    @abstractmethod
    def context_logprobs(self, requests: Sequence[ScoringRequest]) -> List[List[float]]:
        """Natural-log probability of every token of every request, in order."""

    def describe(self) -> str:
        return self.kind


class NgramBackend(ScorerBackend):
    kind = "ngram"

    def __init__(self, model: NgramModel):
        self._model = model

    @property
    def model(self) -> NgramModel:
        return self._model

    def context_logprobs(self, requests: Sequence[ScoringRequest]) -> List[List[float]]:
        width = self._model.order - 1
        out: List[List[float]] = []
        for req in requests:
            history = list(req.prefix)
            lps: List[float] = []
            for tok in req.tokens:
                ctx = history[-width:] if width else []
                lps.append(math.log(self._model.prob(ctx, tok.text)))
                history.append(tok.text)
            out.append(lps)
        return out

    def describe(self) -> str:
        return f"ngram(order={self._model.order}, k={self._model.k}, vocab={self._model.vocab_size})"


class UniformBackend(ScorerBackend):
    """Every token has probability 1/vocab_size regardless of context."""
    kind = "uniform"

    def __init__(self, vocab_size: int):
        if not isinstance(vocab_size, int) or vocab_size < 1:
            raise InvalidArgumentError(f"uniform vocab size must be a positive integer, got {vocab_size!r}")
        self._vocab_size = vocab_size
        self._logprob = -math.log(vocab_size)

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    def context_logprobs(self, requests: Sequence[ScoringRequest]) -> List[List[float]]:
        return [[self._logprob] * len(req.tokens) for req in requests]

    def describe(self) -> str:
        return f"uniform(vocab={self._vocab_size})"


# =====================================================
# Context planning
# =====================================================
def _as_tokens(tokens: Sequence[Union[str, Token]]) -> Tuple[List[Token], str]:
    """Plain strings are laid out joined by single spaces."""
    out: List[Token] = []
    pos = 0
    for t in tokens:
        s = str(t)
        out.append(Token(s, (pos, pos + len(s))))
        pos += len(s) + 1
    return out, " ".join(str(t) for t in tokens)


def _reconstruct_text(tokens: Sequence[Token]) -> str:
    """Place tokens at their spans, filling gaps with spaces."""
    parts: List[str] = []
    pos = 0
    for t in tokens:
        start, end = t.span
        if start < pos:
            raise InvalidArgumentError(f"token spans overlap or go backwards at {t.text!r}{t.span}")
        parts.append(" " * (start - pos))
        parts.append(t.text)
        pos = end
    return "".join(parts)


def _check_ranges(ranges: Sequence[TokenRange], n: int) -> None:
    pos = 0
    for a, b in ranges:
        if a != pos or b <= a:
            raise InvalidArgumentError(f"sentence bounds must partition 0..{n} into non-empty ranges, got {list(ranges)}")
        pos = b
    if pos != n:
        raise InvalidArgumentError(f"sentence bounds cover 0..{pos}, expected 0..{n}")


def _ranges_from_sentence_ids(tokens: Sequence[Token]) -> List[TokenRange]:
    ranges: List[TokenRange] = []
    start = 0
    for i in range(1, len(tokens) + 1):
        if i == len(tokens) or tokens[i].sentence != tokens[start].sentence:
            ranges.append((start, i))
            start = i
    return ranges


def _range_bytes(tokens: Sequence[Token], text: str, a: int, b: int) -> int:
    return len(text[tokens[a].span[0]:tokens[b - 1].span[1]].encode("utf-8"))


def _split_oversized(tokens: Sequence[Token], text: str, a: int, b: int, budget: int) -> List[TokenRange]:
    """Cut one range at token boundaries so every piece fits the byte budget."""
    pieces: List[TokenRange] = []
    start = a
    for i in range(a + 1, b + 1):
        if i == b:
            pieces.append((start, b))
        elif _range_bytes(tokens, text, start, i + 1) > budget:
            pieces.append((start, i))
            start = i
    return pieces


def plan_contexts(tokens: Sequence[Token], text: str, sentence_ranges: Sequence[TokenRange],
                  mode: ScoringMode, budget: Optional[int]) -> List[TokenRange]:
    """
    Token ranges that are scored as independent contexts.

    per-sentence: one context per sentence.
    whole-document: one context, or, under a byte budget, consecutive
    sentences packed greedily up to the budget.
    Any range above the budget is split at token boundaries.
    """
    n = len(tokens)
    if mode is ScoringMode.SENTENCE:
        planned = list(sentence_ranges)
    elif budget is None:
        planned = [(0, n)]
    else:
        planned = []
        cur: Optional[List[int]] = None
        for a, b in sentence_ranges:
            if cur is not None and _range_bytes(tokens, text, cur[0], b) <= budget:
                cur[1] = b
                continue
            if cur is not None:
                planned.append((cur[0], cur[1]))
            cur = [a, b]
        if cur is not None:
            planned.append((cur[0], cur[1]))

    if budget is None:
        return planned
    out: List[TokenRange] = []
    for a, b in planned:
        if _range_bytes(tokens, text, a, b) > budget:
            logger.warning("Context of %d tokens exceeds the %d-byte request budget; splitting at token boundaries",
                           b - a, budget)
            out.extend(_split_oversized(tokens, text, a, b, budget))
        else:
            out.append((a, b))
    return out


# =====================================================
# Scoring
# =====================================================
def score_tokens(tokens: Sequence[Union[str, Token]], backend: ScorerBackend,
                 mode: Union[ScoringMode, str] = ScoringMode.SENTENCE,
                 sentence_bounds: Optional[Sequence[TokenRange]] = None,
                 text: Optional[str] = None,
                 prefix: Sequence[str] = ()) -> List[ScoredToken]:
    """
    Score every token with its self-information in bits.

    Sentence boundaries come from `sentence_bounds` (token index ranges),
    else from the tokens' sentence ids; without either the input is one
    sentence. `prefix` conditions a whole-document run on tokens that
    precede the input.
    """
    if not tokens:
        raise InvalidArgumentError("cannot score an empty token sequence")
    mode = ScoringMode(mode)
    if prefix and mode is not ScoringMode.DOCUMENT:
        raise InvalidArgumentError("a conditioning prefix is only supported in whole-document mode")

    if isinstance(tokens[0], Token):
        toks = list(tokens)
        text = text if text is not None else _reconstruct_text(toks)
    else:
        toks, joined = _as_tokens(tokens)
        text = joined

    if sentence_bounds is not None:
        ranges = [tuple(r) for r in sentence_bounds]
        _check_ranges(ranges, len(toks))
    else:
        ranges = _ranges_from_sentence_ids(toks)

    planned = plan_contexts(toks, text, ranges, mode, backend.max_request_bytes)
    requests = [
        ScoringRequest(text=text, tokens=tuple(toks[a:b]), prefix=tuple(prefix) if i == 0 else ())
        for i, (a, b) in enumerate(planned)
    ]
    if prefix and len(requests) > 1:
        raise InvalidArgumentError(f"{backend.kind} backend splits the document; a prefix cannot be carried across requests")

    t0 = time.time()
    try:
        logprobs = backend.context_logprobs(requests)
    except SelectiveContextError:
        raise
    except Exception as e:
        whole = (toks[0].span[0], toks[-1].span[1])
        raise ScoringError(f"{backend.describe()} failed: {e}", span=whole) from e

    if len(logprobs) != len(requests):
        raise ScoringError(f"{backend.describe()} returned {len(logprobs)} results for {len(requests)} contexts")

    scored: List[ScoredToken] = []
    for req, lps in zip(requests, logprobs):
        if len(lps) != len(req.tokens):
            raise ScoringError(
                f"{backend.describe()} returned {len(lps)} logprobs for {len(req.tokens)} tokens", span=req.span
            )
        for tok, lp in zip(req.tokens, lps):
            scored.append(ScoredToken.from_logprob(tok.text, tok.span, float(lp)))

    logger.debug("Scored %d tokens in %d contexts with %s in %.3fs",
                 len(scored), len(requests), backend.describe(), time.time() - t0)
    return scored


def score_document(doc: SegmentedDocument, backend: ScorerBackend,
                   mode: Union[ScoringMode, str] = ScoringMode.SENTENCE) -> List[ScoredToken]:
    if not doc.tokens:
        raise InvalidArgumentError("document has no tokens after normalization")
    return score_tokens(doc.tokens, backend, mode=mode, text=doc.text)


# =====================================================
# Aggregates
# =====================================================
def sentence_entropy(scored: Sequence[ScoredToken]) -> float:
    """Mean self-information per token, in bits."""
    if not scored:
        raise InvalidArgumentError("entropy of an empty token sequence is undefined")
    return sum(s.self_info for s in scored) / len(scored)


def sentence_perplexity(scored: Sequence[ScoredToken]) -> float:
    return 2.0 ** sentence_entropy(scored)
