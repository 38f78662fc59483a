# app/segmentation.py
"""
Tokenization, sentence splitting, noun-phrase chunking and unit merging.

All functions are pure. Offsets always refer to the NFC-normalized text,
which SegmentedDocument.text carries.
"""

import functools
import os
import re
import unicodedata
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .datatypes import Level, LexicalUnit, ScoredToken, SegmentedDocument, Span, Token
from .errors import InvalidArgumentError
from .log import get_logger
from .pos_tagger import tag_sentence

# ---------------------------
# CONFIG
# ---------------------------
BASE_DIR = os.path.dirname(__file__)
DATA_DIR = os.path.join(BASE_DIR, "..", "data")
DEFAULT_ABBREVIATIONS_FILE = os.path.join(DATA_DIR, "abbreviations.txt")

# used when the shipped list is missing
FALLBACK_ABBREVIATIONS = frozenset(["dr.", "mr.", "mrs.", "ms.", "fig.", "e.g.", "i.e.", "et al.", "etc.", "vs."])

OPENING_MARKS = frozenset("\"'“‘«([{")

logger = get_logger("app.segmentation")

_WORD = re.compile(r"\S+")
# terminal run, optional closers, then whitespace before the next sentence
_TERMINAL = re.compile(r"[.!?]+[\"'”’»)\]]*(?=\s+\S)")
_PARAGRAPH_BREAK = re.compile(r"\n[^\S\n]*\n\s*")


def normalize_text(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def is_punct(text: str) -> bool:
    return bool(text) and all(unicodedata.category(ch).startswith("P") for ch in text)


def is_opening_punct(text: str) -> bool:
    return bool(text) and all(unicodedata.category(ch) in ("Ps", "Pi") for ch in text)


# =====================================================
# Tokenizer
# =====================================================
def tokenize(text: str) -> List[Token]:
    """
    Split on Unicode whitespace, then peel leading and trailing punctuation
    off every word one character at a time. Word-internal punctuation
    ("e.g", "VOC/CUB", "don't") stays inside the token.
    """
    norm = normalize_text(text)
    out: List[Token] = []
    for m in _WORD.finditer(norm):
        start = m.start()
        word = m.group()
        i, j = 0, len(word)
        while i < j and is_punct(word[i]):
            i += 1
        while j > i and is_punct(word[j - 1]):
            j -= 1
        for p in range(i):
            out.append(Token(word[p], (start + p, start + p + 1)))
        if i < j:
            out.append(Token(word[i:j], (start + i, start + j)))
        for p in range(j, len(word)):
            out.append(Token(word[p], (start + p, start + p + 1)))
    return out


# =====================================================
# Sentence splitter
# =====================================================
def _parse_abbreviation_lines(lines: Iterable[str]) -> FrozenSet[str]:
    out = set()
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            out.add(normalize_text(line).lower())
    return frozenset(out)


@functools.lru_cache(maxsize=16)
def load_abbreviations(path: Optional[str] = None) -> FrozenSet[str]:
    """
    Read an abbreviation stop-list: one entry per line, UTF-8, "#" starts
    a comment. Without a path the shipped data/abbreviations.txt is used.
    """
    if path is None:
        path = DEFAULT_ABBREVIATIONS_FILE
        if not os.path.exists(path):
            logger.warning("Default abbreviation list %s missing; using built-in fallback", path)
            return FALLBACK_ABBREVIATIONS
    with open(path, "r", encoding="utf-8") as f:
        return _parse_abbreviation_lines(f)


def _ends_with_abbreviation(text: str, end: int, abbreviations: FrozenSet[str]) -> bool:
    """True if text[:end] ends with a stop-listed abbreviation on a word boundary."""
    head = text[:end].lower()
    for abbr in abbreviations:
        if head.endswith(abbr):
            before = len(head) - len(abbr)
            if before == 0 or head[before - 1].isspace() or is_punct(head[before - 1]):
                return True
    return False


def _trimmed(text: str, start: int, end: int) -> Optional[Span]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return (start, end) if start < end else None


def split_sentences(text: str, abbreviations: Optional[Iterable[str]] = None,
                    paragraph_breaks: bool = True) -> List[Span]:
    """
    Rule-based sentence boundaries over the normalized text.

    A boundary follows a run of . ! ? (plus any closing quotes/brackets)
    when whitespace and then an uppercase letter or an opening quote come
    next, unless the text before it ends with a stop-listed abbreviation.
    A blank line is always a boundary when paragraph_breaks is set.
    Returned spans are trimmed of whitespace and partition the
    non-whitespace extent of the text.
    """
    norm = normalize_text(text)
    if abbreviations is None:
        abbrevs = load_abbreviations()
    else:
        abbrevs = _parse_abbreviation_lines(abbreviations)

    cuts = set()
    for m in _TERMINAL.finditer(norm):
        end = m.end()
        nxt = end
        while nxt < len(norm) and norm[nxt].isspace():
            nxt += 1
        following = norm[nxt]
        if not (following.isupper() or following in OPENING_MARKS):
            continue
        if m.group().startswith(".") and _ends_with_abbreviation(norm, m.start() + 1, abbrevs):
            continue
        cuts.add(end)

    if paragraph_breaks:
        for m in _PARAGRAPH_BREAK.finditer(norm):
            cuts.add(m.start())

    spans: List[Span] = []
    prev = 0
    for cut in sorted(cuts) + [len(norm)]:
        span = _trimmed(norm, prev, cut)
        if span:
            spans.append(span)
        prev = cut
    return spans


def segment(text: str, abbreviations: Optional[Iterable[str]] = None) -> SegmentedDocument:
    """Tokenize and sentence-split a document, tagging each token with its sentence."""
    norm = normalize_text(text)
    sentences = split_sentences(norm, abbreviations=abbreviations)
    tokens: List[Token] = []
    si = 0
    for tok in tokenize(norm):
        while si < len(sentences) and tok.span[0] >= sentences[si][1]:
            si += 1
        if si >= len(sentences) or tok.span[0] < sentences[si][0] or tok.span[1] > sentences[si][1]:
            raise InvalidArgumentError(f"token {tok.text!r} at {tok.span} is outside every sentence span")
        tokens.append(Token(tok.text, tok.span, si))
    return SegmentedDocument(text=norm, sentences=tuple(sentences), tokens=tuple(tokens))


# =====================================================
# Noun-phrase chunking
# =====================================================
_TAG_CODES = {"DET": "D", "ADJ": "A", "NOUN": "N", "PROPN": "P"}
_COMMON_NP = re.compile(r"D?A*N+")
_PROPER_NP = re.compile(r"P+")


def chunk_noun_phrases(tagged: Sequence[Tuple[str, str]]) -> List[Tuple[int, int]]:
    """
    Cover a tagged token sequence with half-open ranges.

    Maximal matches of DET? ADJ* NOUN+ or PROPN+ become phrases; every
    other token (verbs included) is a singleton range.
    """
    codes = "".join(_TAG_CODES.get(tag, "x") for _, tag in tagged)
    ranges: List[Tuple[int, int]] = []
    i = 0
    while i < len(codes):
        best = 0
        for pattern in (_COMMON_NP, _PROPER_NP):
            m = pattern.match(codes, i)
            if m:
                best = max(best, m.end() - i)
        step = max(best, 1)
        ranges.append((i, i + step))
        i += step
    return ranges


def _attach_punctuation(ranges: List[Tuple[int, int]], texts: Sequence[str]) -> List[Tuple[int, int]]:
    """Fold punctuation-only ranges into the preceding range (the following one at sentence start)."""
    out: List[Tuple[int, int]] = []
    pending_start: Optional[int] = None
    for a, b in ranges:
        punct_only = all(is_punct(texts[i]) for i in range(a, b))
        if punct_only and out:
            out[-1] = (out[-1][0], b)
        elif punct_only:
            pending_start = a if pending_start is None else pending_start
        else:
            if pending_start is not None:
                a = pending_start
                pending_start = None
            out.append((a, b))
    if pending_start is not None:
        out.append((pending_start, ranges[-1][1]))
    return out


def _phrase_ranges(doc: SegmentedDocument) -> List[Tuple[int, int]]:
    ranges: List[Tuple[int, int]] = []
    texts = doc.token_texts
    for s_start, s_end in doc.sentence_token_ranges():
        words = texts[s_start:s_end]
        if not words:
            continue
        chunks = chunk_noun_phrases(list(zip(words, tag_sentence(words))))
        chunks = _attach_punctuation(chunks, words)
        ranges.extend((s_start + a, s_start + b) for a, b in chunks)
    return ranges


def unit_ranges(doc: SegmentedDocument, level: Level) -> List[Tuple[int, int]]:
    level = Level(level)
    if level is Level.TOKEN:
        return [(i, i + 1) for i in range(len(doc.tokens))]
    if level is Level.SENTENCE:
        return [r for r in doc.sentence_token_ranges() if r[1] > r[0]]
    return _phrase_ranges(doc)


# =====================================================
# Unit merging
# =====================================================
def merge_units(scored: Sequence[ScoredToken], level: Level, segmentation: SegmentedDocument) -> List[LexicalUnit]:
    """
    Group scored tokens into lexical units; a unit's self-information is
    the sum of its tokens' values, added left to right.
    """
    tokens = segmentation.tokens
    if len(scored) != len(tokens):
        first = min(len(scored), len(tokens))
        raise InvalidArgumentError(
            f"scored tokens ({len(scored)}) and segmentation tokens ({len(tokens)}) "
            f"differ in length; first mismatching index {first}"
        )
    for i, (s, t) in enumerate(zip(scored, tokens)):
        if s.text != t.text or tuple(s.span) != tuple(t.span):
            raise InvalidArgumentError(
                f"scored token {s.text!r}{s.span} does not match segmentation token "
                f"{t.text!r}{t.span}; first mismatching index {i}"
            )

    level = Level(level)
    units: List[LexicalUnit] = []
    for a, b in unit_ranges(segmentation, level):
        start = tokens[a].span[0]
        end = tokens[b - 1].span[1]
        units.append(LexicalUnit(
            kind=level,
            token_range=(a, b),
            text=segmentation.text[start:end],
            self_info=sum(s.self_info for s in scored[a:b]),
        ))
    return units


def document_stats(doc: SegmentedDocument) -> dict:
    """Sentence, phrase and token unit counts of one document."""
    return {
        "sentences": len(unit_ranges(doc, Level.SENTENCE)),
        "phrases": len(unit_ranges(doc, Level.PHRASE)),
        "tokens": len(doc.tokens),
    }
