# app/ngram.py
"""
Reference n-gram language model (deterministic stand-in for a causal LM).

✔ Counts every order-length window of the training stream exactly once
✔ Add-k smoothing over vocab + one reserved unknown slot, so every
  conditional distribution sums to 1 and every probability is > 0
✔ Binary SCNG model file (little-endian) with magic/version validation

Contexts are padded with BOS at query time only; the training stream is
never padded, so BOS-containing contexts are unseen and score uniformly.
"""

import struct
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from .errors import InvalidArgumentError, ModelFormatError
from .log import get_logger
from .storage import atomic_write_bytes

# ---------------------------
# CONFIG
# ---------------------------
DEFAULT_ORDER = 3
DEFAULT_SMOOTHING_K = 0.1

BOS = "<s>"
UNK = "<unk>"
RESERVED = (BOS, UNK)

SCNG_MAGIC = b"SCNG"
SCNG_VERSION = 1
_HEADER = struct.Struct("<4sIIdI")  # magic, version, order, k, vocab count
_U32 = struct.Struct("<I")
_SUCCESSOR = struct.Struct("<IQ")   # successor id, count

logger = get_logger("app.ngram")

Context = Tuple[str, ...]


@dataclass(frozen=True, eq=False)
class NgramModel:
    order: int
    k: float
    vocab: Tuple[str, ...]
    counts: Mapping[Context, Mapping[str, int]]
    _totals: Dict[Context, int] = field(init=False, repr=False)
    _vocab_set: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        if self.order < 1:
            raise InvalidArgumentError(f"order must be >= 1, got {self.order}")
        if not self.k > 0:
            raise InvalidArgumentError(f"smoothing constant k must be > 0, got {self.k}")
        object.__setattr__(self, "_totals", {ctx: sum(s.values()) for ctx, s in self.counts.items()})
        object.__setattr__(self, "_vocab_set", frozenset(self.vocab))

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def context_key(self, context: Sequence[str]) -> Context:
        """Last order-1 tokens, BOS-padded on the left, unknowns mapped to UNK."""
        width = self.order - 1
        if width == 0:
            return ()
        tail = list(context)[-width:]
        tail = [t if t in self._vocab_set else (BOS if t == BOS else UNK) for t in tail]
        return tuple([BOS] * (width - len(tail)) + tail)

    def count(self, context: Sequence[str], token: str) -> int:
        return self.counts.get(self.context_key(context), {}).get(token, 0)

    def context_total(self, context: Sequence[str]) -> int:
        return self._totals.get(self.context_key(context), 0)

    def prob(self, context: Sequence[str], token: str) -> float:
        ctx = self.context_key(context)
        c = self.counts.get(ctx, {}).get(token, 0) if token in self._vocab_set else 0
        total = self._totals.get(ctx, 0)
        return (c + self.k) / (total + self.k * (len(self.vocab) + 1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, NgramModel):
            return NotImplemented
        return (self.order, self.k, self.vocab) == (other.order, other.k, other.vocab) and \
            {c: dict(s) for c, s in self.counts.items()} == {c: dict(s) for c, s in other.counts.items()}


# =====================================================
# Training
# =====================================================
def train_ngram(corpus: Union[str, Iterable[str]], order: int = DEFAULT_ORDER,
                k: float = DEFAULT_SMOOTHING_K) -> NgramModel:
    """
    Count every order-length window of the token stream once.

    A plain string is tokenized with app.segmentation.tokenize first.
    """
    if isinstance(corpus, str):
        from .segmentation import tokenize
        tokens = [t.text for t in tokenize(corpus)]
    else:
        tokens = [str(t) for t in corpus]

    if not isinstance(order, int) or order < 1:
        raise InvalidArgumentError(f"order must be an integer >= 1, got {order!r}")
    if not k > 0:
        raise InvalidArgumentError(f"smoothing constant k must be > 0, got {k!r}")
    if len(tokens) < order:
        raise InvalidArgumentError(
            f"corpus has {len(tokens)} tokens, fewer than the model order {order}"
        )
    reserved = sorted(set(tokens).intersection(RESERVED))
    if reserved:
        raise InvalidArgumentError(f"corpus contains reserved marker tokens: {reserved}")

    t0 = time.time()
    counts: Dict[Context, Counter] = defaultdict(Counter)
    for i in range(len(tokens) - order + 1):
        window = tokens[i:i + order]
        counts[tuple(window[:-1])][window[-1]] += 1

    model = NgramModel(
        order=order,
        k=float(k),
        vocab=tuple(sorted(set(tokens))),
        counts={ctx: dict(succ) for ctx, succ in counts.items()},
    )
    logger.info(
        "Trained order-%d model: %d tokens, %d types, %d contexts in %.2fs",
        order, len(tokens), model.vocab_size, len(counts), time.time() - t0,
    )
    return model


def ngram_prob(model: NgramModel, context: Sequence[str], next_token: str) -> float:
    return model.prob(context, next_token)


# =====================================================
# SCNG model file
# =====================================================
def encode_ngram(model: NgramModel) -> bytes:
    ids = {w: i for i, w in enumerate(model.vocab)}
    parts: List[bytes] = [_HEADER.pack(SCNG_MAGIC, SCNG_VERSION, model.order, model.k, len(model.vocab))]
    for w in model.vocab:
        raw = w.encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)

    records = []
    for ctx, succ in model.counts.items():
        ctx_ids = tuple(ids[w] for w in ctx)
        for w, c in succ.items():
            records.append((ctx_ids, ids[w], c))
    records.sort()

    ctx_struct = struct.Struct(f"<{model.order - 1}I")
    parts.append(_U32.pack(len(records)))
    for ctx_ids, succ_id, c in records:
        parts.append(ctx_struct.pack(*ctx_ids))
        parts.append(_SUCCESSOR.pack(succ_id, c))
    return b"".join(parts)


def decode_ngram(data: bytes) -> NgramModel:
    try:
        magic, version, order, k, n_vocab = _HEADER.unpack_from(data, 0)
    except struct.error as e:
        raise ModelFormatError(f"truncated SCNG header: {e}") from e
    if magic != SCNG_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {SCNG_MAGIC!r}")
    if version != SCNG_VERSION:
        raise ModelFormatError(f"unsupported SCNG version {version}")
    if order < 1:
        raise ModelFormatError(f"invalid order {order}")

    off = _HEADER.size
    try:
        vocab: List[str] = []
        for _ in range(n_vocab):
            (n,) = _U32.unpack_from(data, off)
            off += _U32.size
            raw = data[off:off + n]
            if len(raw) != n:
                raise ModelFormatError("truncated vocabulary entry")
            vocab.append(raw.decode("utf-8"))
            off += n

        ctx_struct = struct.Struct(f"<{order - 1}I")
        (n_records,) = _U32.unpack_from(data, off)
        off += _U32.size
        counts: Dict[Context, Dict[str, int]] = defaultdict(dict)
        for _ in range(n_records):
            ctx_ids = ctx_struct.unpack_from(data, off)
            off += ctx_struct.size
            succ_id, c = _SUCCESSOR.unpack_from(data, off)
            off += _SUCCESSOR.size
            counts[tuple(vocab[i] for i in ctx_ids)][vocab[succ_id]] = c
    except (struct.error, IndexError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"corrupt SCNG body: {e}") from e
    if off != len(data):
        raise ModelFormatError(f"{len(data) - off} trailing bytes after SCNG records")

    return NgramModel(order=order, k=k, vocab=tuple(vocab), counts=dict(counts))


def save_ngram(model: NgramModel, path: str) -> str:
    atomic_write_bytes(path, encode_ngram(model))
    logger.info("Wrote SCNG model to %s (order=%d, vocab=%d)", path, model.order, model.vocab_size)
    return path


def load_ngram(path: str) -> NgramModel:
    with open(path, "rb") as f:
        data = f.read()
    model = decode_ngram(data)
    logger.debug("Loaded SCNG model %s (order=%d, vocab=%d)", path, model.order, model.vocab_size)
    return model
