# app/remote.py
"""
Remote causal-LM scorer (echo-with-logprobs, never sampling).

Wire ("native" profile):
  POST <endpoint>/score   {"text": str, "echo": true}
  ->  {"tokens": [str], "token_logprobs": [number|null], "byte_offsets": [[int, int]]}

The "openai" profile sends the same chunk to an OpenAI-compatible
completions endpoint with echo=True, logprobs=0, max_tokens=0 and maps the
character text_offset list onto byte offsets.

Backend sub-tokens are realigned onto caller tokens by byte offsets and
their logprobs summed (self-information is additive). Any sub-token that
straddles two caller tokens, or a caller token left without mass, is an
AlignmentError.
"""

import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import httpx

from .errors import AlignmentError, InvalidArgumentError, RemoteScoringError
from .log import get_logger
from .scoring import ScorerBackend, ScoringRequest

# ---------------------------
# CONFIG
# ---------------------------
DEFAULT_CHUNK_BYTES = 8 * 1024
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_ATTEMPTS = 3
DEFAULT_BACKOFF_SECONDS = 0.5
DEFAULT_TIMEOUT_SECONDS = 30.0
API_KEY_ENV = "SELECTIVE_CONTEXT_API_KEY"
PROFILES = ("native", "openai")

BASE_DIR = os.path.dirname(__file__)
DATA_DIR = os.path.join(BASE_DIR, "..", "data")

logger = get_logger("app.remote")


def load_api_key() -> Optional[str]:
    for env in (API_KEY_ENV, "OPENAI_API_KEY"):
        key = os.environ.get(env)
        if key:
            return key.strip()

    candidate = os.path.join(DATA_DIR, ".api_key")
    if os.path.exists(candidate):
        try:
            with open(candidate, "r", encoding="utf-8") as f:
                return f.read().strip() or None
        except OSError:
            pass
    return None


@dataclass(frozen=True)
class RemoteConfig:
    endpoint: str
    api_key: Optional[str] = None
    profile: str = "native"
    model: Optional[str] = None
    max_request_bytes: int = DEFAULT_CHUNK_BYTES
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    attempts: int = DEFAULT_ATTEMPTS
    backoff_seconds: float = DEFAULT_BACKOFF_SECONDS
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise InvalidArgumentError(f"unknown remote profile {self.profile!r}; expected one of {PROFILES}")
        if self.profile == "openai" and not self.model:
            raise InvalidArgumentError("the openai profile needs a model name")
        if self.max_in_flight < 1 or self.attempts < 1 or self.max_request_bytes < 1:
            raise InvalidArgumentError("max_in_flight, attempts and max_request_bytes must be >= 1")

    @property
    def score_url(self) -> str:
        return self.endpoint.rstrip("/") + "/score"


@dataclass(frozen=True)
class SubToken:
    text: str
    byte_span: Tuple[int, int]
    logprob: float


@dataclass(frozen=True)
class RemoteScore:
    logprobs: List[List[float]]
    retries: int


# =====================================================
# Offsets and realignment
# =====================================================
def char_to_byte_offsets(text: str) -> List[int]:
    """offsets[i] = UTF-8 byte offset of character i; offsets[len(text)] = total bytes."""
    out = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        out[i] = pos
        pos += len(ch.encode("utf-8"))
    out[len(text)] = pos
    return out


def parse_score_response(payload: Any, span: Optional[Tuple[int, int]] = None) -> List[SubToken]:
    """Validate a native /score response body."""
    if not isinstance(payload, dict):
        raise RemoteScoringError("malformed response: body is not a JSON object", span=span, retriable=False)
    try:
        tokens = payload["tokens"]
        logprobs = payload["token_logprobs"]
        offsets = payload["byte_offsets"]
    except KeyError as e:
        raise RemoteScoringError(f"malformed response: missing field {e}", span=span, retriable=False) from e
    if not (isinstance(tokens, list) and isinstance(logprobs, list) and isinstance(offsets, list)):
        raise RemoteScoringError("malformed response: fields must be lists", span=span, retriable=False)
    if not len(tokens) == len(logprobs) == len(offsets):
        raise RemoteScoringError(
            f"malformed response: {len(tokens)} tokens, {len(logprobs)} logprobs, {len(offsets)} offsets",
            span=span, retriable=False,
        )

    out: List[SubToken] = []
    for i, (tok, lp, off) in enumerate(zip(tokens, logprobs, offsets)):
        if lp is None:
            if i != 0:
                raise RemoteScoringError(f"malformed response: null logprob at position {i}", span=span, retriable=False)
            logger.warning("Null logprob for first sub-token %r; treating it as 0 bits", tok)
            lp = 0.0
        if isinstance(lp, bool) or not isinstance(lp, (int, float)) or not math.isfinite(lp):
            raise RemoteScoringError(f"malformed response: logprob {lp!r} at position {i}", span=span, retriable=False)
        if not (isinstance(off, (list, tuple)) and len(off) == 2 and all(isinstance(x, int) for x in off)):
            raise RemoteScoringError(f"malformed response: byte offset {off!r} at position {i}", span=span, retriable=False)
        out.append(SubToken(text=str(tok), byte_span=(off[0], off[1]), logprob=float(lp)))
    return out


def realign_subtokens(chunk_text: str, caller_spans: Sequence[Tuple[int, int]],
                      subtokens: Sequence[SubToken]) -> List[float]:
    """
    Sum sub-token logprobs per caller token.

    caller_spans are character offsets relative to chunk_text. Sub-tokens
    made only of inter-token bytes (whitespace) are carried to the next
    caller token, or to the last one at the end of the chunk.
    """
    c2b = char_to_byte_offsets(chunk_text)
    n_bytes = c2b[-1]
    owner = [-1] * n_bytes
    for j, (s, e) in enumerate(caller_spans):
        for b in range(c2b[s], c2b[e]):
            owner[b] = j

    sums = [0.0] * len(caller_spans)
    hit = [False] * len(caller_spans)
    pending = 0.0
    last_owner = -1
    prev_end = 0
    for st in subtokens:
        s, e = st.byte_span
        if not 0 <= s <= e <= n_bytes or s < prev_end:
            raise AlignmentError(f"sub-token {st.text!r} has out-of-order or out-of-range byte offsets {st.byte_span}")
        prev_end = e
        owners = {owner[b] for b in range(s, e)} - {-1}
        if not owners:
            pending += st.logprob
            continue
        if len(owners) > 1:
            raise AlignmentError(f"sub-token {st.text!r} at bytes {st.byte_span} straddles caller tokens {sorted(owners)}")
        j = owners.pop()
        if j < last_owner:
            raise AlignmentError(f"sub-token {st.text!r} maps back onto an earlier caller token")
        sums[j] += pending + st.logprob
        pending = 0.0
        hit[j] = True
        last_owner = j

    if last_owner < 0 and caller_spans:
        raise AlignmentError("no sub-token overlaps any caller token")
    if pending:
        sums[last_owner] += pending
    missing = [j for j, ok in enumerate(hit) if not ok]
    if missing:
        s, e = caller_spans[missing[0]]
        raise AlignmentError(f"caller token {chunk_text[s:e]!r} received no sub-token mass")
    return sums


# =====================================================
# Transport
# =====================================================
def _auth_headers(config: RemoteConfig) -> Dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    return headers


def _with_retries(call: Callable[[], Any], config: RemoteConfig, span: Tuple[int, int]) -> Tuple[Any, int]:
    """Run call() up to config.attempts times with exponential backoff on retriable errors."""
    retries = 0
    for attempt in range(config.attempts):
        try:
            return call(), retries
        except RemoteScoringError as e:
            if not e.retriable or attempt == config.attempts - 1:
                raise
            delay = config.backoff_seconds * (2 ** attempt)
            logger.warning("Remote scoring attempt %d/%d failed (%s); retrying in %.2fs",
                           attempt + 1, config.attempts, e, delay)
            retries += 1
            if delay > 0:
                time.sleep(delay)
    raise RemoteScoringError("remote scoring exhausted its attempts", span=span)


def _native_call(client: httpx.Client, config: RemoteConfig, text: str, span: Tuple[int, int]) -> List[SubToken]:
    try:
        resp = client.post(config.score_url, json={"text": text, "echo": True}, headers=_auth_headers(config))
    except httpx.HTTPError as e:
        raise RemoteScoringError(f"transport error: {e}", span=span, retriable=True) from e
    if resp.status_code >= 500 or resp.status_code == 429:
        raise RemoteScoringError(f"HTTP {resp.status_code}", span=span, retriable=True, status_code=resp.status_code)
    if resp.status_code >= 400:
        raise RemoteScoringError(f"HTTP {resp.status_code}: {resp.text[:200]}", span=span, retriable=False,
                                 status_code=resp.status_code)
    try:
        payload = resp.json()
    except ValueError as e:
        raise RemoteScoringError(f"malformed response: {e}", span=span, retriable=False) from e
    return parse_score_response(payload, span=span)


def _openai_call(oai: Any, config: RemoteConfig, text: str, span: Tuple[int, int]) -> List[SubToken]:
    import openai

    try:
        resp = oai.completions.create(
            model=config.model,
            prompt=text,
            echo=True,
            logprobs=0,
            max_tokens=0,
            temperature=0,
        )
    except (openai.APIConnectionError, openai.RateLimitError, openai.InternalServerError) as e:
        raise RemoteScoringError(f"openai transport error: {e}", span=span, retriable=True) from e
    except openai.APIError as e:
        raise RemoteScoringError(f"openai error: {e}", span=span, retriable=False) from e

    try:
        lp = resp.choices[0].logprobs
        tokens = list(lp.tokens)
        token_logprobs = list(lp.token_logprobs)
        text_offset = list(lp.text_offset)
    except (AttributeError, IndexError, TypeError) as e:
        raise RemoteScoringError(f"malformed completion-echo response: {e}", span=span, retriable=False) from e

    c2b = char_to_byte_offsets(text)
    clip = lambda i: c2b[min(max(i, 0), len(text))]  # noqa: E731
    byte_offsets = []
    for i, start in enumerate(text_offset):
        end = text_offset[i + 1] if i + 1 < len(text_offset) else len(text)
        byte_offsets.append([clip(start), clip(end)])
    return parse_score_response(
        {"tokens": tokens, "token_logprobs": token_logprobs, "byte_offsets": byte_offsets}, span=span
    )


def remote_score(config: RemoteConfig, chunks: Sequence[ScoringRequest],
                 http_client: Optional[httpx.Client] = None, openai_client: Any = None,
                 limiter: Optional[threading.BoundedSemaphore] = None) -> RemoteScore:
    """
    Score each chunk with one echo request, at most config.max_in_flight at
    a time. Output order equals input order regardless of retries.

    Callers that score several documents at once pass a shared `limiter`
    so the cap holds across calls.
    """
    if limiter is None:
        limiter = threading.BoundedSemaphore(config.max_in_flight)
    own_client = None
    if config.profile == "native" and http_client is None:
        own_client = http_client = httpx.Client(timeout=config.timeout_seconds)
    if config.profile == "openai" and openai_client is None:
        from openai import OpenAI
        openai_client = OpenAI(api_key=config.api_key or "EMPTY", base_url=config.endpoint,
                               max_retries=0, timeout=config.timeout_seconds)

    def work(req: ScoringRequest) -> Tuple[List[float], int]:
        text = req.chunk_text
        base = req.span[0]
        spans = [(t.span[0] - base, t.span[1] - base) for t in req.tokens]

        def call() -> List[SubToken]:
            with limiter:
                if config.profile == "native":
                    return _native_call(http_client, config, text, req.span)
                return _openai_call(openai_client, config, text, req.span)

        subtokens, retries = _with_retries(call, config, req.span)
        try:
            return realign_subtokens(text, spans, subtokens), retries
        except AlignmentError as e:
            raise AlignmentError(str(e), span=req.span) from e

    try:
        if len(chunks) <= 1 or config.max_in_flight == 1:
            results = [work(c) for c in chunks]
        else:
            with ThreadPoolExecutor(max_workers=config.max_in_flight) as ex:
                results = list(ex.map(work, chunks))
    finally:
        if own_client is not None:
            own_client.close()

    return RemoteScore(logprobs=[r[0] for r in results], retries=sum(r[1] for r in results))


class RemoteBackend(ScorerBackend):
    kind = "remote"

    def __init__(self, config: RemoteConfig, http_client: Optional[httpx.Client] = None,
                 openai_client: Any = None):
        self._config = config
        self._http_client = http_client
        self._openai_client = openai_client
        self._limiter = threading.BoundedSemaphore(config.max_in_flight)
        self.max_request_bytes = config.max_request_bytes

    @property
    def config(self) -> RemoteConfig:
        return self._config

    def context_logprobs(self, requests: Sequence[ScoringRequest]) -> List[List[float]]:
        if any(r.prefix for r in requests):
            raise InvalidArgumentError("the remote scorer cannot condition on a prefix outside the request text")
        result = remote_score(self._config, requests, http_client=self._http_client,
                              openai_client=self._openai_client, limiter=self._limiter)
        if result.retries:
            logger.info("Remote scoring of %d chunks needed %d retries", len(requests), result.retries)
        return result.logprobs

    def describe(self) -> str:
        return f"remote({self._config.profile}:{self._config.endpoint})"
