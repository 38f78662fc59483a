# app/run_config.py
"""
Run configuration for the compress / visualize / sweep commands.

A RunConfig may be seeded from a JSON file (--config) and is then
overridden by explicit CLI flags. Everything is validated before any
document is touched; unknown keys are rejected.

Scorer specs:
  ngram:<path>     local SCNG model
  remote:<url>     remote echo-scoring endpoint (auth token from the environment)
  uniform:<vocab>  every token scores log2(vocab) bits
"""

import os
from typing import Any, Dict, List, Literal, Optional, Tuple

import httpx
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .datatypes import Baseline, CompressionConfig, Level, ScoringMode
from .errors import ConfigError, SelectiveContextError
from .ngram import load_ngram
from .remote import RemoteBackend, RemoteConfig, load_api_key
from .scoring import NgramBackend, ScorerBackend, UniformBackend
from .storage import load_json

SCORER_KINDS = ("ngram", "remote", "uniform")


def parse_scorer_spec(spec: str) -> Tuple[str, str]:
    kind, sep, arg = spec.partition(":")
    if not sep or kind not in SCORER_KINDS or not arg:
        raise ValueError(f"scorer must look like ngram:<path>, remote:<url> or uniform:<vocab>; got {spec!r}")
    if kind == "uniform":
        try:
            vocab = int(arg)
        except ValueError:
            raise ValueError(f"uniform vocab size must be an integer, got {arg!r}") from None
        if vocab < 1:
            raise ValueError(f"uniform vocab size must be >= 1, got {vocab}")
    if kind == "remote" and not arg.startswith(("http://", "https://")):
        raise ValueError(f"remote scorer needs an http(s) URL, got {arg!r}")
    return kind, arg


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inputs: List[str] = Field(default_factory=list)
    input_format: Literal["txt", "jsonl", "convo-json"] = "txt"
    scorer: Optional[str] = None
    ratio: float = Field(0.5, ge=0.0, le=1.0)
    level: Level = Level.PHRASE
    mode: ScoringMode = ScoringMode.SENTENCE
    output_format: Literal["text", "json", "html"] = "text"
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)
    baseline: Baseline = Baseline.SELECTIVE
    jobs: int = Field(1, ge=1)
    abbrev: Optional[str] = None
    remote_profile: Literal["native", "openai"] = "native"
    remote_model: Optional[str] = None
    output_dir: Optional[str] = None

    @field_validator("scorer")
    @classmethod
    def _check_scorer(cls, v: Optional[str]) -> Optional[str]:
        if v is not None:
            parse_scorer_spec(v)
        return v

    @field_validator("abbrev")
    @classmethod
    def _check_abbrev(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not os.path.isfile(v):
            raise ValueError(f"abbreviation list {v!r} does not exist")
        return v

    def compression_config(self) -> CompressionConfig:
        return CompressionConfig(ratio=self.ratio, level=self.level, seed=self.seed,
                                 mode=self.mode, baseline=self.baseline)


def _format_validation_error(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "config"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_run_config(path: Optional[str] = None, **overrides: Any) -> RunConfig:
    """File values first, then every override that is not None."""
    data: Dict[str, Any] = {}
    if path:
        try:
            loaded = load_json(path)
        except ValueError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        if loaded is None:
            raise ConfigError(f"config file {path} does not exist")
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def build_backend(config: RunConfig, http_client: Optional[httpx.Client] = None,
                  openai_client: Any = None) -> ScorerBackend:
    if config.scorer is None:
        raise ConfigError("no scorer configured; pass --scorer ngram:<path>, remote:<url> or uniform:<vocab>")
    kind, arg = parse_scorer_spec(config.scorer)
    if kind == "uniform":
        return UniformBackend(int(arg))
    if kind == "ngram":
        return NgramBackend(load_ngram(arg))
    try:
        remote = RemoteConfig(endpoint=arg, api_key=load_api_key(), profile=config.remote_profile,
                              model=config.remote_model)
    except SelectiveContextError as e:
        raise ConfigError(str(e)) from e
    return RemoteBackend(remote, http_client=http_client, openai_client=openai_client)
