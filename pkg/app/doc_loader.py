# app/doc_loader.py
"""
Document ingestion.

  txt         whole file is one article; id = file name without extension
  jsonl       one {"id", "body"} object per line; blank lines skipped
  convo-json  one {"id", "turns": [{"speaker", "text"}, ...]} object, or a list of them

An empty file is an empty batch. Ids must be unique within a batch.
"""

import json
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from .errors import IngestError
from .log import get_logger

FORMATS = ("txt", "jsonl", "convo-json")
TURN_SEPARATOR = "\n\n"

logger = get_logger("app.doc_loader")


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str

    def render(self) -> str:
        return f"{self.speaker}: {self.text}"


@dataclass(frozen=True)
class InputDocument:
    id: str
    body: str
    kind: str = "article"
    turns: Tuple[Turn, ...] = ()

    @classmethod
    def conversation(cls, doc_id: str, turns: Iterable[Turn]) -> "InputDocument":
        turns = tuple(turns)
        return cls(id=doc_id, body=TURN_SEPARATOR.join(t.render() for t in turns),
                   kind="conversation", turns=turns)

    @property
    def is_conversation(self) -> bool:
        return self.kind == "conversation"

    @property
    def history(self) -> str:
        """Every turn but the last; this is what gets compressed."""
        return TURN_SEPARATOR.join(t.render() for t in self.turns[:-1])

    @property
    def final_turn(self) -> str:
        return self.turns[-1].render() if self.turns else ""


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise IngestError(f"cannot read file: {e.strerror or e}", path=path) from e
    except UnicodeDecodeError as e:
        raise IngestError(f"not valid UTF-8 at byte {e.start}", path=path) from e


def _string_field(obj: dict, key: str, path: str, line: int) -> str:
    if key not in obj:
        raise IngestError(f'missing field "{key}"', path=path, line=line)
    value = obj[key]
    if not isinstance(value, str):
        raise IngestError(f'field "{key}" must be a string', path=path, line=line)
    return value


def _load_txt(path: str, raw: str) -> List[InputDocument]:
    if not raw.strip():
        return []
    doc_id = os.path.splitext(os.path.basename(path))[0]
    return [InputDocument(id=doc_id, body=raw)]


def _load_jsonl(path: str, raw: str) -> List[InputDocument]:
    docs: List[InputDocument] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise IngestError(f"invalid JSON at column {e.colno}: {e.msg}", path=path, line=lineno) from e
        if not isinstance(obj, dict):
            raise IngestError("expected a JSON object", path=path, line=lineno)
        docs.append(InputDocument(id=_string_field(obj, "id", path, lineno),
                                  body=_string_field(obj, "body", path, lineno)))
    return docs


def _load_convo(path: str, raw: str) -> List[InputDocument]:
    if not raw.strip():
        return []
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise IngestError(f"invalid JSON at column {e.colno}: {e.msg}", path=path, line=e.lineno) from e

    items = data if isinstance(data, list) else [data]
    docs: List[InputDocument] = []
    for n, item in enumerate(items, start=1):
        where = f"conversation {n}: "
        if not isinstance(item, dict):
            raise IngestError(where + "expected a JSON object", path=path)
        if not isinstance(item.get("id"), str):
            raise IngestError(where + 'missing string field "id"', path=path)
        turns = item.get("turns")
        if not isinstance(turns, list) or not turns:
            raise IngestError(where + '"turns" must be a non-empty list', path=path)
        parsed: List[Turn] = []
        for t, turn in enumerate(turns, start=1):
            if not isinstance(turn, dict) or not isinstance(turn.get("speaker"), str) \
                    or not isinstance(turn.get("text"), str):
                raise IngestError(where + f'turn {t} needs string "speaker" and "text"', path=path)
            parsed.append(Turn(turn["speaker"], turn["text"]))
        docs.append(InputDocument.conversation(item["id"], parsed))
    return docs


_LOADERS = {"txt": _load_txt, "jsonl": _load_jsonl, "convo-json": _load_convo}


def ingest(path: str, fmt: str = "txt") -> List[InputDocument]:
    if fmt not in _LOADERS:
        raise IngestError(f"unknown input format {fmt!r}; expected one of {', '.join(FORMATS)}", path=path)
    docs = _LOADERS[fmt](path, _read(path))
    check_unique_ids(docs, path)
    logger.debug("Ingested %d documents from %s (%s)", len(docs), path, fmt)
    return docs


def check_unique_ids(docs: Iterable[InputDocument], path: Optional[str] = None) -> None:
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise IngestError(f"duplicate document id {doc.id!r}", path=path)
        seen.add(doc.id)
