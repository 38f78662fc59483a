# tests/test_doc_loader.py
"""
Ingestion of txt, jsonl and convo-json inputs.

Usage:
  pytest tests/test_doc_loader.py -q
"""

import json

import pytest

from app.doc_loader import InputDocument, Turn, ingest
from app.errors import IngestError


def test_txt_is_one_document(write_file):
    path = write_file("paper_intro.txt", "Some text.\nMore text.\n")
    docs = ingest(path, "txt")
    assert docs == [InputDocument(id="paper_intro", body="Some text.\nMore text.\n")]


def test_jsonl_one_document_per_line(write_file):
    lines = [json.dumps({"id": f"d{i}", "body": f"Body {i}."}) for i in range(3)]
    docs = ingest(write_file("batch.jsonl", "\n".join(lines) + "\n\n"), "jsonl")
    assert [d.id for d in docs] == ["d0", "d1", "d2"]
    assert docs[1].body == "Body 1."
    assert all(d.kind == "article" for d in docs)


def test_jsonl_missing_body_names_the_line(write_file):
    content = json.dumps({"id": "a", "body": "x"}) + "\n" + json.dumps({"id": "b"}) + "\n"
    with pytest.raises(IngestError) as exc:
        ingest(write_file("bad.jsonl", content), "jsonl")
    assert exc.value.line == 2
    assert "body" in str(exc.value) and "bad.jsonl:2" in str(exc.value)


def test_jsonl_invalid_json_names_the_line(write_file):
    content = json.dumps({"id": "a", "body": "x"}) + "\n{not json\n"
    with pytest.raises(IngestError) as exc:
        ingest(write_file("broken.jsonl", content), "jsonl")
    assert exc.value.line == 2


def test_conversation_turns_become_prefixed_body(write_file):
    convo = {"id": "chat-1", "turns": [{"speaker": "user", "text": "Hi there."},
                                        {"speaker": "assistant", "text": "Hello!"}]}
    docs = ingest(write_file("chat.json", json.dumps(convo)), "convo-json")
    assert len(docs) == 1
    doc = docs[0]
    assert doc.kind == "conversation" and doc.is_conversation
    assert doc.body == "user: Hi there.\n\nassistant: Hello!"
    assert doc.turns == (Turn("user", "Hi there."), Turn("assistant", "Hello!"))
    assert doc.history == "user: Hi there."
    assert doc.final_turn == "assistant: Hello!"


def test_conversation_list(write_file):
    convos = [{"id": f"c{i}", "turns": [{"speaker": "user", "text": "q"}]} for i in range(2)]
    docs = ingest(write_file("chats.json", json.dumps(convos)), "convo-json")
    assert [d.id for d in docs] == ["c0", "c1"]


def test_conversation_invalid_turn(write_file):
    convo = {"id": "c", "turns": [{"speaker": "user"}]}
    with pytest.raises(IngestError, match="turn 1"):
        ingest(write_file("chat.json", json.dumps(convo)), "convo-json")


def test_conversation_invalid_json_reports_line(write_file):
    with pytest.raises(IngestError) as exc:
        ingest(write_file("chat.json", '{\n  "id": "c",\n  "turns": [,]\n}'), "convo-json")
    assert exc.value.line == 3


@pytest.mark.parametrize("fmt,name", [("txt", "e.txt"), ("jsonl", "e.jsonl"), ("convo-json", "e.json")])
def test_empty_file_is_an_empty_batch(write_file, fmt, name):
    assert ingest(write_file(name, ""), fmt) == []


def test_duplicate_ids_rejected(write_file):
    content = "\n".join(json.dumps({"id": "same", "body": b}) for b in ("x", "y"))
    with pytest.raises(IngestError, match="duplicate"):
        ingest(write_file("dup.jsonl", content), "jsonl")


def test_unknown_format_and_missing_file(tmp_path):
    with pytest.raises(IngestError):
        ingest(str(tmp_path / "x.txt"), "csv")
    with pytest.raises(IngestError):
        ingest(str(tmp_path / "missing.txt"), "txt")
