# tests/conftest.py
"""
Shared fixtures for the test suite.

Usage:
  pytest -q
  pytest tests/test_selection.py -q
"""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from app.ngram import train_ngram  # noqa: E402

TEST_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
INTRO_FILE = os.path.join(TEST_DATA_DIR, "continual_learning_intro.txt")

EXTRA_CORPUS = (
    "Continual learning trains one model on a stream of tasks. "
    "The model should remember old tasks while it learns new tasks. "
    "Researchers evaluate the model on every task after training. "
    "A model that forgets old tasks suffers from catastrophic forgetting."
)


@pytest.fixture(scope="session")
def intro_text() -> str:
    with open(INTRO_FILE, "r", encoding="utf-8") as f:
        return f.read()


@pytest.fixture(scope="session")
def corpus_text(intro_text) -> str:
    return intro_text + "\n\n" + EXTRA_CORPUS


@pytest.fixture(scope="session")
def trigram_model(corpus_text):
    return train_ngram(corpus_text, order=3, k=0.1)


@pytest.fixture
def write_file(tmp_path):
    def _write(name: str, content: str) -> str:
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return str(path)
    return _write
