from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracle_helpers importable

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def tiny_corpus_path() -> Path:
    return FIXTURES / "tiny.json"


@pytest.fixture
def excerpt_corpus_path() -> Path:
    return FIXTURES / "ranking_excerpt.json"


@pytest.fixture
def toy_vocab6_path() -> Path:
    return FIXTURES / "toy_vocab6.json"


@pytest.fixture
def toy_vocab12_path() -> Path:
    return FIXTURES / "toy_vocab12.json"
