import json
import unicodedata
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


class TableEmbeddingBackend:
    """Test backend with a fixed text -> vector table; unknown text is loud."""

    kind = "table"

    def __init__(self, mapping, model_id="table", dimension=2, max_batch=16):
        self.mapping = {unicodedata.normalize("NFC", k): v for k, v in mapping.items()}
        self.model_id = model_id
        self.dimension = dimension
        self.max_batch = max_batch

    def embed_batch(self, texts):
        return [self.mapping[unicodedata.normalize("NFC", t)] for t in texts]


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def toy_corpus_path():
    return FIXTURES / "toy_corpus.jsonl"


@pytest.fixture(scope="session")
def qa30_path():
    return FIXTURES / "qa30.jsonl"


@pytest.fixture(scope="session")
def fixture_script_path():
    return FIXTURES / "script.jsonl"


def load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_jsonl(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records
