import json
from pathlib import Path

import pytest

from sac.corpus import Corpus, Document
from sac.synthetic import SyntheticSpec, write_synthetic

GOLDEN = Path(__file__).parent / "golden"


def make_corpus(**docs: str) -> Corpus:
    return Corpus.from_documents([Document(k, v) for k, v in docs.items()])


@pytest.fixture
def golden():
    def read(name):
        path = GOLDEN / name
        text = path.read_text(encoding="utf-8")
        return json.loads(text) if name.endswith(".json") else text
    return read


@pytest.fixture
def synth_dir(tmp_path):
    """Small synthetic corpus plus an offline run.toml."""
    out = tmp_path / "synth"
    write_synthetic(SyntheticSpec(n_docs=8, slot_entropy=40, seed=3), out)
    (out / "run.toml").write_text(
        'corpus_root = "corpus"\nbenchmark_file = "benchmark.json"\nworkdir = "work"\n'
        "k_list = [1, 2, 4]\nseeds = [0]\n\n"
        "[chunk]\nchunk_size = 500\n\n[summary]\nbackend = \"stub\"\n\n"
        "[provider]\nkind = \"hash\"\ndim = 64\n",
        encoding="utf-8")
    return out


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Every test runs offline: any attempt to open a socket connection fails."""
    import socket

    def refuse(*args, **kwargs):
        raise OSError("network access is disabled in the test suite")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def check(number: int, name: str, ok: bool, detail: str = ""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
