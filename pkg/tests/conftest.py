import sys
from pathlib import Path

import pytest

from hmxforge.harness import corpus_dir, corpus_path
from hmxforge.lang import load_subject

DATA = Path(__file__).parent / "data"
CORPUS = sorted(p.stem for p in corpus_dir().glob("*.subj"))

_cache: dict = {}


def unit_of(name: str):
    """Load a corpus subject or a tests/data fixture once per session."""
    if name not in _cache:
        path = DATA / f"{name}.subj"
        if path.exists():
            _cache[name] = load_subject(path, search_dirs=[DATA])
        else:
            _cache[name] = load_subject(corpus_path(name))
    return _cache[name]


@pytest.fixture(scope="session")
def fraction():
    return unit_of("fraction")


@pytest.fixture(scope="session")
def stemmer():
    return unit_of("stemmer")


@pytest.fixture(scope="session")
def counter():
    return unit_of("line")


@pytest.fixture(scope="session")
def segment():
    return unit_of("segment")


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[n])
