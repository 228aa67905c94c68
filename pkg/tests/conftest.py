import pytest

from dpdetect.corpus import NEGATIVE, POSITIVE, Corpus, Document
from dpdetect.fixture import separable_corpus, synthetic_corpus

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_corpus(texts, labels, prefix="d"):
    return Corpus(tuple(Document(f"{prefix}{i}", t, y) for i, (t, y) in enumerate(zip(texts, labels))), "test")


@pytest.fixture(scope="session")
def synthetic():
    return synthetic_corpus(1000, 0.95, seed=0)


@pytest.fixture(scope="session")
def hurry_corpus():
    return separable_corpus(40, seed=3, marker="hurry")


@pytest.fixture
def write_csv(tmp_path):
    def write(rows, name="data.csv", header="text,label"):
        path = tmp_path / name
        path.write_text(header + "\n" + "".join(r + "\n" for r in rows), encoding="utf-8")
        return path

    return write


__all__ = ["make_corpus", "POSITIVE", "NEGATIVE"]
