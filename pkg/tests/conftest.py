import numpy as np
import pytest

from partlda.corpus import Corpus, TimestampTable, generate_synthetic, generate_years

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for the acceptance summary."""
    def record(number, ok, detail):
        verdict = "NOT RUN" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{verdict}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_corpus():
    # d0: w0 x4 ; d1: w2 x1
    return Corpus.from_triples(2, 3, [0, 1], [0, 2], [4, 1])


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(60, 80, 20, 1.0, seed=3)


@pytest.fixture(scope="session")
def small_years(small_corpus):
    return generate_years(small_corpus.doc_count, 1990, 2009, seed=3)


@pytest.fixture(scope="session")
def small_timestamps(small_years):
    return TimestampTable.from_years(small_years, 16)


def random_dense(rng, n_docs, n_vocab, density=0.6, high=9):
    m = rng.integers(1, high + 1, size=(n_docs, n_vocab)) * (rng.random((n_docs, n_vocab)) < density)
    return m.astype(np.int64)
