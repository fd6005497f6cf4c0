import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partlda.corpus import (BoundsError, Corpus, CoverageError, FormatError, ParseError, TimestampTable,
                            corpus_from_text, generate_synthetic, load_timestamps, load_uci_bow,
                            write_uci_bow)
from partlda.workload import build_workload


def test_load_minimal():
    c = corpus_from_text("2\n3\n2\n1 1 4\n2 3 1\n")
    assert (c.doc_count, c.vocab_size, c.total_tokens) == (2, 3, 5)
    assert c.doc(0) == [(0, 4)]
    assert c.doc(1) == [(2, 1)]


def test_duplicate_pairs_are_summed():
    c = corpus_from_text("1\n2\n3\n1 1 2\n1 2 1\n1 1 3\n")
    assert c.doc(0) == [(0, 5), (1, 1)]
    assert c.total_tokens == 6


def test_missing_documents_are_empty():
    c = corpus_from_text("3\n2\n1\n3 2 7\n")
    assert c.doc(0) == [] and c.doc(1) == []
    assert c.doc_lengths.tolist() == [0, 0, 7]


def test_vocab_stream():
    c = corpus_from_text("1\n2\n1\n1 2 1\n", "alpha\nbeta\n")
    assert c.vocab == ("alpha", "beta")


def test_word_out_of_range():
    with pytest.raises(BoundsError):
        corpus_from_text("2\n3\n1\n1 5 1\n")


def test_doc_out_of_range():
    with pytest.raises(BoundsError):
        corpus_from_text("2\n3\n1\n3 1 1\n")


def test_malformed_line_reports_line_number():
    with pytest.raises(ParseError) as err:
        corpus_from_text("2\n3\n2\n1 1 4\n2 x 1\n")
    assert err.value.lineno == 5
    assert "line 5" in str(err.value)


def test_entry_count_mismatch():
    with pytest.raises(FormatError):
        corpus_from_text("2\n3\n3\n1 1 4\n2 3 1\n")


def test_truncated_header():
    with pytest.raises(FormatError):
        corpus_from_text("2\n3\n")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_round_trip(n_docs, n_vocab, data):
    triples = data.draw(st.lists(st.tuples(st.integers(0, n_docs - 1), st.integers(0, n_vocab - 1), st.integers(1, 9)),
                                 max_size=20))
    docs, words, counts = zip(*triples) if triples else ((), (), ())
    c = Corpus.from_triples(n_docs, n_vocab, docs, words, counts)
    out = io.StringIO()
    write_uci_bow(c, out)
    again = load_uci_bow(io.StringIO(out.getvalue()))
    assert again == c
    assert again.total_tokens == sum(counts)
    assert again.total_tokens == int(c.doc_lengths.sum())


def test_timestamps_two_years(tiny_corpus):
    table = load_timestamps(io.StringIO("1\t1951\n2\t2010\n"), tiny_corpus, ts_length=16)
    assert table.timestamp_vocab_size == 2
    assert table.ids[0].tolist() == [0] * 16
    assert table.ids[1].tolist() == [1] * 16
    assert (table.first, table.last) == (1951, 2010)


def test_timestamps_sixty_years():
    years = np.arange(1951, 2011)
    table = TimestampTable.from_years(np.concatenate([years, years[::-1]]), 16)
    assert table.timestamp_vocab_size == 60
    assert (table.first, table.last) == (1951, 2010)
    assert table.ids.shape == (120, 16)


def test_timestamps_missing_doc(tiny_corpus):
    with pytest.raises(CoverageError):
        load_timestamps(io.StringIO("1\t1951\n"), tiny_corpus)


def test_timestamps_bad_year(tiny_corpus):
    with pytest.raises(ParseError):
        load_timestamps(io.StringIO("1\t1951\n2\tnineteen\n"), tiny_corpus)


def test_timestamps_duplicate_doc(tiny_corpus):
    with pytest.raises(FormatError):
        load_timestamps(io.StringIO("1\t1951\n1\t1952\n"), tiny_corpus)


def test_synthetic_deterministic():
    assert generate_synthetic(10, 20, 5, 1.1, seed=7) == generate_synthetic(10, 20, 5, 1.1, seed=7)
    assert generate_synthetic(10, 20, 5, 1.1, seed=7) != generate_synthetic(10, 20, 5, 1.1, seed=8)


def test_synthetic_column_skew():
    matrix = build_workload(generate_synthetic(2000, 5000, 100, 1.1, seed=1))
    cw = matrix.col_workloads
    assert cw.max() > 10 * np.median(cw)


def test_synthetic_degenerate():
    c = generate_synthetic(1, 1, 3, 1.0, seed=0)
    assert (c.doc_count, c.vocab_size, c.total_tokens) == (1, 1, 3)
    assert c.doc(0) == [(0, 3)]


def test_synthetic_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_synthetic(0, 5, 5, 1.0, 0)
    with pytest.raises(ValueError):
        generate_synthetic(5, 5, 5, 0.0, 0)


def test_corpus_is_immutable(tiny_corpus):
    with pytest.raises(ValueError):
        tiny_corpus.counts[0] = 9
