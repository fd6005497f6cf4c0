"""Bag-of-words corpora, per-document timestamps, and synthetic generators.

Corpora are read from the UCI ``docword`` layout::

    D
    W
    NNZ
    docID wordID count
    ...

with 1-based ids. Internally everything is 0-based and stored CSR-style:
``doc_ptr[j]:doc_ptr[j+1]`` slices ``word_ids``/``counts`` for document j.
"""

from __future__ import annotations

import gzip
import io
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from partlda import _rng


class CorpusError(ValueError):
    """Base class for malformed corpus or timestamp input."""


class ParseError(CorpusError):
    def __init__(self, lineno: int, line: str, reason: str = "malformed line"):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")


class BoundsError(CorpusError):
    pass


class FormatError(CorpusError):
    pass


class CoverageError(CorpusError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Corpus:
    doc_count: int
    vocab_size: int
    doc_ptr: np.ndarray
    word_ids: np.ndarray
    counts: np.ndarray
    vocab: tuple[str, ...] | None = None
    total_tokens: int = field(init=False)

    def __post_init__(self):
        if self.doc_count < 1 or self.vocab_size < 1:
            raise ValueError("doc_count and vocab_size must be positive")
        if self.doc_ptr.shape != (self.doc_count + 1,) or self.doc_ptr[0] != 0:
            raise ValueError("doc_ptr must have doc_count + 1 entries starting at 0")
        if self.doc_ptr[-1] != len(self.word_ids) or len(self.word_ids) != len(self.counts):
            raise ValueError("doc_ptr, word_ids and counts disagree in length")
        if len(self.word_ids) and (self.word_ids.min() < 0 or self.word_ids.max() >= self.vocab_size):
            raise BoundsError("word id outside vocabulary")
        if len(self.counts) and self.counts.min() < 1:
            raise ValueError("counts must be >= 1")
        if self.vocab is not None and len(self.vocab) != self.vocab_size:
            raise FormatError(f"vocabulary has {len(self.vocab)} entries, expected {self.vocab_size}")
        for a in (self.doc_ptr, self.word_ids, self.counts):
            _frozen(a)
        object.__setattr__(self, "total_tokens", int(self.counts.sum()))

    @classmethod
    def from_triples(cls, doc_count: int, vocab_size: int, docs, words, counts, vocab=None) -> "Corpus":
        """Build from 0-based (doc, word, count) triples; duplicate pairs are summed."""
        docs = np.asarray(docs, dtype=np.int64)
        words = np.asarray(words, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if len(docs):
            if docs.min() < 0 or docs.max() >= doc_count:
                raise BoundsError("document id outside [0, doc_count)")
            if words.min() < 0 or words.max() >= vocab_size:
                raise BoundsError("word id outside [0, vocab_size)")
        key = docs * vocab_size + words
        uniq, inv = np.unique(key, return_inverse=True)
        summed = np.bincount(inv, weights=counts, minlength=len(uniq)).astype(np.int64)
        keep = summed > 0
        uniq, summed = uniq[keep], summed[keep]
        d, w = np.divmod(uniq, vocab_size)
        doc_ptr = np.zeros(doc_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(d, minlength=doc_count), out=doc_ptr[1:])
        return cls(doc_count, vocab_size, doc_ptr, w.astype(np.int32), summed,
                   None if vocab is None else tuple(vocab))

    def doc(self, j: int) -> list[tuple[int, int]]:
        lo, hi = self.doc_ptr[j], self.doc_ptr[j + 1]
        return list(zip(self.word_ids[lo:hi].tolist(), self.counts[lo:hi].tolist()))

    @property
    def doc_lengths(self) -> np.ndarray:
        return np.bincount(self.pair_docs, weights=self.counts, minlength=self.doc_count).astype(np.int64)

    @property
    def pair_docs(self) -> np.ndarray:
        """Document id of every stored (doc, word) pair."""
        return np.repeat(np.arange(self.doc_count, dtype=np.int32), np.diff(self.doc_ptr))

    def expand_tokens(self) -> tuple[np.ndarray, np.ndarray]:
        """One (doc, word) entry per occurrence, doc-major, in stored pair order."""
        reps = self.counts
        return (np.repeat(self.pair_docs, reps).astype(np.int32),
                np.repeat(self.word_ids, reps).astype(np.int32))

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.doc_count == other.doc_count and self.vocab_size == other.vocab_size
                and np.array_equal(self.doc_ptr, other.doc_ptr)
                and np.array_equal(self.word_ids, other.word_ids)
                and np.array_equal(self.counts, other.counts)
                and self.vocab == other.vocab)

    def __repr__(self):
        return f"Corpus(D={self.doc_count}, W={self.vocab_size}, N={self.total_tokens})"


def _lines(stream: IO | Iterable[str]):
    for lineno, raw in enumerate(stream, 1):
        if isinstance(raw, bytes):
            raw = raw.decode()
        yield lineno, raw


def load_uci_bow(docword_stream: IO | Iterable[str], vocab_stream: IO | Iterable[str] | None = None) -> Corpus:
    """Parse a UCI bag-of-words stream into a :class:`Corpus`."""
    header = []
    docs, words, counts = [], [], []
    entries = 0
    for lineno, line in _lines(docword_stream):
        if not line.strip():
            continue
        if len(header) < 3:
            try:
                header.append(int(line))
            except ValueError:
                raise ParseError(lineno, line, "bad header value") from None
            if len(header) == 3:
                n_docs, n_vocab, nnz = header
                if n_docs < 1 or n_vocab < 1 or nnz < 0:
                    raise FormatError(f"invalid header D={n_docs} W={n_vocab} NNZ={nnz}")
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, line)
        try:
            d, w, c = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ParseError(lineno, line) from None
        if not (1 <= d <= n_docs and 1 <= w <= n_vocab):
            raise BoundsError(f"line {lineno}: id out of range (D={n_docs}, W={n_vocab}): {line.strip()!r}")
        if c < 1:
            raise ParseError(lineno, line, "count must be positive")
        docs.append(d - 1)
        words.append(w - 1)
        counts.append(c)
        entries += 1
    if len(header) < 3:
        raise FormatError("missing D/W/NNZ header")
    if entries != nnz:
        raise FormatError(f"header declares {nnz} entries, found {entries}")
    vocab = None
    if vocab_stream is not None:
        vocab = [line.rstrip("\r\n") for _, line in _lines(vocab_stream)]
        while vocab and not vocab[-1]:
            vocab.pop()
    return Corpus.from_triples(n_docs, n_vocab, docs, words, counts, vocab)


def _open_text(path: str | os.PathLike):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rt")
    return open(path)


def read_uci_bow(path: str | os.PathLike, vocab_path: str | os.PathLike | None = None) -> Corpus:
    with _open_text(path) as fh:
        if vocab_path is None:
            return load_uci_bow(fh)
        with _open_text(vocab_path) as vh:
            return load_uci_bow(fh, vh)


def write_uci_bow(corpus: Corpus, stream: IO[str], vocab_stream: IO[str] | None = None) -> None:
    stream.write(f"{corpus.doc_count}\n{corpus.vocab_size}\n{len(corpus.word_ids)}\n")
    docs = corpus.pair_docs
    for d, w, c in zip(docs.tolist(), corpus.word_ids.tolist(), corpus.counts.tolist()):
        stream.write(f"{d + 1} {w + 1} {c}\n")
    if vocab_stream is not None and corpus.vocab is not None:
        for word in corpus.vocab:
            vocab_stream.write(word + "\n")


@dataclass(frozen=True, eq=False)
class TimestampTable:
    """Per-document timestamp arrays of fixed length L."""

    ids: np.ndarray  # (D, L) dense timestamp ids
    timestamp_vocab_size: int
    raw_values: tuple[int, ...]  # raw value of each timestamp id, ascending

    def __post_init__(self):
        if self.ids.ndim != 2 or self.ids.shape[1] < 1:
            raise ValueError("timestamp ids must be a (D, L) array with L >= 1")
        if self.ids.size and (self.ids.min() < 0 or self.ids.max() >= self.timestamp_vocab_size):
            raise BoundsError("timestamp id outside [0, WTS)")
        _frozen(self.ids)

    @property
    def doc_count(self) -> int:
        return self.ids.shape[0]

    @property
    def length(self) -> int:
        return self.ids.shape[1]

    @property
    def first(self) -> int:
        return self.raw_values[0]

    @property
    def last(self) -> int:
        return self.raw_values[-1]

    @classmethod
    def from_years(cls, years: Sequence[int], ts_length: int) -> "TimestampTable":
        """One raw value per document, replicated into a length-L array."""
        if ts_length < 1:
            raise ValueError("L must be positive")
        years = np.asarray(years, dtype=np.int64)
        distinct, dense = np.unique(years, return_inverse=True)
        ids = np.repeat(dense.reshape(-1, 1).astype(np.int32), ts_length, axis=1)
        return cls(ids, len(distinct), tuple(int(year) for year in distinct))


def load_timestamps(stream: IO | Iterable[str], corpus: Corpus, ts_length: int = 16) -> TimestampTable:
    """Parse ``docID<TAB>year`` lines (1-based docID) covering every document."""
    years: dict[int, int] = {}
    for lineno, line in _lines(stream):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(lineno, line)
        try:
            d = int(parts[0])
        except ValueError:
            raise ParseError(lineno, line, "bad document id") from None
        try:
            year = int(parts[1])
        except ValueError:
            raise ParseError(lineno, line, "unparseable year") from None
        if not 1 <= d <= corpus.doc_count:
            raise BoundsError(f"line {lineno}: document {d} outside 1..{corpus.doc_count}")
        if d - 1 in years:
            raise FormatError(f"line {lineno}: document {d} listed twice")
        years[d - 1] = year
    missing = corpus.doc_count - len(years)
    if missing:
        first = next(j for j in range(corpus.doc_count) if j not in years)
        raise CoverageError(f"{missing} document(s) without a timestamp (first: {first + 1})")
    return TimestampTable.from_years([years[j] for j in range(corpus.doc_count)], ts_length)


def read_timestamps(path: str | os.PathLike, corpus: Corpus, ts_length: int = 16) -> TimestampTable:
    with _open_text(path) as fh:
        return load_timestamps(fh, corpus, ts_length)


def write_timestamps(years: Sequence[int], stream: IO[str]) -> None:
    for j, year in enumerate(years):
        stream.write(f"{j + 1}\t{int(year)}\n")


def generate_synthetic(doc_count: int, vocab_size: int, mean_doc_len: int,
                       zipf_exponent: float, seed: int) -> Corpus:
    """Zipf-distributed words over log-normally skewed document lengths.

    Word id 0 is the most frequent. The total token count is exactly
    ``doc_count * mean_doc_len``; individual documents may be empty.
    """
    if doc_count < 1 or vocab_size < 1 or mean_doc_len < 1:
        raise ValueError("doc_count, vocab_size and mean_doc_len must be positive")
    if zipf_exponent <= 0:
        raise ValueError("zipf_exponent must be > 0")
    rng = _rng.stream(seed, _rng.SYNTH)
    weights = rng.lognormal(0.0, 1.0, size=doc_count)
    lengths = rng.multinomial(doc_count * mean_doc_len, weights / weights.sum())
    ranks = np.arange(1, vocab_size + 1, dtype=np.float64)
    p = ranks ** -zipf_exponent
    p /= p.sum()
    words = rng.choice(vocab_size, size=int(lengths.sum()), p=p)
    docs = np.repeat(np.arange(doc_count), lengths)
    return Corpus.from_triples(doc_count, vocab_size, docs, words, np.ones_like(words))


def generate_years(doc_count: int, first_year: int, last_year: int, seed: int) -> np.ndarray:
    """Publication years skewed towards recent ones, one per document."""
    if last_year < first_year:
        raise ValueError("last_year must be >= first_year")
    rng = _rng.stream(seed, _rng.SYNTH, 1)
    span = np.arange(first_year, last_year + 1)
    p = np.exp(np.linspace(0.0, 2.0, len(span)))
    return rng.choice(span, size=doc_count, p=p / p.sum())


def corpus_from_text(docword: str, vocab: str | None = None) -> Corpus:
    return load_uci_bow(io.StringIO(docword), None if vocab is None else io.StringIO(vocab))
