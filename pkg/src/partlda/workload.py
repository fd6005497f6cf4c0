"""Workload matrices, P x P partitionings and their load-balancing cost.

A partitioning splits the permuted rows into P contiguous groups J_0..J_{P-1}
and the permuted columns into V_0..V_{P-1}. Block (m, n) costs the sum of the
entries it covers. Epoch l runs the blocks (m, (m + l) mod P) concurrently, so
it costs the largest of them; the total cost is the sum over epochs. The
load-balancing ratio is ``eta = (N / P) / total``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from partlda.corpus import Corpus, TimestampTable


@dataclass(frozen=True, eq=False)
class WorkloadMatrix:
    """Sparse nonnegative integer matrix in COO form with cached margins."""

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    data: np.ndarray
    row_workloads: np.ndarray = field(init=False)
    col_workloads: np.ndarray = field(init=False)
    total: int = field(init=False)

    def __post_init__(self):
        if not (len(self.rows) == len(self.cols) == len(self.data)):
            raise ValueError("rows, cols and data must have equal length")
        if len(self.data):
            if self.data.min() <= 0:
                raise ValueError("stored entries must be strictly positive")
            if self.rows.min() < 0 or self.rows.max() >= self.n_rows:
                raise ValueError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.n_cols:
                raise ValueError("column index out of range")
        rw = np.bincount(self.rows, weights=self.data, minlength=self.n_rows)
        cw = np.bincount(self.cols, weights=self.data, minlength=self.n_cols)
        for a in (self.rows, self.cols, self.data):
            a.setflags(write=False)
        object.__setattr__(self, "row_workloads", np.rint(rw).astype(np.int64))
        object.__setattr__(self, "col_workloads", np.rint(cw).astype(np.int64))
        object.__setattr__(self, "total", int(self.data.sum()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @classmethod
    def from_dense(cls, dense) -> "WorkloadMatrix":
        dense = np.asarray(dense, dtype=np.int64)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        if dense.min(initial=0) < 0:
            raise ValueError("workloads must be nonnegative")
        r, c = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], r.astype(np.int64), c.astype(np.int64), dense[r, c])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        np.add.at(out, (self.rows, self.cols), self.data)
        return out

    def transpose(self) -> "WorkloadMatrix":
        return WorkloadMatrix(self.n_cols, self.n_rows, self.cols.copy(), self.rows.copy(), self.data.copy())


def build_workload(corpus: Corpus) -> WorkloadMatrix:
    return WorkloadMatrix(corpus.doc_count, corpus.vocab_size,
                          corpus.pair_docs.astype(np.int64),
                          corpus.word_ids.astype(np.int64),
                          corpus.counts.astype(np.int64).copy())


def build_bot_workload(timestamps: TimestampTable, doc_count: int) -> WorkloadMatrix:
    """Documents x timestamps matrix; entry (j, t) counts t in document j's array."""
    if timestamps.doc_count != doc_count:
        raise ValueError(f"timestamp table covers {timestamps.doc_count} documents, expected {doc_count}")
    ts_length = timestamps.length
    wts = timestamps.timestamp_vocab_size
    key = np.repeat(np.arange(doc_count, dtype=np.int64), ts_length) * wts + timestamps.ids.ravel()
    uniq, counts = np.unique(key, return_counts=True)
    r, c = np.divmod(uniq, wts)
    return WorkloadMatrix(doc_count, wts, r, c, counts.astype(np.int64))


@dataclass(frozen=True, eq=False)
class Partitioning:
    """Row/column orders plus P+1 cut boundaries on each.

    ``row_perm[i]`` is the original row placed at position i; group m holds
    positions ``row_cuts[m]:row_cuts[m+1]``.
    """

    row_perm: np.ndarray
    col_perm: np.ndarray
    num_parts: int
    row_cuts: np.ndarray
    col_cuts: np.ndarray

    def __post_init__(self):
        if self.num_parts < 1:
            raise ValueError("P must be >= 1")
        for name, perm, cuts in (("row", self.row_perm, self.row_cuts), ("col", self.col_perm, self.col_cuts)):
            n_items = len(perm)
            if not np.array_equal(np.sort(perm), np.arange(n_items)):
                raise ValueError(f"{name}_perm is not a permutation of 0..{n_items - 1}")
            if len(cuts) != self.num_parts + 1 or cuts[0] != 0 or cuts[-1] != n_items or np.any(np.diff(cuts) < 0):
                raise ValueError(f"{name}_cuts must be {self.num_parts + 1} monotone boundaries from 0 to {n_items}")
            perm.setflags(write=False)
            cuts.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_perm), len(self.col_perm)

    def row_groups(self) -> np.ndarray:
        return _groups(self.row_perm, self.row_cuts)

    def col_groups(self) -> np.ndarray:
        return _groups(self.col_perm, self.col_cuts)

    def row_members(self, m: int) -> np.ndarray:
        return self.row_perm[self.row_cuts[m]:self.row_cuts[m + 1]]

    def col_members(self, n: int) -> np.ndarray:
        return self.col_perm[self.col_cuts[n]:self.col_cuts[n + 1]]

    def same_rows(self, other: "Partitioning") -> bool:
        return self.num_parts == other.num_parts and np.array_equal(self.row_groups(), other.row_groups())

    def __eq__(self, other):
        if not isinstance(other, Partitioning):
            return NotImplemented
        return (self.num_parts == other.num_parts
                and all(np.array_equal(a, b) for a, b in (
                    (self.row_perm, other.row_perm), (self.col_perm, other.col_perm),
                    (self.row_cuts, other.row_cuts), (self.col_cuts, other.col_cuts))))


def _groups(perm: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    out = np.empty(len(perm), dtype=np.int64)
    out[perm] = np.repeat(np.arange(len(cuts) - 1), np.diff(cuts))
    return out


@dataclass(frozen=True)
class BalanceReport:
    partition_costs: np.ndarray
    epoch_max: np.ndarray
    total_cost: int
    optimum: float
    eta: float
    predicted_speedup: float

    @property
    def num_parts(self) -> int:
        return len(self.epoch_max)

    def to_text(self) -> str:
        lines = [
            f"P = {self.num_parts}",
            f"total_cost = {self.total_cost}",
            f"optimum = {self.optimum!r}",
            f"eta = {self.eta!r}",
            f"predicted_speedup = {self.predicted_speedup!r}",
            "epoch_max = " + " ".join(str(int(c)) for c in self.epoch_max),
        ]
        return "\n".join(lines) + "\n"

    def csv_row(self, algorithm: str) -> list:
        return [algorithm, self.num_parts, f"{self.eta:.6f}", f"{self.predicted_speedup:.4f}"]


CSV_HEADER = ["algorithm", "P", "eta", "predicted_speedup"]


def block_costs(matrix: WorkloadMatrix, row_groups: np.ndarray, col_groups: np.ndarray, num_parts: int) -> np.ndarray:
    """P x P matrix of summed entries, by one pass over the stored entries."""
    flat = row_groups[matrix.rows] * num_parts + col_groups[matrix.cols]
    # float64 sums are exact below 2**53
    costs = np.bincount(flat, weights=matrix.data, minlength=num_parts * num_parts)
    return np.rint(costs).astype(np.int64).reshape(num_parts, num_parts)


def epoch_maxima(costs: np.ndarray) -> np.ndarray:
    num_parts = costs.shape[0]
    m = np.arange(num_parts)
    return np.array([costs[m, (m + epoch_idx) % num_parts].max() for epoch_idx in range(num_parts)], dtype=np.int64)


def report_from_costs(costs: np.ndarray) -> BalanceReport:
    num_parts = costs.shape[0]
    emax = epoch_maxima(costs)
    total = int(emax.sum())
    n = int(costs.sum())
    optimum = n / num_parts
    # nothing to balance on an empty matrix
    eta = optimum / total if total > 0 else 1.0
    return BalanceReport(costs, emax, total, optimum, eta, eta * num_parts)


def balance_report(matrix: WorkloadMatrix, partitioning: Partitioning) -> BalanceReport:
    if partitioning.shape != matrix.shape:
        raise ValueError(f"partitioning shape {partitioning.shape} does not match matrix {matrix.shape}")
    num_parts = partitioning.num_parts
    costs = block_costs(matrix, partitioning.row_groups(), partitioning.col_groups(), num_parts)
    return report_from_costs(costs)


def equal_token_cut(workloads, num_parts: int) -> np.ndarray:
    """Cut an ordered workload list into P contiguous groups of ~equal mass.

    Boundary k is the smallest index whose prefix sum reaches k * total / P;
    the last boundary is always the list length.
    """
    w = np.asarray(workloads, dtype=np.int64)
    n_items = len(w)
    if num_parts < 1:
        raise ValueError("P must be >= 1")
    if num_parts > n_items:
        raise ValueError(f"cannot cut {n_items} items into {num_parts} groups")
    if n_items and w.min() < 0:
        raise ValueError("workloads must be nonnegative")
    prefix = np.zeros(n_items + 1, dtype=np.int64)
    np.cumsum(w, out=prefix[1:])
    total = prefix[-1]
    # integer comparison: prefix * P >= k * total
    cuts = np.searchsorted(prefix * num_parts, np.arange(num_parts + 1, dtype=np.int64) * total, side="left")
    cuts[0] = 0
    cuts[-1] = n_items
    return cuts.astype(np.int64)
