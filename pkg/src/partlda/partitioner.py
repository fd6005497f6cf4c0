"""Row/column permutation heuristics and the partition drivers built on them.

Every ``permute_*`` function maps a workload list to an order: ``order[i]`` is
the index of the item placed at position i. Descending sorts break ties by
ascending original index.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from partlda import _rng
from partlda.workload import (BalanceReport, Partitioning, WorkloadMatrix, block_costs, epoch_maxima,
                              equal_token_cut, report_from_costs)

log = logging.getLogger(__name__)

ALGORITHMS = ("baseline", "a1", "a2", "a3")
RANDOMIZED = frozenset({"baseline", "a3"})


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PartitionerConfig:
    num_parts: int
    repeats: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.num_parts < 1:
            raise ValueError("P must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def descending_order(workloads) -> np.ndarray:
    w = np.asarray(workloads)
    return np.argsort(-w, kind="stable")


def permute_a1(workloads) -> np.ndarray:
    """Longest, shortest, 2nd longest, 2nd shortest, ... ending at the median."""
    s = descending_order(workloads)
    n_items = len(s)
    out = np.empty(n_items, dtype=np.int64)
    half = (n_items + 1) // 2
    out[0::2] = s[:half]
    out[1::2] = s[half:][::-1]
    return out


def permute_a2(workloads) -> np.ndarray:
    """Descending order with positions i and M+1-i swapped for even 1-based i < M/2."""
    out = descending_order(workloads).astype(np.int64)
    n_items = len(out)
    i = np.arange(2, n_items, 2)
    i = i[2 * i < n_items]
    out[i - 1], out[n_items - i] = out[n_items - i], out[i - 1].copy()
    return out


def permute_a3(workloads, num_parts: int, rng: np.random.Generator, _sorted: np.ndarray | None = None) -> np.ndarray:
    """Tiered shuffle: each output segment draws at most one item per length tier.

    The descending list is cut into consecutive tiers of P items. Each tier is
    shuffled and its k-th item goes to list T_k; each T_k is then shuffled and
    the lists are concatenated.
    """
    if num_parts < 1:
        raise ValueError("P must be >= 1")
    s = descending_order(workloads) if _sorted is None else _sorted
    n_items = len(s)
    full = n_items // num_parts
    tiers = rng.permuted(s[:full * num_parts].reshape(full, num_parts), axis=1)
    rest = rng.permutation(s[full * num_parts:])
    parts = []
    for k in range(num_parts):
        t = tiers[:, k]
        if k < len(rest):
            t = np.append(t, rest[k])
        parts.append(rng.permutation(t))
    return np.concatenate(parts).astype(np.int64) if parts else np.empty(0, dtype=np.int64)


def permute_baseline(workloads, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(len(workloads)).astype(np.int64)


def _cut(workloads: np.ndarray, order: np.ndarray, num_parts: int) -> tuple[np.ndarray, np.ndarray]:
    cuts = equal_token_cut(workloads[order], num_parts)
    groups = np.empty(len(order), dtype=np.int64)
    groups[order] = np.repeat(np.arange(num_parts), np.diff(cuts))
    return cuts, groups


def _orderer(algorithm: str, workloads: np.ndarray, num_parts: int):
    """Return ``f(rng) -> order`` for one axis."""
    positive = np.flatnonzero(workloads > 0)
    zeros = np.flatnonzero(workloads == 0)

    def finish(order_of_positive):
        return np.concatenate([positive[order_of_positive], zeros]).astype(np.int64)

    pw = workloads[positive]
    if algorithm == "a1":
        fixed = finish(permute_a1(pw))
        return lambda rng: fixed
    if algorithm == "a2":
        fixed = finish(permute_a2(pw))
        return lambda rng: fixed
    if algorithm == "a3":
        s = descending_order(pw)
        return lambda rng: finish(permute_a3(pw, num_parts, rng, _sorted=s))
    if algorithm == "baseline":
        return lambda rng: finish(permute_baseline(pw, rng))
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def partition(matrix: WorkloadMatrix, algorithm: str, config: PartitionerConfig,
              row_partitioning: Partitioning | None = None) -> tuple[Partitioning, BalanceReport]:
    """Permute, cut and score ``matrix``; randomized algorithms keep the best of ``repeats``.

    With ``row_partitioning`` the row order and cuts are taken from it and only
    the columns are searched. This is how a second matrix over the same
    documents (timestamps) gets column groups that pair with existing
    document groups.
    """
    num_parts = config.num_parts
    n_docs, n_vocab = matrix.shape
    if num_parts > n_docs or num_parts > n_vocab:
        raise ValueError(f"P={num_parts} exceeds matrix dimensions {n_docs}x{n_vocab}")
    if row_partitioning is not None:
        if row_partitioning.num_parts != num_parts or len(row_partitioning.row_perm) != n_docs:
            raise ValueError("row_partitioning does not match P or the number of rows")
    rw, cw = matrix.row_workloads, matrix.col_workloads
    row_order_fn = None if row_partitioning is not None else _orderer(algorithm, rw, num_parts)
    col_order_fn = _orderer(algorithm, cw, num_parts)
    repeats = config.repeats if algorithm in RANDOMIZED else 1

    if row_partitioning is not None:
        fixed_rows = (row_partitioning.row_perm, row_partitioning.row_cuts, row_partitioning.row_groups())

    best = None
    for r in range(repeats):
        rng = _rng.stream(config.seed, _rng.REPEAT, r)
        if row_partitioning is None:
            row_order = row_order_fn(rng)
            row_cuts, row_groups = _cut(rw, row_order, num_parts)
        else:
            row_order, row_cuts, row_groups = fixed_rows
        col_order = col_order_fn(rng)
        col_cuts, col_groups = _cut(cw, col_order, num_parts)
        costs = block_costs(matrix, row_groups, col_groups, num_parts)
        total = int(epoch_maxima(costs).sum())
        if best is None or total < best[0]:
            best = (total, row_order, row_cuts, col_order, col_cuts, costs)
    _, row_order, row_cuts, col_order, col_cuts, costs = best
    part = Partitioning(np.array(row_order), np.array(col_order), num_parts, np.array(row_cuts), np.array(col_cuts))
    report = report_from_costs(costs)
    log.debug("%s P=%d repeats=%d eta=%.4f", algorithm, num_parts, repeats, report.eta)
    return part, report


def oracle_optimal(matrix: WorkloadMatrix, num_parts: int, limit: int = 10**7) -> tuple[np.ndarray, np.ndarray, float]:
    """Exhaustive minimum of the epoch cost over all row/column group assignments.

    Groups need not be contiguous or nonempty. Returns the best row and column
    assignment and the corresponding eta. Row 0 and column 0 are pinned to
    group 0: cyclically relabelling either side only reorders epochs.
    """
    n_docs, n_vocab = matrix.shape
    if num_parts < 1:
        raise ValueError("P must be >= 1")
    if num_parts ** n_docs * num_parts ** n_vocab > limit:
        raise OracleTooLarge(f"{num_parts}^{n_docs} * {num_parts}^{n_vocab} assignments exceed the limit of {limit}")
    dense = matrix.to_dense().astype(np.float64)
    n = matrix.total
    if n == 0:
        return np.zeros(n_docs, dtype=np.int64), np.zeros(n_vocab, dtype=np.int64), 1.0

    col_assign = np.array([(0,) + c for c in itertools.product(range(num_parts), repeat=n_vocab - 1)], dtype=np.int64)
    n_assign = len(col_assign)
    onehot = np.zeros((n_vocab, n_assign, num_parts))
    onehot[np.arange(n_vocab)[:, None], np.arange(n_assign)[None, :], col_assign.T] = 1.0
    onehot = onehot.reshape(n_vocab, n_assign * num_parts)
    m = np.arange(num_parts)
    diag_n = (m[None, :] + m[:, None]) % num_parts  # [l, m] -> n

    best_cost, best_rows, best_cols = np.inf, None, None
    for rows in itertools.product(range(num_parts), repeat=n_docs - 1):
        rows = np.array((0,) + rows, dtype=np.int64)
        group_rows = np.zeros((num_parts, n_vocab))
        np.add.at(group_rows, rows, dense)
        block_cost = (group_rows @ onehot).reshape(num_parts, n_assign, num_parts)  # [m, b, n]
        cost = block_cost[m[None, :], :, diag_n].max(axis=1).sum(axis=0)  # [l, m, b] -> [b]
        b = int(np.argmin(cost))
        if cost[b] < best_cost:
            best_cost, best_rows, best_cols = cost[b], rows, col_assign[b]
    return best_rows, best_cols.copy(), (n / num_parts) / float(round(best_cost))


def assignment_eta(matrix: WorkloadMatrix, row_groups, col_groups, num_parts: int) -> float:
    """eta of an arbitrary (not necessarily contiguous) group assignment."""
    costs = block_costs(matrix, np.asarray(row_groups), np.asarray(col_groups), num_parts)
    return report_from_costs(costs).eta
