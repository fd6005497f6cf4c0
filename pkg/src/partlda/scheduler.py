"""Diagonal epoch schedules over a P x P block grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from partlda.workload import Partitioning


@dataclass(frozen=True)
class DiagonalSchedule:
    num_parts: int
    epochs: tuple[tuple[tuple[int, int], ...], ...]

    def __str__(self):
        return "\n".join(f"epoch {epoch_idx}: " + " ".join(f"({m},{n})" for m, n in e)
                         for epoch_idx, e in enumerate(self.epochs))


def build_schedule(num_parts: int) -> DiagonalSchedule:
    """Epoch l pairs document group m with word group (m + l) mod P."""
    if num_parts < 1:
        raise ValueError("P must be >= 1")
    groups = range(num_parts)
    return DiagonalSchedule(num_parts, tuple(tuple((m, (m + shift) % num_parts) for m in groups) for shift in groups))


def is_complete(schedule: DiagonalSchedule) -> bool:
    """Every one of the P*P blocks is scheduled exactly once."""
    pairs = [pair for epoch in schedule.epochs for pair in epoch]
    num_parts = schedule.num_parts
    groups = range(num_parts)
    return len(pairs) == num_parts * num_parts and set(pairs) == {(m, n) for m in groups for n in groups}


def verify_nonconflicting(schedule: DiagonalSchedule, partitioning: Partitioning) -> bool:
    """True iff no epoch touches the same document or word from two blocks."""
    num_parts = schedule.num_parts
    if partitioning.num_parts != num_parts or len(schedule.epochs) != num_parts:
        return False
    # each row/column belongs to exactly one group, so distinct group ids
    # within an epoch imply disjoint document and word sets
    row_groups = partitioning.row_groups()
    col_groups = partitioning.col_groups()
    if row_groups.min(initial=0) < 0 or row_groups.max(initial=0) >= num_parts:
        return False
    if col_groups.min(initial=0) < 0 or col_groups.max(initial=0) >= num_parts:
        return False
    for epoch in schedule.epochs:
        ms = [m for m, _ in epoch]
        ns = [n for _, n in epoch]
        if len(set(ms)) != len(ms) or len(set(ns)) != len(ns):
            return False
        if any(not (0 <= m < num_parts and 0 <= n < num_parts) for m, n in epoch):
            return False
    return True


def latin_grid(schedule: DiagonalSchedule) -> np.ndarray:
    """(epoch, document group) -> word group; -1 where unscheduled."""
    grid = np.full((schedule.num_parts, schedule.num_parts), -1, dtype=np.int64)
    for epoch_idx, epoch in enumerate(schedule.epochs):
        for m, n in epoch:
            grid[epoch_idx, m] = n
    return grid
