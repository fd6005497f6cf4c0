import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partlda import _rng
from partlda.corpus import TimestampTable, generate_synthetic, generate_years
from partlda.partitioner import (ALGORITHMS, OracleTooLarge, PartitionerConfig, assignment_eta, oracle_optimal,
                                 partition, permute_a1, permute_a2, permute_a3, permute_baseline)
from partlda.workload import WorkloadMatrix, balance_report, build_bot_workload, build_workload

from conftest import random_dense


def trace_a1(lengths):
    """Literal insert-before / remove-last loop over the descending list."""
    rr = sorted(range(len(lengths)), key=lambda i: (-lengths[i], i))
    n_docs = len(rr)
    for i in range(1, n_docs + 1):
        if i % 2 == 0:
            rr.insert(i - 1, rr[-1])
            rr.pop()
    return rr


def trace_a2(lengths):
    rr = sorted(range(len(lengths)), key=lambda i: (-lengths[i], i))
    n_docs = len(rr)
    i = 1
    while i < n_docs / 2:
        if i % 2 == 0:
            rr[i - 1], rr[n_docs - i] = rr[n_docs - i], rr[i - 1]
        i += 1
    return rr


def lengths_of(order, lengths):
    return [lengths[i] for i in order]


def test_a1_hand_trace():
    w = [9, 7, 5, 3, 1]
    assert lengths_of(permute_a1(w), w) == [9, 1, 7, 3, 5]


def test_a1_ties_and_singleton():
    assert permute_a1([4, 4, 4, 4]).tolist() == [0, 3, 1, 2]
    assert permute_a1([7]).tolist() == [0]


def test_a2_hand_trace():
    w = [9, 7, 5, 3, 1]
    assert lengths_of(permute_a2(w), w) == [9, 3, 5, 7, 1]


def test_a2_two_elements():
    assert lengths_of(permute_a2([5, 2]), [5, 2]) == [5, 2]


def test_a2_four_elements_strict_bound():
    # the only even i is 2, and 2 < 4/2 is false: nothing is swapped
    assert lengths_of(permute_a2([8, 6, 4, 2]), [8, 6, 4, 2]) == [8, 6, 4, 2]


def test_a2_six_elements():
    w = [6, 5, 4, 3, 2, 1]
    assert lengths_of(permute_a2(w), w) == [6, 2, 4, 3, 5, 1]


def test_a2_ties():
    assert permute_a2([1, 1, 1]).tolist() == [0, 1, 2]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=30))
def test_a1_a2_match_literal_loops(w):
    assert permute_a1(w).tolist() == trace_a1(w)
    assert permute_a2(w).tolist() == trace_a2(w)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=40), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_all_permutations_are_bijections(w, num_parts, seed):
    rng = np.random.default_rng(seed)
    for order in (permute_a1(w), permute_a2(w), permute_a3(w, num_parts, rng), permute_baseline(w, rng)):
        assert sorted(order.tolist()) == list(range(len(w)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=40), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_a3_tier_property(w, num_parts, seed):
    order = permute_a3(w, num_parts, np.random.default_rng(seed)).tolist()
    ranked = sorted(range(len(w)), key=lambda i: (-w[i], i))
    tier = {idx: pos // num_parts for pos, idx in enumerate(ranked)}
    n_items = len(w)
    full, rest = divmod(n_items, num_parts)
    sizes = [full + (1 if k < rest else 0) for k in range(num_parts)]
    start = 0
    for size in sizes:
        seg = order[start:start + size]
        tiers = [tier[i] for i in seg]
        assert len(set(tiers)) == len(tiers)
        start += size


def test_a3_p1_is_a_shuffle():
    w = list(range(10))
    seen = {tuple(permute_a3(w, 1, np.random.default_rng(s)).tolist()) for s in range(50)}
    assert len(seen) > 40


def test_a3_enumerated_outcomes():
    # blocks {9,7} and {5,3}: each half of the output gets one item per block,
    # in either order -> 2 * 2 * 2 * 2 = 16 distinct outcomes
    w = [9, 7, 5, 3]
    valid = set()
    for first in itertools.permutations([9, 7]):
        for second in itertools.permutations([5, 3]):
            t1, t2 = [first[0], second[0]], [first[1], second[1]]
            for a in itertools.permutations(t1):
                for b in itertools.permutations(t2):
                    valid.add(a + b)
    assert len(valid) == 16
    seen = {tuple(lengths_of(permute_a3(w, 2, np.random.default_rng(s)), w)) for s in range(2000)}
    assert seen == valid


def test_a3_deterministic_given_seed():
    w = [5, 1, 4, 1, 5, 9, 2, 6]
    a = permute_a3(w, 3, np.random.default_rng(11))
    b = permute_a3(w, 3, np.random.default_rng(11))
    assert a.tolist() == b.tolist()


def test_baseline_deterministic_and_singleton():
    assert permute_baseline([1, 2, 3], np.random.default_rng(5)).tolist() == \
        permute_baseline([1, 2, 3], np.random.default_rng(5)).tolist()
    assert permute_baseline([4], np.random.default_rng(0)).tolist() == [0]


def test_baseline_uniform():
    counts = Counter(tuple(permute_baseline([1, 2, 3], np.random.default_rng(s)).tolist()) for s in range(10_000))
    assert len(counts) == 6
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 6) <= 0.02


@pytest.fixture(scope="module")
def synth_matrix():
    return build_workload(generate_synthetic(300, 600, 40, 0.8, seed=5))


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_p1_eta_exactly_one(algo, synth_matrix):
    _, rep = partition(synth_matrix, algo, PartitionerConfig(1, 5, 0))
    assert rep.eta == 1.0


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_partition_report_consistent(algo, synth_matrix):
    part, rep = partition(synth_matrix, algo, PartitionerConfig(6, 10, 3))
    again = balance_report(synth_matrix, part)
    assert again.eta == rep.eta
    assert np.array_equal(again.partition_costs, rep.partition_costs)


def test_partition_rejects_large_p():
    matrix = WorkloadMatrix.from_dense(np.ones((3, 5), dtype=int))
    with pytest.raises(ValueError):
        partition(matrix, "a1", PartitionerConfig(4))


def test_partition_unknown_algorithm(synth_matrix):
    with pytest.raises(ValueError):
        partition(synth_matrix, "a4", PartitionerConfig(2))


def test_zero_rows_land_last():
    dense = np.array([[0, 0, 0], [3, 1, 0], [0, 0, 0], [1, 2, 0]])
    for algo in ALGORITHMS:
        part, _ = partition(WorkloadMatrix.from_dense(dense), algo, PartitionerConfig(2, 3, 1))
        assert set(part.row_perm[-2:].tolist()) == {0, 2}
        assert part.col_perm[-1] == 2


@pytest.mark.parametrize("algo", ["baseline", "a3"])
def test_best_of_is_monotone_in_repeats(algo, synth_matrix):
    etas = [partition(synth_matrix, algo, PartitionerConfig(8, r, 42))[1].eta for r in (1, 2, 5, 10, 25, 50)]
    assert etas == sorted(etas)


def test_best_of_equals_sequential_max(synth_matrix):
    cfg = PartitionerConfig(5, 12, 9)
    _, best = partition(synth_matrix, "a3", cfg)
    singles = []
    for r in range(cfg.repeats):
        rng = _rng.stream(cfg.seed, _rng.REPEAT, r)
        rw, cw = synth_matrix.row_workloads, synth_matrix.col_workloads
        rows = np.flatnonzero(rw > 0)[permute_a3(rw[rw > 0], 5, rng)]
        rows = np.concatenate([rows, np.flatnonzero(rw == 0)])
        cols = np.flatnonzero(cw > 0)[permute_a3(cw[cw > 0], 5, rng)]
        cols = np.concatenate([cols, np.flatnonzero(cw == 0)])
        from partlda.workload import Partitioning, equal_token_cut
        p = Partitioning(rows, cols, 5, equal_token_cut(rw[rows], 5), equal_token_cut(cw[cols], 5))
        singles.append(balance_report(synth_matrix, p).eta)
    assert best.eta == max(singles)


def test_deterministic_algorithms_repeatable(synth_matrix):
    for algo in ("a1", "a2"):
        a, _ = partition(synth_matrix, algo, PartitionerConfig(7, 100, 1))
        b, _ = partition(synth_matrix, algo, PartitionerConfig(7, 100, 2))
        assert a == b


def test_bot_partition_shares_rows():
    corpus = generate_synthetic(80, 100, 20, 1.0, seed=1)
    table = TimestampTable.from_years(generate_years(80, 1990, 2005, seed=1), 16)
    part, _ = partition(build_workload(corpus), "a3", PartitionerConfig(4, 10, 0))
    bpart, brep = partition(build_bot_workload(table, 80), "a3", PartitionerConfig(4, 10, 0), row_partitioning=part)
    assert bpart.same_rows(part)
    assert bpart.shape == (80, table.timestamp_vocab_size)
    assert 0 < brep.eta <= 1


# -- oracle ------------------------------------------------------------------

def brute_force_eta(dense, num_parts):
    """Unpinned enumeration with a plain-Python cost function."""
    n_docs, n_vocab = dense.shape
    n = int(dense.sum())
    best = None
    for rows in itertools.product(range(num_parts), repeat=n_docs):
        for cols in itertools.product(range(num_parts), repeat=n_vocab):
            block_cost = [[0] * num_parts for _ in range(num_parts)]
            for j in range(n_docs):
                for w in range(n_vocab):
                    block_cost[rows[j]][cols[w]] += int(dense[j, w])
            groups = range(num_parts)
            cost = sum(max(block_cost[m][(m + shift) % num_parts] for m in groups) for shift in groups)
            best = cost if best is None else min(best, cost)
    return (n / num_parts) / best


def test_oracle_identity_optimal():
    _, _, eta = oracle_optimal(WorkloadMatrix.from_dense([[3, 1], [1, 3]]), 2)
    assert eta == 1.0


def test_oracle_single_block():
    _, _, eta = oracle_optimal(WorkloadMatrix.from_dense([[4, 0], [0, 0]]), 2)
    assert eta == 0.5
    assert brute_force_eta(np.array([[4, 0], [0, 0]]), 2) == 0.5


@pytest.mark.parametrize("seed", range(12))
def test_oracle_matches_unpinned_brute_force(seed):
    rng = np.random.default_rng(seed)
    num_parts = 2 if seed % 3 else 3
    n_docs, n_vocab = (rng.integers(2, 5), rng.integers(2, 5)) if num_parts == 2 else (3, 3)
    dense = random_dense(rng, n_docs, n_vocab)
    if dense.sum() == 0:
        dense[0, 0] = 1
    rows, cols, eta = oracle_optimal(WorkloadMatrix.from_dense(dense), num_parts)
    assert eta == pytest.approx(brute_force_eta(dense, num_parts), rel=1e-12)
    assert assignment_eta(WorkloadMatrix.from_dense(dense), rows, cols, num_parts) == pytest.approx(eta, rel=1e-12)


def test_oracle_refuses_large():
    with pytest.raises(OracleTooLarge):
        oracle_optimal(WorkloadMatrix.from_dense(np.ones((8, 8), dtype=int)), 3)


@pytest.mark.parametrize("seed", range(8))
def test_heuristics_never_beat_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    dense = random_dense(rng, 5, 6)
    dense[0, 0] += 1
    matrix = WorkloadMatrix.from_dense(dense)
    _, _, best = oracle_optimal(matrix, 2)
    for algo in ALGORITHMS:
        assert partition(matrix, algo, PartitionerConfig(2, 20, seed))[1].eta <= best + 1e-12
