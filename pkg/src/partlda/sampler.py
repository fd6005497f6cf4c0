"""Collapsed Gibbs sampling for LDA and Bag of Timestamps (BoT).

Tokens are stored expanded, one assignment per occurrence. BoT adds a second
token stream, the per-document timestamp slots, which share the
document-topic counts with the words but have their own topic-timestamp
counts.

Parallel sweeps follow a diagonal schedule: in epoch l, worker m resamples
the word tokens of block (m, (m + l) mod P), all workers meet at a barrier,
then (BoT) worker m resamples the timestamp slots of the matching block of
the document-timestamp partitioning, and all meet again. Blocks within an
epoch share no document and no word (timestamp), so the only shared write
target is the per-topic total vector; each worker gets a private copy that
is merged at the barrier.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from partlda import _rng
from partlda.corpus import Corpus, TimestampTable
from partlda.scheduler import DiagonalSchedule, build_schedule, verify_nonconflicting
from partlda.workload import Partitioning

log = logging.getLogger(__name__)

WORDS = 0
TIMESTAMPS = 1
PHASES = {WORDS: "words", TIMESTAMPS: "timestamps"}


class StateError(RuntimeError):
    """Counts disagree with the assignments they should tally."""


class ConflictError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_topics: int = 256
    alpha: float = 0.5
    beta: float = 0.1
    gamma: float = 0.1
    iterations: int = 200
    seed: int = 0
    mode: str = "lda"

    def __post_init__(self):
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("alpha, beta and gamma must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in ("lda", "bot"):
            raise ValueError(f"mode must be 'lda' or 'bot', not {self.mode!r}")


@dataclass(eq=False)
class GibbsState:
    config: ModelConfig
    vocab_size: int
    word_doc: np.ndarray
    word_id: np.ndarray
    word_assign: np.ndarray
    doc_topic: np.ndarray  # (D, K)
    word_topic: np.ndarray  # (W, K)
    topic_total: np.ndarray  # (K,)
    timestamp_vocab_size: int = 0
    ts_doc: np.ndarray | None = None
    ts_id: np.ndarray | None = None
    ts_assign: np.ndarray | None = None
    ts_topic: np.ndarray | None = None  # (WTS, K)
    ts_total: np.ndarray | None = None

    @property
    def bot(self) -> bool:
        return self.ts_assign is not None

    @property
    def num_topics(self) -> int:
        return self.config.num_topics

    @property
    def doc_count(self) -> int:
        return self.doc_topic.shape[0]

    @property
    def topic_word(self) -> np.ndarray:
        return self.word_topic.T

    @property
    def topic_timestamp(self) -> np.ndarray | None:
        return None if self.ts_topic is None else self.ts_topic.T

    def copy(self) -> "GibbsState":
        kw = {f: (getattr(self, f).copy() if isinstance(getattr(self, f), np.ndarray) else getattr(self, f))
              for f in self.__dataclass_fields__}
        return GibbsState(**kw)


def _tally(rows: np.ndarray, assign: np.ndarray, n_rows: int, num_topics: int) -> np.ndarray:
    flat = rows.astype(np.int64) * num_topics + assign
    return np.bincount(flat, minlength=n_rows * num_topics).astype(np.int64).reshape(n_rows, num_topics)


def rebuild_counts(state: GibbsState) -> dict[str, np.ndarray]:
    """Recount every matrix from the assignments alone."""
    num_topics = state.num_topics
    n_docs = state.doc_count
    out = {
        "doc_topic": _tally(state.word_doc, state.word_assign, n_docs, num_topics),
        "word_topic": _tally(state.word_id, state.word_assign, state.vocab_size, num_topics),
        "topic_total": np.bincount(state.word_assign, minlength=num_topics).astype(np.int64),
    }
    if state.bot:
        out["doc_topic"] += _tally(state.ts_doc, state.ts_assign, n_docs, num_topics)
        out["ts_topic"] = _tally(state.ts_id, state.ts_assign, state.timestamp_vocab_size, num_topics)
        out["ts_total"] = np.bincount(state.ts_assign, minlength=num_topics).astype(np.int64)
    return out


def check_state(state: GibbsState) -> None:
    """Raise :class:`StateError` unless counts are exactly the tallies of z (and y)."""
    for name, expected in rebuild_counts(state).items():
        got = getattr(state, name)
        if not np.array_equal(got, expected):
            bad = np.argwhere(got != expected)
            raise StateError(f"{name} differs from its rebuild at {len(bad)} entries (first {bad[0].tolist()})")
    n_words = len(state.word_assign)
    n_ts = 0 if state.ts_assign is None else len(state.ts_assign)
    if state.doc_topic.sum() != n_words + n_ts or state.word_topic.sum() != n_words:
        raise StateError("count totals do not match token totals")
    if state.doc_topic.min(initial=0) < 0 or state.word_topic.min(initial=0) < 0:
        raise StateError("negative count")


def init_state(corpus: Corpus, config: ModelConfig, timestamps: TimestampTable | None = None) -> GibbsState:
    """Uniformly random topic for every word token and timestamp slot."""
    if (config.mode == "bot") != (timestamps is not None):
        raise ValueError("timestamps are required for mode='bot' and not allowed for mode='lda'")
    num_topics = config.num_topics
    rng = _rng.stream(config.seed, _rng.INIT)
    word_doc, word_id = corpus.expand_tokens()
    word_assign = rng.integers(num_topics, size=len(word_doc)).astype(np.int32)
    state = GibbsState(config, corpus.vocab_size, word_doc, word_id, word_assign,
                       np.zeros((corpus.doc_count, num_topics), np.int64),
                       np.zeros((corpus.vocab_size, num_topics), np.int64), np.zeros(num_topics, np.int64))
    if timestamps is not None:
        if timestamps.doc_count != corpus.doc_count:
            raise ValueError("timestamp table does not cover the corpus documents")
        ts_length = timestamps.length
        state.timestamp_vocab_size = timestamps.timestamp_vocab_size
        state.ts_doc = np.repeat(np.arange(corpus.doc_count, dtype=np.int32), ts_length)
        state.ts_id = timestamps.ids.ravel().astype(np.int32)
        state.ts_assign = rng.integers(num_topics, size=len(state.ts_doc)).astype(np.int32)
    for name, counts in rebuild_counts(state).items():
        setattr(state, name, counts)
    return state


# -- kernels ---------------------------------------------------------------

@njit(nogil=True, cache=True)
def _step(j, w, k, doc_topic, item_topic, totals, alpha, prior, prior_sum, u, p):
    doc_topic[j, k] -= 1
    item_topic[w, k] -= 1
    totals[k] -= 1
    num_topics = totals.shape[0]
    s = 0.0
    for t in range(num_topics):
        s += (doc_topic[j, t] + alpha) * (item_topic[w, t] + prior) / (totals[t] + prior_sum)
        p[t] = s
    r = u * s
    new = num_topics - 1
    for t in range(num_topics):
        if r < p[t]:
            new = t
            break
    doc_topic[j, new] += 1
    item_topic[w, new] += 1
    totals[new] += 1
    return new


@njit(nogil=True, cache=True)
def _resample(idx, docs, items, assign, doc_topic, item_topic, totals, alpha, prior, prior_sum, uniforms):
    p = np.empty(totals.shape[0])
    for i in range(idx.shape[0]):
        t = idx[i]
        assign[t] = _step(docs[t], items[t], assign[t], doc_topic, item_topic, totals,
                          alpha, prior, prior_sum, uniforms[i], p)


def _phase_arrays(state: GibbsState, phase: int):
    c = state.config
    if phase == WORDS:
        return (state.word_doc, state.word_id, state.word_assign, state.word_topic, state.topic_total,
                c.beta, state.vocab_size * c.beta)
    return (state.ts_doc, state.ts_id, state.ts_assign, state.ts_topic, state.ts_total,
            c.gamma, state.timestamp_vocab_size * c.gamma)


def _single(state: GibbsState, phase: int, doc: int, item: int, topic: int, u: float) -> int:
    _, _, _, item_topic, totals, prior, prior_sum = _phase_arrays(state, phase)
    p = np.empty(state.num_topics)
    return int(_step(doc, item, topic, state.doc_topic, item_topic, totals,
                     state.config.alpha, prior, prior_sum, float(u), p))


def sample_word_token(state: GibbsState, doc: int, word: int, topic: int, u: float) -> int:
    """Resample one word token currently assigned ``topic`` using uniform draw ``u``.

    Counts are moved to the returned topic; the caller owns the assignment array.
    """
    return _single(state, WORDS, doc, word, topic, u)


def sample_timestamp_token(state: GibbsState, doc: int, timestamp: int, topic: int, u: float) -> int:
    if not state.bot:
        raise ValueError("state has no timestamp tokens")
    return _single(state, TIMESTAMPS, doc, timestamp, topic, u)


def conditional(state: GibbsState, doc: int, item: int, topic: int, phase: int = WORDS) -> np.ndarray:
    """Normalized full conditional of one token with its own assignment removed."""
    _, _, _, item_topic, totals, prior, prior_sum = _phase_arrays(state, phase)
    delta = np.zeros(state.num_topics)
    delta[topic] = 1
    w = ((state.doc_topic[doc] - delta + state.config.alpha)
         * (item_topic[item] - delta + prior) / (totals - delta + prior_sum))
    return w / w.sum()


def sweep_uniforms(seed: int, iteration: int, epoch: int, worker: int, phase: int, n: int) -> np.ndarray:
    return _rng.stream(seed, _rng.SWEEP, iteration, epoch, worker, phase).random(n)


def sweep_sequential(state: GibbsState, iteration: int = 0) -> GibbsState:
    """Resample every word token in storage order, then every timestamp slot."""
    phases = (WORDS, TIMESTAMPS) if state.bot else (WORDS,)
    for phase in phases:
        docs, items, assign, item_topic, totals, prior, prior_sum = _phase_arrays(state, phase)
        n = len(assign)
        u = sweep_uniforms(state.config.seed, iteration, 0, 0, phase, n)
        _resample(np.arange(n, dtype=np.int64), docs, items, assign, state.doc_topic, item_topic, totals,
                  state.config.alpha, prior, prior_sum, u)
    return state


# -- parallel sweeps -------------------------------------------------------

def _blocks(rows: np.ndarray, cols: np.ndarray, row_groups: np.ndarray, col_groups: np.ndarray, num_parts: int):
    bid = row_groups[rows] * num_parts + col_groups[cols]
    order = np.argsort(bid, kind="stable")
    bounds = np.zeros(num_parts * num_parts + 1, dtype=np.int64)
    np.cumsum(np.bincount(bid, minlength=num_parts * num_parts), out=bounds[1:])
    starts = bounds[:-1].reshape(num_parts, num_parts)
    ends = bounds[1:].reshape(num_parts, num_parts)
    return [[order[starts[m, n]:ends[m, n]] for n in range(num_parts)] for m in range(num_parts)]


@dataclass(eq=False)
class ParallelPlan:
    """Token index lists for every block, validated against the schedule."""

    num_parts: int
    schedule: DiagonalSchedule
    word_blocks: list
    ts_blocks: list | None = None


def make_plan(state: GibbsState, partitioning: Partitioning, bot_partitioning: Partitioning | None = None,
              schedule: DiagonalSchedule | None = None) -> ParallelPlan:
    num_parts = partitioning.num_parts
    schedule = schedule or build_schedule(num_parts)
    if partitioning.shape != (state.doc_count, state.vocab_size):
        raise ValueError(f"partitioning shape {partitioning.shape} does not match "
                         f"({state.doc_count}, {state.vocab_size})")
    if not verify_nonconflicting(schedule, partitioning):
        raise ConflictError("schedule is not conflict-free for the word partitioning")
    plan = ParallelPlan(num_parts, schedule, _blocks(state.word_doc, state.word_id, partitioning.row_groups(),
                                             partitioning.col_groups(), num_parts))
    if state.bot:
        if bot_partitioning is None:
            raise ValueError("BoT parallel sweeps need a document-timestamp partitioning")
        if bot_partitioning.shape != (state.doc_count, state.timestamp_vocab_size):
            raise ValueError("timestamp partitioning shape does not match the state")
        if not bot_partitioning.same_rows(partitioning):
            raise ConflictError("word and timestamp partitionings must share document groups")
        if not verify_nonconflicting(schedule, bot_partitioning):
            raise ConflictError("schedule is not conflict-free for the timestamp partitioning")
        plan.ts_blocks = _blocks(state.ts_doc, state.ts_id, bot_partitioning.row_groups(),
                                 bot_partitioning.col_groups(), num_parts)
    elif bot_partitioning is not None:
        raise ValueError("timestamp partitioning given for an LDA state")
    return plan


class ConflictMonitor:
    """Records what each worker touched and checks disjointness at every barrier.

    A worker resampling token t reads and writes document-topic row
    ``docs[t]`` and item-topic row ``items[t]``; those are the accesses
    compared across workers of the same epoch and phase.
    """

    def __init__(self, state: GibbsState):
        self._state = state
        self._lock = threading.Lock()
        self._pending: list[tuple[int, np.ndarray]] = []
        self.conflicts: list[tuple] = []
        self.visits: dict[tuple[int, int], np.ndarray] = {}
        self.barriers = 0

    def record(self, worker: int, idx: np.ndarray) -> None:
        with self._lock:
            self._pending.append((worker, idx))

    def barrier(self, iteration: int, epoch: int, phase: int) -> None:
        docs, items = _phase_arrays(self._state, phase)[:2]
        pending, self._pending = self._pending, []
        self.barriers += 1
        counts = self.visits.setdefault((iteration, phase), np.zeros(len(docs), dtype=np.int64))
        for kind, ids in (("doc_topic", docs), (PHASES[phase], items)):
            owner = {}
            for worker, idx in pending:
                for x in np.unique(ids[idx]).tolist():
                    prev = owner.setdefault(x, worker)
                    if prev != worker:
                        self.conflicts.append((iteration, epoch, PHASES[phase], kind, x, prev, worker))
        for _, idx in pending:
            np.add.at(counts, idx, 1)


def _run_phase(state: GibbsState, blocks, epoch_pairs, iteration: int, epoch: int, phase: int,
               executor: Executor, monitor: ConflictMonitor | None) -> None:
    docs, items, assign, item_topic, totals, prior, prior_sum = _phase_arrays(state, phase)
    alpha = state.config.alpha
    base = totals.copy()

    def work(m, n):
        idx = blocks[m][n]
        local = base.copy()
        if len(idx):
            u = sweep_uniforms(state.config.seed, iteration, epoch, m, phase, len(idx))
            _resample(idx, docs, items, assign, state.doc_topic, item_topic, local, alpha, prior, prior_sum, u)
        if monitor is not None:
            monitor.record(m, idx)
        return local - base

    futures = [executor.submit(work, m, n) for m, n in epoch_pairs]
    # barrier: every block of the diagonal finishes before totals are merged
    deltas = [f.result() for f in futures]
    for d in deltas:
        totals += d
    if monitor is not None:
        monitor.barrier(iteration, epoch, phase)


def sweep_parallel(state: GibbsState, plan: ParallelPlan, iteration: int = 0, workers: int | None = None,
                   monitor: ConflictMonitor | None = None, executor: Executor | None = None) -> GibbsState:
    """One full sweep as P diagonal epochs; words then timestamps within each epoch."""
    own = executor is None
    if own:
        executor = ThreadPoolExecutor(max_workers=workers or plan.num_parts)
    try:
        for epoch_idx, pairs in enumerate(plan.schedule.epochs):
            _run_phase(state, plan.word_blocks, pairs, iteration, epoch_idx, WORDS, executor, monitor)
            if plan.ts_blocks is not None:
                _run_phase(state, plan.ts_blocks, pairs, iteration, epoch_idx, TIMESTAMPS, executor, monitor)
    finally:
        if own:
            executor.shutdown()
    return state


@dataclass
class TrainResult:
    state: GibbsState
    trace: list[tuple[int, float]]
    timings: dict[str, float] = field(default_factory=dict)


def train(corpus: Corpus, config: ModelConfig, timestamps: TimestampTable | None = None,
          partitioning: Partitioning | None = None, bot_partitioning: Partitioning | None = None,
          workers: int | None = None, eval_every: int = 1,
          callback: Callable[[int, GibbsState], None] | None = None,
          monitor: ConflictMonitor | None = None) -> TrainResult:
    """Run ``config.iterations`` sweeps, sequential unless a partitioning is given.

    The trace holds (iteration, training perplexity) for iteration 0 (the
    random initialization), every ``eval_every``-th iteration, and the last.
    """
    from partlda.metrics import estimate, training_perplexity

    if eval_every < 1:
        raise ValueError("eval_every must be >= 1")
    timings = {"init": 0.0, "sampling": 0.0, "perplexity": 0.0}
    t0 = time.perf_counter()
    state = init_state(corpus, config, timestamps)
    plan = None
    if partitioning is not None:
        plan = make_plan(state, partitioning, bot_partitioning)
    elif bot_partitioning is not None:
        raise ValueError("timestamp partitioning given without a word partitioning")
    timings["init"] = time.perf_counter() - t0

    def perplexity():
        t = time.perf_counter()
        value = training_perplexity(corpus, estimate(state))
        timings["perplexity"] += time.perf_counter() - t
        return value

    trace = [(0, perplexity())]
    executor = ThreadPoolExecutor(max_workers=workers or plan.num_parts) if plan else None
    try:
        for it in range(1, config.iterations + 1):
            t = time.perf_counter()
            if plan is None:
                sweep_sequential(state, it)
            else:
                sweep_parallel(state, plan, it, monitor=monitor, executor=executor)
            timings["sampling"] += time.perf_counter() - t
            if callback is not None:
                callback(it, state)
            if it % eval_every == 0 or it == config.iterations:
                trace.append((it, perplexity()))
                log.debug("iteration %d perplexity %.4f", it, trace[-1][1])
    finally:
        if executor is not None:
            executor.shutdown()
    return TrainResult(state, trace, timings)
