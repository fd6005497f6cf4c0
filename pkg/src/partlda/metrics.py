"""Point estimates of the topic distributions and training-set perplexity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from partlda.corpus import Corpus

# Estimates and likelihood sums use extended precision so the final float64
# perplexity is correctly rounded (e.g. exactly W for a uniform model).
FLOAT = np.longdouble


@dataclass(frozen=True, eq=False)
class TopicEstimates:
    theta: np.ndarray  # (D, K)
    phi: np.ndarray  # (K, W)
    pi: np.ndarray | None = None  # (K, WTS)

    @property
    def num_topics(self) -> int:
        return self.phi.shape[0]


def _normalize(counts: np.ndarray, prior: float) -> np.ndarray:
    c = counts.astype(FLOAT) + FLOAT(prior)
    return c / c.sum(axis=1, keepdims=True)


def estimate(state, config=None) -> TopicEstimates:
    """Smoothed estimates: theta from document-topic counts, phi and pi per topic."""
    config = config or state.config
    theta = _normalize(state.doc_topic, config.alpha)
    phi = _normalize(state.word_topic.T, config.beta)
    pi = None if state.ts_topic is None else _normalize(state.ts_topic.T, config.gamma)
    return TopicEstimates(theta, phi, pi)


def log_likelihood(corpus: Corpus, estimates: TopicEstimates, chunk: int = 1 << 16) -> FLOAT:
    """Sum over word tokens of log sum_k theta[j, k] * phi[k, w]."""
    theta, phi = estimates.theta, estimates.phi
    if theta.shape[0] != corpus.doc_count or phi.shape[1] != corpus.vocab_size:
        raise ValueError("estimates do not match the corpus dimensions")
    docs = corpus.pair_docs
    words = corpus.word_ids
    counts = corpus.counts.astype(FLOAT)
    phi_t = np.ascontiguousarray(phi.T)
    total = FLOAT(0)
    for lo in range(0, len(words), chunk):
        hi = lo + chunk
        p = np.einsum("ik,ik->i", theta[docs[lo:hi]], phi_t[words[lo:hi]])
        total += np.dot(counts[lo:hi], np.log(p))
    return total


def training_perplexity(corpus: Corpus, estimates: TopicEstimates) -> float:
    """exp(-log p(x) / N) over the word tokens only."""
    if corpus.total_tokens == 0:
        raise ValueError("perplexity of an empty corpus is undefined")
    ll = log_likelihood(corpus, estimates)
    return float(np.exp(-ll / FLOAT(corpus.total_tokens)))


def top_words(estimates: TopicEstimates, k: int, n: int) -> list[tuple[int, float]]:
    """``n`` most probable word ids of topic ``k``, ties broken by lower id."""
    if not 0 <= k < estimates.num_topics:
        raise IndexError(f"topic {k} out of range [0, {estimates.num_topics})")
    row = estimates.phi[k]
    order = np.lexsort((np.arange(len(row)), -row))[:max(n, 0)]
    return [(int(w), float(row[w])) for w in order]


def timestamp_histogram(estimates: TopicEstimates, k: int) -> np.ndarray:
    if estimates.pi is None:
        raise ValueError("estimates carry no timestamp distributions")
    return estimates.pi[k].astype(np.float64)
