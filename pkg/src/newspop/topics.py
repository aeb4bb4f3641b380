"""Latent Dirichlet allocation by collapsed Gibbs sampling, with fold-in inference.

The sampler loops are compiled with numba. Randomness comes from a small
xorshift64* generator whose state is seeded (through splitmix64) at the top
of every compiled call, so a given (corpus, seed) pair always produces the
same counts on every platform.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .vectorize import Vocabulary

N_TOPICS = 10


@dataclass(frozen=True)
class LdaConfig:
    n_topics: int = N_TOPICS
    alpha: float | None = None  # None -> 50 / n_topics
    beta: float = 0.01
    train_sweeps: int = 1000
    infer_sweeps: int = 100
    seed: int = 0

    @property
    def alpha_value(self) -> float:
        return 50.0 / self.n_topics if self.alpha is None else float(self.alpha)


@dataclass(frozen=True)
class LdaModel:
    """Frozen topic-word distributions ``phi`` (topics x terms)."""

    phi: np.ndarray
    alpha: float
    beta: float
    infer_sweeps: int
    seed: int
    terms: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def n_topics(self) -> int:
        return self.phi.shape[0]

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        idx = self._index
        return np.array([idx[t] for t in tokens if t in idx], dtype=np.int64)


_U53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, inline="always")
def _next_uniform(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return ((x * np.uint64(2685821657736338717)) >> np.uint64(11)) * _U53


@numba.njit(cache=True)
def _seed_state(seed):
    # splitmix64 of the seed; never zero
    z = np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    state = np.empty(1, dtype=np.uint64)
    state[0] = z if z != np.uint64(0) else np.uint64(1)
    return state


@numba.njit(cache=True)
def _randint(state, n):
    return min(int(_next_uniform(state) * n), n - 1)


@numba.njit(cache=True)
def _gibbs_train(words, docs, n_docs, n_terms, n_topics, alpha, beta, sweeps, seed):
    state = _seed_state(seed)
    n = words.shape[0]
    z = np.empty(n, dtype=np.int64)
    ndk = np.zeros((n_docs, n_topics), dtype=np.int64)
    nwk = np.zeros((n_terms, n_topics), dtype=np.int64)
    nk = np.zeros(n_topics, dtype=np.int64)
    for i in range(n):
        k = _randint(state, n_topics)
        z[i] = k
        ndk[docs[i], k] += 1
        nwk[words[i], k] += 1
        nk[k] += 1
    vbeta = n_terms * beta
    inv = np.empty(n_topics)
    for t in range(n_topics):
        inv[t] = 1.0 / (nk[t] + vbeta)
    p = np.empty(n_topics)
    for _ in range(sweeps):
        for i in range(n):
            w = words[i]
            d = docs[i]
            k = z[i]
            ndk[d, k] -= 1
            nwk[w, k] -= 1
            nk[k] -= 1
            inv[k] = 1.0 / (nk[k] + vbeta)
            total = 0.0
            for t in range(n_topics):
                total += (ndk[d, t] + alpha) * (nwk[w, t] + beta) * inv[t]
                p[t] = total
            u = _next_uniform(state) * total
            k = 0
            while k < n_topics - 1 and p[k] <= u:
                k += 1
            z[i] = k
            ndk[d, k] += 1
            nwk[w, k] += 1
            nk[k] += 1
            inv[k] = 1.0 / (nk[k] + vbeta)
    return nwk.T.copy()


@numba.njit(cache=True)
def _gibbs_fold_in(words, phi, alpha, sweeps, seed):
    state = _seed_state(seed)
    n = words.shape[0]
    n_topics = phi.shape[0]
    z = np.empty(n, dtype=np.int64)
    nd = np.zeros(n_topics, dtype=np.int64)
    for i in range(n):
        k = _randint(state, n_topics)
        z[i] = k
        nd[k] += 1
    p = np.empty(n_topics)
    acc = np.zeros(n_topics)
    burn = sweeps // 2
    kept = 0
    for s in range(sweeps):
        for i in range(n):
            w = words[i]
            nd[z[i]] -= 1
            total = 0.0
            for t in range(n_topics):
                total += (nd[t] + alpha) * phi[t, w]
                p[t] = total
            u = _next_uniform(state) * total
            k = 0
            while k < n_topics - 1 and p[k] <= u:
                k += 1
            z[i] = k
            nd[k] += 1
        if s >= burn:
            for t in range(n_topics):
                acc[t] += (nd[t] + alpha) / (n + n_topics * alpha)
            kept += 1
    return acc / kept


def _normalize_rows(a: np.ndarray) -> np.ndarray:
    return a / a.sum(axis=-1, keepdims=True)


def fit_lda(
    training_docs: Sequence[Sequence[str]],
    config: LdaConfig = LdaConfig(),
    vocabulary: Vocabulary | None = None,
) -> LdaModel:
    """Fit topics on token lists; tokens outside ``vocabulary`` (if given) are dropped."""
    if vocabulary is not None:
        terms = vocabulary.terms
    else:
        terms = tuple(sorted({t for d in training_docs for t in d}))
    index = {t: i for i, t in enumerate(terms)}
    words, doc_ids = [], []
    for d, tokens in enumerate(training_docs):
        for t in tokens:
            i = index.get(t)
            if i is not None:
                words.append(i)
                doc_ids.append(d)
    if not words:
        raise ValueError("LDA needs at least one in-vocabulary token")
    alpha = config.alpha_value
    nkw = _gibbs_train(
        np.asarray(words, dtype=np.int64),
        np.asarray(doc_ids, dtype=np.int64),
        len(training_docs),
        len(terms),
        config.n_topics,
        alpha,
        config.beta,
        config.train_sweeps,
        config.seed,
    )
    phi = _normalize_rows(nkw + config.beta)
    return LdaModel(
        phi=phi,
        alpha=alpha,
        beta=config.beta,
        infer_sweeps=config.infer_sweeps,
        seed=config.seed,
        terms=terms,
    )


def _doc_seed(words: np.ndarray, seed: int) -> int:
    # content-derived so the same document gets the same theta wherever it is scored
    return (zlib.crc32(words.tobytes()) ^ (seed * 2654435761)) & 0x7FFFFFFF


def infer_theta(tokens: Sequence[str], model: LdaModel) -> np.ndarray:
    """Topic proportions of a document with ``phi`` frozen; empty or all-OOV -> uniform."""
    words = model.encode(tokens)
    k = model.n_topics
    if words.size == 0:
        return np.full(k, 1.0 / k)
    theta = _gibbs_fold_in(words, model.phi, model.alpha, model.infer_sweeps, _doc_seed(words, model.seed))
    return theta / theta.sum()


def log_likelihood(tokens: Sequence[str], model: LdaModel) -> float:
    """Per-document log-likelihood under the fold-in theta; OOV tokens skipped."""
    words = model.encode(tokens)
    if words.size == 0:
        return 0.0
    theta = infer_theta(tokens, model)
    return float(np.log(theta @ model.phi[:, words]).sum())
