"""Tokenization, training vocabulary, TF-IDF with train-time IDF, truncated SVD.

The same machinery backs four pipelines per entity and fold: news titles,
subjective terms, co-occurring entity ids and news tags. Every fitted
object only ever sees training documents; test documents are transformed
with the frozen vocabulary, IDF and right singular vectors.
"""

from __future__ import annotations

import datetime as dt
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

MAX_TERMS = 10_000
LATENT_DIM = 10

_WORD = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str, stopwords: Callable[[str], bool] | None = None) -> list[str]:
    """Lowercased word unigrams followed by adjacent-pair bigrams.

    Line breaks separate segments: bigrams never span two lines, so a
    profile made of one title per line gets no cross-title bigrams.
    ``stopwords`` is an optional predicate; matching unigrams are dropped
    before bigrams are formed.
    """
    unigrams: list[str] = []
    bigrams: list[str] = []
    for segment in text.lower().splitlines():
        words = _WORD.findall(segment)
        if stopwords is not None:
            words = [w for w in words if not stopwords(w)]
        unigrams.extend(words)
        bigrams.extend(f"{a} {b}" for a, b in zip(words, words[1:]))
    return unigrams + bigrams


def unigrams(text: str) -> list[str]:
    return _WORD.findall(text.lower())


@dataclass(frozen=True)
class DailyDoc:
    """All titles mentioning an entity in one day's feature interval, in news order."""

    entity_id: str
    day: dt.date
    titles: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return "\n".join(self.titles)

    def tokens(self) -> list[str]:
        return tokenize(self.text)


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_train_docs: int

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def index(self, term: str) -> int | None:
        return self._index.get(term)


def fit_vocabulary(training_docs: Sequence[Sequence[str]], max_terms: int = MAX_TERMS) -> Vocabulary:
    """Most frequent terms over the training documents (ties: lexicographic)."""
    total: Counter = Counter()
    doc_freq: Counter = Counter()
    for tokens in training_docs:
        total.update(tokens)
        doc_freq.update(set(tokens))
    ranked = sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))[:max_terms]
    terms = tuple(t for t, _ in ranked)
    return Vocabulary(terms, tuple(doc_freq[t] for t in terms), len(training_docs))


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray

    def __len__(self) -> int:
        return len(self.vocabulary)


def smoothed_idf(n_docs: int, df: int) -> float:
    return math.log((1 + n_docs) / (1 + df)) + 1.0


def fit_tfidf(training_docs: Sequence[Sequence[str]], max_terms: int = MAX_TERMS) -> TfidfModel:
    vocab = fit_vocabulary(training_docs, max_terms)
    idf = np.array([smoothed_idf(vocab.n_train_docs, d) for d in vocab.df], dtype=np.float64)
    return TfidfModel(vocab, idf)


@dataclass(frozen=True)
class SparseVector:
    """Sorted nonzero ``indices`` with their ``values`` in a space of size ``dim``."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


def tfidf_vector(tokens: Iterable[str], model: TfidfModel) -> SparseVector:
    """L2-normalized TF-IDF weights; out-of-vocabulary terms are ignored."""
    counts: Counter = Counter()
    for t in tokens:
        i = model.vocabulary.index(t)
        if i is not None:
            counts[i] += 1
    cols = np.array(sorted(counts), dtype=np.int64)
    data = np.array([counts[i] for i in cols], dtype=np.float64)
    if cols.size:
        data = data * model.idf[cols]
        data /= np.linalg.norm(data)
    return SparseVector(cols, data, len(model))


def tfidf_matrix(docs: Sequence[Sequence[str]], model: TfidfModel) -> sp.csr_matrix:
    """Documents x vocabulary CSR matrix whose rows are :func:`tfidf_vector`."""
    rows = [tfidf_vector(d, model) for d in docs]
    indptr = np.concatenate([[0], np.cumsum([r.nnz for r in rows], dtype=np.int64)])
    indices = np.concatenate([r.indices for r in rows]) if rows else np.zeros(0, dtype=np.int64)
    data = np.concatenate([r.values for r in rows]) if rows else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(rows), len(model)))


@dataclass(frozen=True)
class SvdProjector:
    """Right singular vectors ``V`` (terms x rank) and singular values."""

    V: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.V.shape[1]


def _fix_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each right vector made positive
    if V.size == 0:
        return U, V
    pivot = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
    signs = np.where(pivot < 0, -1.0, 1.0)
    return U * signs, V * signs


def _randomized_range(A, size: int, n_iter: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal basis for the dominant column space of ``A.T`` (Halko et al. subspace iteration)."""
    Q = rng.standard_normal((A.shape[1], size))
    Q, _ = np.linalg.qr(np.asarray(A @ Q))
    for _ in range(n_iter):
        Q, _ = np.linalg.qr(np.asarray(A.T @ Q))
        Q, _ = np.linalg.qr(np.asarray(A @ Q))
    Q, _ = np.linalg.qr(np.asarray(A.T @ Q))
    return Q


def truncated_svd(
    matrix,
    rank: int = LATENT_DIM,
    seed: int = 0,
    n_iter: int = 7,
    oversample: int = 10,
    dense_limit: int = 250_000,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Top-``rank`` factors ``(U, s, V)`` with ``matrix @ V == U * s``.

    Small matrices go through a dense LAPACK SVD. Larger ones use seeded
    randomized subspace iteration followed by a Rayleigh-Ritz step on
    ``matrix @ V``, which makes the identity above exact up to rounding.
    When ``rank`` exceeds the matrix dimensions the missing components are
    zero columns and zero singular values.
    """
    m, n = matrix.shape
    r = min(rank, m, n)
    U = np.zeros((m, rank))
    s = np.zeros(rank)
    V = np.zeros((n, rank))
    if r == 0:
        return U, s, V
    is_sparse = sp.issparse(matrix)
    if m * n <= dense_limit or r + oversample >= min(m, n):
        dense = matrix.toarray() if is_sparse else np.asarray(matrix, dtype=np.float64)
        u_full, s_full, vt_full = np.linalg.svd(dense, full_matrices=False)
        u_r, s_r, v_r = u_full[:, :r], s_full[:r], vt_full[:r].T
    else:
        A = matrix.tocsr() if is_sparse else np.asarray(matrix, dtype=np.float64)
        rng = np.random.default_rng(seed)
        basis = _randomized_range(A, r + oversample, n_iter, rng)
        # Ritz step: AV_basis = W S Z^T  ->  V = basis Z, U = W
        w, s_b, zt = np.linalg.svd(np.asarray(A @ basis), full_matrices=False)
        v_r = basis @ zt[:r].T
        u_r, s_r = w[:, :r], s_b[:r]
    u_r, v_r = _fix_signs(u_r, v_r)
    U[:, :r], s[:r], V[:, :r] = u_r, s_r, v_r
    return U, s, V


def fit_svd(matrix, rank: int = LATENT_DIM, seed: int = 0) -> SvdProjector:
    _, s, V = truncated_svd(matrix, rank=rank, seed=seed)
    return SvdProjector(V=V, singular_values=s)


def project(vector, projector: SvdProjector) -> np.ndarray:
    """Latent coordinates ``vector @ V`` for a SparseVector, sparse row or dense vector."""
    if isinstance(vector, SparseVector):
        if vector.nnz == 0:
            return np.zeros(projector.rank)
        return vector.values @ projector.V[vector.indices]
    out = vector @ projector.V
    return np.asarray(out, dtype=np.float64).ravel()
