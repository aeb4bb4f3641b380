from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newspop.topics import LdaConfig, fit_lda, infer_theta, log_likelihood
from newspop.vectorize import fit_vocabulary

VOCAB_A = [f"a{i}" for i in range(30)]
VOCAB_B = [f"b{i}" for i in range(30)]


def two_cluster_corpus(n_docs=200, length=40, seed=0):
    rng = np.random.default_rng(seed)
    docs, truth = [], []
    for d in range(n_docs):
        vocab = VOCAB_A if d % 2 == 0 else VOCAB_B
        docs.append([str(w) for w in rng.choice(vocab, size=length)])
        truth.append(d % 2)
    return docs, truth


@pytest.fixture(scope="module")
def two_topic_model():
    docs, _ = two_cluster_corpus()
    return fit_lda(docs, LdaConfig(n_topics=2, train_sweeps=200, seed=1))


def test_phi_rows_normalized(two_topic_model):
    phi = two_topic_model.phi
    assert np.all(phi >= 0)
    assert np.max(np.abs(phi.sum(axis=1) - 1)) <= 1e-12


def test_topic_purity(two_topic_model):
    m = two_topic_model
    for row in m.phi:
        top = [m.terms[i] for i in np.argsort(-row, kind="stable")[:10]]
        share_a = sum(t.startswith("a") for t in top) / 10
        assert max(share_a, 1 - share_a) >= 0.9


def test_planted_topic_doc_gets_high_theta(two_topic_model):
    m = two_topic_model
    rng = np.random.default_rng(9)
    # alpha = 50/K = 25 pulls theta toward uniform, so the document must be long
    doc = [str(w) for w in rng.choice(VOCAB_A, size=300)]
    theta = infer_theta(doc, m)
    a_topic = int(np.argmax(m.phi[:, [m.terms.index(t) for t in VOCAB_A]].sum(axis=1)))
    assert theta[a_topic] >= 0.8


def test_single_topic_degeneracy():
    docs, _ = two_cluster_corpus(n_docs=20, length=15)
    m = fit_lda(docs, LdaConfig(n_topics=1, train_sweeps=20))
    for d in docs[:5] + [[], ["unknown"]]:
        assert infer_theta(d, m).tolist() == [1.0]
    counts = Counter(t for d in docs for t in d)
    total = sum(counts.values())
    beta = m.beta
    expected = np.array([(counts[t] + beta) / (total + beta * len(m.terms)) for t in m.terms])
    assert np.allclose(m.phi[0], expected, atol=1e-12)


def test_empty_and_oov_docs_are_uniform(two_topic_model):
    assert infer_theta([], two_topic_model).tolist() == [0.5, 0.5]
    assert infer_theta(["zzz", "qqq"], two_topic_model).tolist() == [0.5, 0.5]


def test_default_k10_uniform_on_empty():
    docs, _ = two_cluster_corpus(n_docs=10, length=10)
    m = fit_lda(docs, LdaConfig(train_sweeps=5))
    assert m.n_topics == 10
    assert m.alpha == 5.0 and m.beta == 0.01
    assert np.array_equal(infer_theta([], m), np.full(10, 0.1))


def test_same_seed_bit_identical():
    docs, _ = two_cluster_corpus(n_docs=30)
    cfg = LdaConfig(n_topics=3, train_sweeps=30, seed=4)
    a, b = fit_lda(docs, cfg), fit_lda(docs, cfg)
    assert a.phi.tobytes() == b.phi.tobytes()
    assert infer_theta(docs[0], a).tobytes() == infer_theta(docs[0], b).tobytes()


def test_different_seed_changes_chain():
    docs, _ = two_cluster_corpus(n_docs=30)
    a = fit_lda(docs, LdaConfig(n_topics=3, train_sweeps=30, seed=4))
    b = fit_lda(docs, LdaConfig(n_topics=3, train_sweeps=30, seed=5))
    assert a.phi.tobytes() != b.phi.tobytes()


def test_theta_independent_of_scoring_order(two_topic_model):
    docs, _ = two_cluster_corpus(n_docs=6, seed=3)
    first = [infer_theta(d, two_topic_model) for d in docs]
    again = [infer_theta(d, two_topic_model) for d in reversed(docs)][::-1]
    for x, y in zip(first, again):
        assert x.tobytes() == y.tobytes()


def test_vocabulary_restriction_drops_other_tokens():
    docs = [["a", "b", "c"], ["a", "c", "d"]]
    vocab = fit_vocabulary([["a", "c"]])
    m = fit_lda(docs, LdaConfig(n_topics=2, train_sweeps=10), vocabulary=vocab)
    assert m.terms == vocab.terms
    assert m.phi.shape == (2, 2)


def test_all_empty_docs_error():
    with pytest.raises(ValueError):
        fit_lda([[], []], LdaConfig(n_topics=2, train_sweeps=5))


def test_held_out_log_likelihood_finite(two_topic_model):
    docs, _ = two_cluster_corpus(n_docs=10, seed=11)
    for d in docs:
        assert np.isfinite(log_likelihood(d + ["oov"], two_topic_model))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(VOCAB_A + VOCAB_B + ["oov1", "oov2"]), max_size=60))
def test_theta_always_normalized(two_topic_model, doc):
    theta = infer_theta(doc, two_topic_model)
    assert np.all(theta >= 0)
    assert abs(theta.sum() - 1) <= 1e-12
