import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from genacc import classifiers as C
from genacc.classifiers import (TIE, UNKNOWN, EnsembleConfig, ExclusiveClassViolation,
                                NoisyEnsemble, OneNN, Tie, TiePolicy)
from genacc.datasets import LabeledDataset, random_finite

A, B = 0, 1
TWO = LabeledDataset([[0.0, 0.0], [2.0, 0.0]], [A, B])


# ---------------------------------------------------------------- step classifiers

def test_step_examples():
    assert C.step_classifier("f1").predict([0.5])[0] == -1
    assert C.step_classifier("f2").predict([-4.5])[0] == 1
    assert C.step_classifier("f3").predict([0.0])[0] == 1


@pytest.mark.parametrize("which,formula", [
    ("f1", lambda x: C.step(x - 1)),
    ("f2", lambda x: 1 - C.step(x + 4) + C.step(x)),
    ("f3", lambda x: C.step(x)),
])
def test_step_matches_formula(which, formula):
    xs = np.concatenate([np.linspace(-8, 8, 1601), [-4, 0, 1, -4 - 1e-12, -1e-300]])
    got = C.step_classifier(which).predict(xs)
    assert np.array_equal(got, np.array([formula(x) for x in xs]))


def test_step_dimension_error():
    f = C.step_classifier("f1")
    with pytest.raises(ValueError):
        f.predict(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        C.step_classifier("f4")


# ---------------------------------------------------------------- hard 1-NN

def test_predict_1nn_examples():
    assert C.predict_1nn((0.4, 0.0), TWO) == A
    assert C.predict_1nn((1.0, 0.0), TWO) == Tie(frozenset({A, B}))
    assert C.predict_1nn((2.0, 0.0), TWO) == B


def test_tie_policies():
    t = C.predict_1nn((1.0, 0.0), TWO)
    assert not C.outcome_correct(t, A, TiePolicy.STRICT)
    assert C.outcome_correct(t, A, "optimistic")
    clf = OneNN(TWO)
    X = np.array([[1.0, 0.0], [0.2, 0.0]])
    assert list(clf.predict(X)) == [TIE, A]
    assert list(clf.correct(X, [A, A], "strict")) == [False, True]
    assert list(clf.correct(X, [A, A], "optimistic")) == [True, True]


def test_empty_dataset_errors():
    with pytest.raises(ValueError):
        OneNN(LabeledDataset(np.zeros((0, 2)), np.zeros(0, dtype=int)))


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_1nn_matches_bruteforce(metric, rng):
    ds = random_finite(40, 3, 3, rng)
    X = rng.uniform(-1, 2, size=(500, 3))
    order = {"l1": 1, "l2": 2, "linf": np.inf}[metric]
    D = np.linalg.norm(X[:, None] - ds.points[None], ord=order, axis=2)
    want = ds.labels[D.argmin(axis=1)]
    got = OneNN(ds, metric).predict(X)
    ok = got != TIE
    assert ok.mean() > 0.99
    assert np.array_equal(got[ok], want[ok])


# ---------------------------------------------------------------- gradual 1-NN

def test_gradual_examples():
    np.testing.assert_allclose(C.gradual_from_distances([1.0, 3.0])[0], [0.75, 0.25], rtol=0, atol=1e-15)
    assert list(C.gradual_from_distances([2.0, 2.0])[0]) == [0.5, 0.5]
    assert list(C.gradual_from_distances([0.0, 5.0])[0]) == [1.0, 0.0]
    with pytest.raises(ExclusiveClassViolation, match="exclusive|several"):
        C.gradual_from_distances([0.0, 0.0, 1.0])


def test_gradual_scores_on_dataset():
    g = C.gradual_scores((0.5, 0.0), TWO)
    np.testing.assert_allclose(g.per_class, [0.75, 0.25], atol=1e-15)
    assert list(g.nearest_distances) == [0.5, 1.5]
    assert list(C.gradual_scores((0.0, 0.0), TWO).per_class) == [1.0, 0.0]


@pytest.mark.parametrize("kernel,f", [("inverse_square", lambda d: d ** -2.0),
                                      ("inverse_log1p", lambda d: 1 / math.log1p(d))])
def test_alternative_kernels(kernel, f):
    d = np.array([0.5, 1.0, 4.0])
    w = np.array([f(v) for v in d])
    np.testing.assert_allclose(C.gradual_from_distances(d, kernel)[0], w / w.sum(), rtol=1e-14)
    with pytest.raises(ValueError):
        C.gradual_from_distances(d, "bogus")


@given(st.lists(st.floats(1e-300, 1e300), min_size=2, max_size=12))
def test_gradual_normalised_and_argmax(ds):
    g = C.gradual_from_distances(ds)[0]
    assert abs(g.sum() - 1.0) <= 1e-12 and np.all(g >= 0)
    assert ds[int(g.argmax())] == min(ds)


def test_gradual_class_shares_1nn_decision(rng):
    ds = random_finite(30, 2, 4, rng)
    clf = C.GradualOneNN(ds, "l2")
    X = rng.uniform(-0.5, 1.5, size=(2000, 2))
    hard = clf.predict(X)
    soft = ds.classes[clf.scores(X).argmax(axis=1)]
    ok = hard != TIE
    assert np.array_equal(hard[ok], soft[ok])


# ---------------------------------------------------------------- open set

def test_open_set_examples():
    for K in (2, 3, 10):
        u = np.full(K, 1.0 / K)
        for alpha in (0.0, 0.3, 1.0):
            assert C.unknown_score(u, alpha)[0] == alpha
        onehot = np.eye(K)[0]
        assert C.unknown_score(onehot, 0.7)[0] == 0.0
        assert C.unknown_score(onehot, 0.7, "geometric_mean")[0] == 0.0


def test_open_set_range_errors():
    with pytest.raises(ValueError):
        C.unknown_score([0.5, 0.5], 1.5)
    with pytest.raises(ValueError):
        C.unknown_score([0.5, 0.5], -0.1, "geometric_mean")
    with pytest.raises(ValueError):
        C.unknown_score([0.5, 0.5], 2.5, "geometric_mean")
    C.unknown_score([0.5, 0.5], 2.0, "geometric_mean")


@given(st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda v: sum(v) > 0),
       st.floats(0, 1), st.sampled_from(["entropy", "geometric_mean"]))
def test_open_set_normalised(v, alpha, variant):
    g = np.array(v) / sum(v)
    s = C.open_set_scores(g, alpha, variant)
    assert abs(s.sum() - 1.0) <= 1e-12 and np.all(s >= 0)


def test_unknown_argmax_threshold():
    # the unknown class can win only above 1/(1+K) under the entropy variant
    for K in (2, 3, 5):
        u = np.full(K, 1.0 / K)
        cut = 1.0 / (1 + K)
        assert C.open_set_predict(u, range(K), cut + 1e-9)[0] == UNKNOWN
        assert C.open_set_predict(u, range(K), cut - 1e-9)[0] != UNKNOWN
    rng = np.random.default_rng(0)
    for K in (2, 4):
        g = rng.dirichlet(np.ones(K), size=5000)
        pred = C.open_set_predict(g, range(K), 1.0 / (1 + K) - 1e-12)
        assert not np.any(pred == UNKNOWN)


def test_open_set_classifier():
    clf = C.OpenSetGradualOneNN(TWO, alpha=0.9)
    assert list(clf.predict([[1.0, 0.0], [0.0, 0.0]])) == [UNKNOWN, A]
    np.testing.assert_allclose(clf.open_scores([[1.0, 0.0]])[0], [0.05, 0.05, 0.9], atol=1e-15)


# ---------------------------------------------------------------- noisy ensemble

def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(sigma=-1.0)
    with pytest.raises(ValueError):
        EnsembleConfig(members=0)
    with pytest.raises(ValueError):
        EnsembleConfig(noise_model="laplace")
    assert EnsembleConfig(combine="gradual_of_mean").combine is C.Combine.GRADUAL_OF_MEAN


@pytest.mark.parametrize("combine", ["vote", "gradual", "gradual-of-mean"])
def test_sigma_zero_is_base(combine, rng):
    ds = random_finite(25, 2, 3, rng)
    X = rng.uniform(-0.2, 1.2, size=(400, 2))
    ens = NoisyEnsemble(ds, "l2", EnsembleConfig(0.0, 50, combine=combine))
    if combine == "vote":
        assert np.array_equal(ens.predict(X), OneNN(ds).predict(X))
    else:
        assert np.array_equal(ens.scores(X), C.GradualOneNN(ds).scores(X))


@pytest.mark.parametrize("model", ["gaussian", "rbf"])
@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_symmetric_midpoint(model, metric):
    ds = LabeledDataset([[-1.0, 0.0], [1.0, 0.0]], [A, B])
    M = 600
    s = C.noisy_ensemble_scores((0.0, 0.0), ds, metric, EnsembleConfig(0.7, M, 3, model))
    assert abs(s[0] - 0.5) <= 3 / math.sqrt(M)
    assert abs(s.sum() - 1.0) <= 1e-12


def test_ensemble_deterministic_across_threads(rng):
    ds = random_finite(20, 2, 2, rng)
    X = rng.uniform(0, 1, size=(300, 2))
    cfg = EnsembleConfig(0.1, 37, seed=9, combine="gradual")
    s1 = NoisyEnsemble(ds, "linf", cfg, threads=1).scores(X)
    s4 = NoisyEnsemble(ds, "linf", cfg, threads=4).scores(X)
    assert s1.tobytes() == s4.tobytes()
    other = NoisyEnsemble(ds, "linf", EnsembleConfig(0.1, 37, seed=10, combine="gradual")).scores(X)
    assert not np.array_equal(s1, other)


def test_rbf_weights():
    n = np.array([[0.0, 0.0], [1.0, -2.0]])
    np.testing.assert_allclose(C.rbf_weights(n, 1.0, C.MetricKind.L1), [1.0, math.exp(-4.5)])
    np.testing.assert_allclose(C.rbf_weights(n, 2.0, C.MetricKind.LINF), [1.0, math.exp(-0.5)])


def test_scores_are_distributions(rng):
    ds = random_finite(15, 2, 3, rng)
    X = rng.uniform(0, 1, size=(200, 2))
    for comb in ("vote", "gradual", "gradual-of-mean"):
        S = NoisyEnsemble(ds, "l1", EnsembleConfig(0.2, 20, combine=comb, noise_model="rbf")).scores(X)
        assert np.all(S >= 0) and np.max(np.abs(S.sum(axis=1) - 1)) <= 1e-12
