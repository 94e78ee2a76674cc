import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from genacc import evaluation as E
from genacc.analytic import UndefinedAccuracy
from genacc.classifiers import GradualOneNN, OneNN, step_classifier
from genacc.datasets import LabeledDataset, make_toy_1d, random_finite
from genacc.geometry import MetricKind
from genacc.modes import AttackMode, NormMode, VoronoiMode

TOY = make_toy_1d()
ANALYTIC = E.AttackConfig(mode="analytic_1d")
GRID = E.AttackConfig()


# ---------------------------------------------------------------- curves and ARA

def test_curve_validation():
    with pytest.raises(ValueError):
        E.AccuracyCurve([0, 1], [1.0], "x", "y")
    with pytest.raises(ValueError):
        E.AccuracyCurve([0, 0], [1.0, 1.0], "x", "y")
    with pytest.raises(ValueError):
        E.AccuracyCurve([0, 1], [1.0, 1.1], "x", "y")
    with pytest.raises(ValueError):
        E.AccuracyCurve([], [], "x", "y")


def test_ara_rectangle():
    assert E.ara(E.AccuracyCurve([0.0, 0.5, 2.0], [1.0, 1.0, 1.0], "std_max", "c")) == 2.0
    assert E.ara(E.AccuracyCurve([0.0], [1.0], "std_max", "c")) == 0.0


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 1)), min_size=1, max_size=30,
                unique_by=lambda t: t[0]))
def test_curve_csv_roundtrip(rows):
    rows.sort()
    c = E.AccuracyCurve([r[0] for r in rows], [r[1] for r in rows], "gen_max", "1nn")
    back = E.AccuracyCurve.from_csv(c.to_csv())
    assert back.epsilons.tobytes() == c.epsilons.tobytes()
    assert back.accuracies.tobytes() == c.accuracies.tobytes()


def test_curve_write(tmp_path):
    c = E.accuracy_curve("std_max", step_classifier("f1"), TOY, attack=ANALYTIC)
    c.write(tmp_path / "curve.csv")
    assert (tmp_path / "curve.csv").read_text().startswith("epsilon,accuracy\n")
    meta = json.loads((tmp_path / "curve.json").read_text())
    assert meta["evaluator"] == "std_max" and meta["ara"] == 1.5
    assert meta["attack"]["mode"] == "analytic_1d" and meta["seed"] == 0
    with pytest.raises(ValueError):
        E.AccuracyCurve.from_csv("eps,acc\n0,1\n")


# ---------------------------------------------------------------- configuration

def test_attack_config_validation():
    with pytest.raises(ValueError):
        E.AttackConfig(grid_resolution=1)
    with pytest.raises(ValueError):
        E.AttackConfig(pgd_steps=0)
    with pytest.raises(ValueError):
        E.AttackConfig(mode="fgsm")
    cfg = E.AttackConfig(mode="pgd", voronoi_mode="class-region", tie_policy="optimistic")
    assert cfg.mode is AttackMode.PGD and cfg.voronoi_mode is VoronoiMode.CLASS_REGION
    assert json.loads(json.dumps(cfg.to_dict()))["tie_policy"] == "optimistic"


# ---------------------------------------------------------------- worst-case search

def test_worst_case_examples():
    f1, f3 = step_classifier("f1"), step_classifier("f3")
    fs = E.FeasibleSet([1.2], 0.5, MetricKind.L2)
    r = E.worst_case_search(f1, [1.2], 1, fs, GRID)
    assert r.misclassified and r.x_star[0] == pytest.approx(0.7, abs=1e-12)
    r = E.worst_case_search(f1, [1.2], 1, fs, ANALYTIC)
    assert r.misclassified and r.x_star[0] == pytest.approx(0.7, abs=1e-12)
    region = E.FeasibleSet([1.2], 0.5, MetricKind.L2, interval=(0.0, math.inf))
    assert not E.worst_case_search(f3, [1.2], 1, region, GRID).misclassified
    assert not E.worst_case_search(f3, [1.2], 1, region, ANALYTIC).misclassified


@pytest.mark.parametrize("c", [1, -1])
def test_worst_case_eps0(c):
    f1 = step_classifier("f1")
    r = E.worst_case_search(f1, [0.3], c, E.FeasibleSet([0.3], 0.0, MetricKind.L2), GRID)
    assert r.x_star[0] == 0.3 and r.misclassified == (c != -1)


def test_search_reports_feasible_point(rng):
    ds = random_finite(20, 2, 2, rng)
    q = E._finite_query(ds, MetricKind.L2, GRID)
    clf = GradualOneNN(ds)
    for i in range(len(ds)):
        fs = E.FeasibleSet(ds.points[i], 0.3, MetricKind.L2, query=q, anchor=i)
        for mode in ("grid", "pgd"):
            r = E.worst_case_search(clf, ds.points[i], int(ds.labels[i]), fs, E.AttackConfig(mode=mode))
            assert not r.misclassified
            assert np.linalg.norm(r.x_star - ds.points[i]) <= 0.3 + 1e-9


# ---------------------------------------------------------------- accuracy measures

def test_numeric_matches_analytic_on_toy():
    """Grid search over the discretised toy tracks the closed form."""
    for which in ("f1", "f2", "f3"):
        f = step_classifier(which)
        for e in (0.0, 0.5, 1.5, 3.0, 5.5):
            exact = E.std_adv_acc(f, TOY, e, NormMode.MAX, ANALYTIC)
            grid = E.std_adv_acc(f, TOY, e, NormMode.MAX, GRID)
            assert grid == pytest.approx(exact, abs=0.011)
            exact = E.std_adv_acc(f, TOY, e, NormMode.EXACT, ANALYTIC)
            grid = E.std_adv_acc(f, TOY, e, NormMode.EXACT, GRID)
            assert grid == pytest.approx(exact, abs=0.011)
            cr = E.AttackConfig(voronoi_mode="class_region")
            exact = E.genuine_adv_acc_max(f, TOY, e, E.AttackConfig(mode="analytic_1d",
                                                                    voronoi_mode="class_region"))
            assert E.genuine_adv_acc_max(f, TOY, e, cr) == pytest.approx(exact, abs=0.011)


def test_published_examples_through_public_api():
    f1, f2, f3 = (step_classifier(k) for k in ("f1", "f2", "f3"))
    assert E.std_adv_acc(f1, TOY, 0.5, "max", ANALYTIC) == 0.75
    assert E.std_adv_acc(f2, TOY, 5.5, "exact", ANALYTIC) == 0.25
    assert E.std_adv_acc(f3, TOY, 1.0, "max", ANALYTIC) == 1.0
    assert E.genuine_adv_acc_exact(f1, TOY, 0.5, ANALYTIC) == 0.75
    assert E.genuine_adv_acc_exact(f2, TOY, 3.0, ANALYTIC) == 0.5
    cr = E.AttackConfig(mode="analytic_1d", voronoi_mode="class_region")
    assert E.genuine_adv_acc_max(f1, TOY, 0.5, cr) == 0.75
    assert E.genuine_adv_acc_max(f2, TOY, 2.5, cr) == 0.75
    with pytest.raises(ValueError):
        E.genuine_adv_acc_max(f1, TOY, 0.5, ANALYTIC)


def test_s_exact_set_modes():
    assert E.s_exact_set(TOY, 0.5, attack=ANALYTIC).points[:, 0].tolist() == [-2, -1, 1, 2]
    assert E.s_exact_set(TOY, 1.5, attack=ANALYTIC).points[:, 0].tolist() == [-2, 2]
    s0 = E.s_exact_set(TOY, 0.0)
    assert s0.points is TOY.points and s0.region is TOY.region


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_finite_s_exact_candidates_are_genuine(metric, rng):
    ds = random_finite(12, 2, 2, rng)
    m = MetricKind.parse(metric)
    cfg = E.AttackConfig(sphere_directions=512)
    q = E._finite_query(ds, m, cfg)
    for eps in (0.05, 0.3):
        s = E.s_exact_set(ds, eps, m, cfg)
        assert len(s.candidates) == s.points.shape[0] >= 1
        for x, P in zip(s.points, s.candidates):
            assert np.all(np.abs(m.norm(P - x, axis=1) - eps) <= 1e-9)
            assert not q.on_boundary(P).any()
            assert not q.previously_allowed(P, eps).any()
            np.testing.assert_allclose(q.nearest_distance(P), eps, rtol=0, atol=1e-9)


def test_finite_s_exact_two_points():
    ds = LabeledDataset([[0.0, 0.0], [2.0, 0.0]], [0, 1])
    s = E.s_exact_set(ds, 0.5, attack=E.AttackConfig(sphere_directions=720))
    assert list(s.indices) == [0, 1]
    # the x-axis direction toward the other point stays feasible below the bisector
    assert E.genuine_adv_acc_exact(OneNN(ds), ds, 0.5) == 1.0
    assert E.genuine_adv_acc_exact(OneNN(ds), ds, 0.0) == 1.0


def test_undefined_genuine_exact(monkeypatch):
    ds = LabeledDataset([[0.0, 0.0], [2.0, 0.0]], [0, 1])
    empty = E.SExactSet(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), [])
    monkeypatch.setattr(E, "s_exact_set", lambda *a, **k: empty)
    with pytest.raises(UndefinedAccuracy):
        E.genuine_adv_acc_exact(OneNN(ds), ds, 0.5)
    c = E.accuracy_curve("gen_exact", OneNN(ds), ds, [0.0, 0.5])
    assert c.epsilons.tolist() == [0.0]


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_all_measures_equal_plain_accuracy_at_zero(metric, rng):
    ds = random_finite(15, 2, 3, rng)
    noisy = LabeledDataset(ds.points, np.roll(ds.labels, 1))
    clf = OneNN(ds, metric)
    plain = E.plain_accuracy(clf, noisy)
    for mode in ("max", "exact"):
        assert E.std_adv_acc(clf, noisy, 0.0, mode, metric=metric) == plain
    assert E.genuine_adv_acc_max(clf, noisy, 0.0, metric=metric) == plain
    assert E.genuine_adv_acc_exact(clf, noisy, 0.0, metric=metric) == plain


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_1nn_genuine_max_is_one(metric, rng):
    ds = random_finite(10, 2, 3, rng)
    for mode in ("grid", "pgd"):
        cfg = E.AttackConfig(mode=mode, grid_resolution=41)
        for e in (0.1, 0.4, 1.5):
            assert E.genuine_adv_acc_max(OneNN(ds, metric), ds, e, cfg, metric) == 1.0
            assert E.genuine_adv_acc_max(GradualOneNN(ds, metric), ds, e, cfg, metric) == 1.0


def test_nested_lattice_curve(rng):
    """The shared eps_max lattice agrees with a dedicated search at eps_max."""
    ds = random_finite(12, 2, 2, rng)
    clf = OneNN(LabeledDataset(ds.points[::2], ds.labels[::2]))
    cfg = E.AttackConfig(grid_resolution=31)
    eps = np.linspace(0, 0.6, 7)
    for ev, genuine, fn in (
            ("std_max", False, lambda e: E.std_adv_acc(clf, ds, e, "max", cfg)),
            ("gen_max", True, lambda e: E.genuine_adv_acc_max(clf, ds, e, cfg))):
        curve = E.accuracy_curve(ev, clf, ds, eps, cfg)
        assert curve.is_non_increasing()
        assert curve.accuracies[-1] == fn(eps[-1])
        assert curve.accuracies[0] == E.plain_accuracy(clf, ds)
        radii = E.break_radii(clf, ds, 0.6, attack=cfg, genuine=genuine)
        assert curve.accuracies.tolist() == [float(np.mean(radii > e)) for e in eps]


def test_curve_defaults():
    eps = E.default_epsilons(LabeledDataset([[0.0, 0.0], [3.0, 4.0]], [0, 1]))
    assert eps.size == 128 and eps[0] == 0 and eps[-1] == 5.0
    c = E.accuracy_curve("gen_exact", step_classifier("f2"), TOY, attack=ANALYTIC)
    assert c.at(3.0) == 0.5 and c.epsilons[-1] == pytest.approx(6.3)


def test_genuine_region_samples(rng):
    ds = random_finite(8, 2, 2, rng)
    smp = E.genuine_region_samples(ds, 0.2, 50, attack=E.AttackConfig(sphere_directions=256))
    assert 0 < len(smp) <= 50
    for s in smp:
        assert abs(np.linalg.norm(s.candidate - s.base_point) - 0.2) <= 1e-9


def test_threads_do_not_change_results(rng):
    ds = random_finite(16, 2, 2, rng)
    clf = GradualOneNN(LabeledDataset(ds.points[::2], ds.labels[::2]))
    a = [E.std_adv_acc(clf, ds, 0.3, "max", E.AttackConfig(mode="pgd", threads=t)) for t in (1, 3)]
    assert a[0] == a[1]
