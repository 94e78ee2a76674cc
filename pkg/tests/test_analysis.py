import json
import math

import numpy as np
import pytest

from genacc import analysis as AN
from genacc.classifiers import gradual_scores
from genacc.datasets import LabeledDataset, make_blobs, make_synthetic_images

HAND = LabeledDataset([[0.0], [1.0], [3.0]], [0, 0, 1])


def brute(ds, order):
    """Independent oracle: full distance matrix through numpy.linalg.norm."""
    X = ds.points
    D = np.linalg.norm(X[:, None, :] - X[None, :, :], ord=order, axis=2)
    n = len(ds)
    same = ds.labels[:, None] == ds.labels[None, :]
    off = ~np.eye(n, dtype=bool)
    dd = np.where(~same, D, np.inf).min(axis=1)
    smin = np.where(same & off, D, np.inf).min(axis=1)
    smax = np.where(same & off, D, -np.inf).max(axis=1)
    return dd, smin, smax


ORDERS = {"l1": 1, "l2": 2, "linf": np.inf}


@pytest.mark.parametrize("engine", ["naive", "blocked"])
def test_hand_example(engine):
    s = AN.distance_stats(HAND, "l2", engine, tile=2)
    assert s.d_diff.tolist() == [3.0, 2.0, 2.0]
    assert s.d_same_min.tolist() == [1.0, 1.0, math.inf]
    assert s.d_same_max[:2].tolist() == [1.0, 1.0]
    assert s.singleton.tolist() == [False, False, True]
    assert AN.loo_cv_accuracy(s, "strict") == pytest.approx(2 / 3)
    assert AN.loo_cv_accuracy(s, "optimistic") == pytest.approx(2 / 3)
    assert s.ratio_min.tolist() == [0.75, 2 / 3, 0.0]


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
@pytest.mark.parametrize("tile", [1, 7, 64])
def test_engines_match_oracle(metric, tile):
    ds = make_blobs(150, 5, 4, seed=2)
    want = brute(ds, ORDERS[metric])
    for engine in ("naive", "blocked"):
        s = AN.distance_stats(ds, metric, engine, tile=tile)
        for got, ref in zip((s.d_diff, s.d_same_min, s.d_same_max), want):
            np.testing.assert_allclose(got, ref, rtol=1e-12)


@pytest.mark.parametrize("metric", ["l1", "l2", "linf"])
def test_blocked_matches_naive_on_images(metric):
    ds = make_synthetic_images(300, 784, 10, seed=4)
    a = AN.distance_stats(ds, metric, "naive")
    b = AN.distance_stats(ds, metric, "blocked", tile=64)
    for x, y in ((a.d_diff, b.d_diff), (a.d_same_min, b.d_same_min), (a.d_same_max, b.d_same_max)):
        np.testing.assert_allclose(y, x, rtol=1e-6)
    if metric == "linf":
        # integer pixels: every distance is an exact multiple of 1/255
        k = a.d_diff * 255.0
        assert np.array_equal(k, np.round(k))


def test_l2_gram_cancellation_recheck():
    # two nearly coincident far-from-origin points: the Gram form alone loses them
    base = np.full(50, 1e4)
    X = np.stack([base, base + 1e-6 * np.eye(50)[0], base + 1.0])
    ds = LabeledDataset(X, [0, 1, 1])
    s = AN.distance_stats(ds, "l2", "blocked", use_raw=False)
    assert s.d_diff[0] == pytest.approx(1e-6, rel=1e-6)


def test_checkpoint_resume(tmp_path):
    ds = make_blobs(120, 3, 3, seed=5)
    ck = tmp_path / "ck.npz"
    ref = AN.distance_stats(ds, "l1", "blocked", tile=16)

    class Stop(Exception):
        pass

    def interrupt(done, total):
        if done >= 48:
            raise Stop

    with pytest.raises(Stop):
        AN.distance_stats(ds, "l1", "blocked", tile=16, checkpoint=ck, progress=interrupt)
    assert ck.exists()
    seen = []
    out = AN.distance_stats(ds, "l1", "blocked", tile=16, checkpoint=ck,
                            progress=lambda d, t: seen.append(d))
    assert seen[0] == 64  # resumed after the three stored row blocks
    for f in ("d_diff", "d_same_min", "d_same_max"):
        assert np.array_equal(getattr(out, f), getattr(ref, f))
    # a checkpoint from another metric is ignored
    other = AN.distance_stats(ds, "linf", "blocked", tile=16, checkpoint=ck)
    assert np.array_equal(other.d_diff, AN.distance_stats(ds, "linf", "naive").d_diff)


def test_ratio_equals_binary_gradual_score():
    ds = make_blobs(80, 2, 2, seed=7)
    s = AN.distance_stats(ds, "l2", "naive")
    for i in range(len(ds)):
        rest = LabeledDataset(np.delete(ds.points, i, 0), np.delete(ds.labels, i))
        g = gradual_scores(ds.points[i], rest, "l2").per_class
        assert abs(g[ds.labels[i]] - s.ratio_min[i]) <= 1e-12


@pytest.mark.parametrize("metric", ["l2", "linf"])
def test_strict_loo_is_ratio_above_half(metric):
    ds = make_synthetic_images(200, 64, 5, seed=1)
    s = AN.distance_stats(ds, metric)
    assert AN.loo_cv_accuracy(s, "strict") == pytest.approx(np.mean(s.ratio_min > 0.5 + 1e-12))
    assert AN.loo_cv_accuracy(s, "optimistic") >= AN.loo_cv_accuracy(s, "strict")
    assert np.all(s.ratio_max <= s.ratio_min) and np.all((s.ratio_min >= 0) & (s.ratio_min <= 1))


def test_ties_split_policies():
    ds = LabeledDataset([[0.0], [1.0], [2.0]], [0, 1, 0])
    s = AN.distance_stats(ds, "l2")
    # the middle sample is a singleton; the outer ones see the other class first
    assert AN.loo_cv_accuracy(s, "strict") == 0.0
    ds = LabeledDataset([[0.0], [1.0], [-1.0], [5.0], [6.0]], [0, 1, 0, 1, 1])
    s = AN.distance_stats(ds, "l2")
    assert s.d_diff[0] == s.d_same_min[0] == 1.0
    # sample 0 is tied, sample 1 is wrong, the other three are right
    assert AN.loo_cv_accuracy(s, "strict") == pytest.approx(3 / 5)
    assert AN.loo_cv_accuracy(s, "optimistic") == pytest.approx(4 / 5)


def test_cross_entropy():
    ds = LabeledDataset([[0.0], [2.0], [1.0], [3.0]], [0, 0, 1, 1])
    s = AN.distance_stats(ds, "l2")
    assert s.ratio_min.tolist() == s.ratio_max.tolist() == [1 / 3, 1 / 3, 1 / 3, 1 / 3]
    half = LabeledDataset([[0.0], [1.0], [3.0], [4.0]], [0, 0, 1, 1])
    half = AN.distance_stats(half, "l2")
    half.d_diff[:] = half.d_same_min
    ce = AN.avg_cross_entropy(half)
    assert (ce.mean_neg_log2_ratio_min, ce.mean_neg_log2_ratio_max, ce.excluded) == (1.0, 1.0, 0)
    dup = LabeledDataset([[0.0], [0.0], [1.0], [2.0]], [0, 1, 0, 1])
    ce = AN.avg_cross_entropy(AN.distance_stats(dup, "l2"))
    assert ce.excluded == 2 and math.isfinite(ce.mean_neg_log2_ratio_min)


def test_histograms():
    s = AN.distance_stats(make_blobs(100, 3, 2, seed=3), "l2")
    for bins in (1, 5, 50):
        hs = AN.ratio_histograms(s, bins)
        assert set(hs) == {"d_diff", "ratio_min", "ratio_max"}
        for h in hs.values():
            assert abs(h.mass() - 1.0) <= 1e-9 and h.density.size == bins
    point = LabeledDataset([[0.0, 0.0], [0.0, 1.0], [5.0, 0.0], [5.0, 1.0]], [0, 0, 1, 1])
    h = AN.ratio_histograms(AN.distance_stats(point, "l2"), 7)["ratio_min"]
    assert np.count_nonzero(h.density) == 1 and abs(h.mass() - 1.0) <= 1e-9
    with pytest.raises(ValueError):
        AN.ratio_histograms(s, 0)


def test_report_outputs(tmp_path):
    ds = make_synthetic_images(60, 16, 3, seed=0)
    rep = AN.analyze(ds, "linf", bins=10, tile=16)
    rep.write(tmp_path)
    js = json.loads((tmp_path / "report.json").read_text())
    assert js["config"]["digest"] == ds.digest()
    assert js["min_d_diff"] == float(rep.stats.d_diff.min())
    assert js["min_d_diff_x255"] == pytest.approx(round(js["min_d_diff_x255"]), abs=1e-9)
    head = (tmp_path / "stats.csv").read_text().splitlines()
    assert head[0] == "index,label,d_diff,d_same_min,d_same_max,ratio_min,ratio_max"
    assert len(head) == 61
    assert (tmp_path / "hist_ratio_min.csv").read_text().startswith("bin_left,bin_right,density\n")


def test_errors():
    with pytest.raises(ValueError):
        AN.distance_stats(LabeledDataset(np.zeros((0, 1)), np.zeros(0, dtype=int)))
    with pytest.raises(ValueError):
        AN.distance_stats(HAND, tile=0)
    with pytest.raises(ValueError):
        AN.distance_stats(HAND, engine="fast")
