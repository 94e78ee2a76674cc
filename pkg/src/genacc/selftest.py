"""In-process golden values and quick property checks behind ``genacc selftest``."""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from . import analytic, datasets, kernels
from .classifiers import EnsembleConfig, NoisyEnsemble, OneNN, step_classifier
from .evaluation import AttackConfig, accuracy_curve, ara
from .geometry import MetricKind


def _toy_goldens():
    toy = analytic.ToyProblem.from_dataset(datasets.make_toy_1d())
    f1, f2, f3 = (step_classifier(n) for n in ("f1", "f2", "f3"))
    checks = [
        (analytic.std_max(f1, toy, Fraction(1, 2)), Fraction(3, 4)),
        (analytic.std_exact(f2, toy, 6), Fraction(1, 2)),
        (analytic.gen_exact(f1, toy, Fraction(1, 2)), Fraction(3, 4)),
        (analytic.gen_exact(f1, toy, 1), 1),
        (analytic.gen_exact(f2, toy, 3), Fraction(1, 2)),
        (analytic.gen_max_class_region(f1, toy, Fraction(1, 2)), Fraction(3, 4)),
        (analytic.gen_max_class_region(f2, toy, Fraction(5, 2)), Fraction(3, 4)),
        (analytic.gen_max_class_region(f3, toy, 4), 1),
    ]
    return all(a == b for a, b in checks)


def _ara():
    toy = datasets.make_toy_1d()
    att = AttackConfig(mode="analytic_1d")
    return all(ara(accuracy_curve("std_max", step_classifier(n), toy, attack=att)) == 1.5
               for n in ("f1", "f2", "f3"))


def _backends():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(37, 5)), rng.normal(size=(23, 5))
    names = kernels.available_backends()
    return all(np.array_equal(kernels.pairwise(A, B, m, backend=names[0]),
                              kernels.pairwise(A, B, m, backend="python")) for m in (0, 1, 2))


def _one_nn_robust(count):
    rng = np.random.default_rng(7)
    att = AttackConfig(grid_resolution=101)
    for k in range(count):
        ds = datasets.random_finite(int(rng.integers(2, 12)), 2, 3, rng)
        metric = list(MetricKind)[k % 3]
        c = accuracy_curve("gen_max", OneNN(ds, metric), ds, np.linspace(0, 1.5, 8), att, metric)
        if not np.all(c.accuracies == 1.0):
            return False
    return True


def _ensemble():
    ds = datasets.make_noise_example()
    grid = np.random.default_rng(1).uniform(-3, 3, size=(200, 2))
    base = OneNN(ds).predict(grid)
    e0 = NoisyEnsemble(ds, "L2", EnsembleConfig(sigma=0.0, members=10)).predict(grid)
    cfg = EnsembleConfig(sigma=0.5, members=64, seed=3)
    s1 = NoisyEnsemble(ds, "L2", cfg, threads=1).scores(grid)
    s2 = NoisyEnsemble(ds, "L2", cfg, threads=4).scores(grid)
    return np.array_equal(base, e0) and np.array_equal(s1, s2)


def _sunset(n, res):
    ds = datasets.make_sunset(n)
    xs = np.linspace(-2, 2, res)
    ys = np.linspace(-1, 3, res)
    X1, X2 = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([X1.ravel(), X2.ravel()])
    oracle, dist = datasets.sunset_oracle(grid)
    far = dist > 0.02
    return np.mean(OneNN(ds).predict(grid)[far] == oracle[far]) >= 0.999


def run_selftest(quick: bool = False) -> int:
    checks = [
        ("toy golden values", _toy_goldens),
        ("ARA of the standard max curves", _ara),
        ("kernel backend parity", _backends),
        ("1-NN genuine max accuracy is 1", lambda: _one_nn_robust(6 if quick else 30)),
        ("ensemble degeneracy and determinism", _ensemble),
        ("sunset parabola agreement", lambda: _sunset(2000 if quick else 10000, 80 if quick else 200)),
    ]
    failed = 0
    for name, fn in checks:
        t0 = time.perf_counter()
        ok = bool(fn())
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({time.perf_counter() - t0:.2f}s)")
    print(f"{len(checks) - failed}/{len(checks)} checks passed (backend: {kernels.BACKEND})")
    return 1 if failed else 0
