"""Classifiers: the 1-D step functions and the nearest-neighbour family.

Every classifier exposes ``predict(X)`` returning labels (``TIE`` /
``UNKNOWN`` sentinels where applicable).  Score-producing classifiers
also expose ``scores(X)``, an ``(m, num_classes)`` array in the order of
``classes``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import kernels
from .geometry import DEFAULT_VB_TOLERANCE, FiniteClosure, MetricKind, as_point

TIE = -(2 ** 62)
UNKNOWN = TIE + 1


class TiePolicy(enum.Enum):
    STRICT = "strict"
    OPTIMISTIC = "optimistic"

    @classmethod
    def parse(cls, value):
        return value if isinstance(value, cls) else cls(str(value).lower())


class ExclusiveClassViolation(ValueError):
    """Two classes sit at distance zero from the same query."""


class Classifier:
    classes: np.ndarray
    name = "classifier"

    @property
    def has_scores(self) -> bool:
        return False

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def scores(self, X) -> np.ndarray:
        raise NotImplementedError(f"{self.name} produces hard labels only")


# --------------------------------------------------------------------------
# step classifiers on the real line


def step(x):
    return 1 if x >= 0 else -1


_STEP_FORMULAS = {
    "f1": lambda x: step(x - 1),
    "f2": lambda x: 1 - step(x + 4) + step(x),
    "f3": lambda x: step(x),
}

# piecewise-constant description: value on [bp[k-1], bp[k])
_STEP_PIECES = {
    "f1": ((1,), (-1, 1)),
    "f2": ((-4, 0), (1, -1, 1)),
    "f3": ((0,), (-1, 1)),
}


class StepClassifier(Classifier):
    """Right-continuous piecewise-constant classifier on the real line."""

    def __init__(self, name: str, breakpoints, values):
        if len(values) != len(breakpoints) + 1:
            raise ValueError("need one more value than breakpoints")
        self.name = name
        self.breakpoints = tuple(breakpoints)
        self.values = tuple(int(v) for v in values)
        self.classes = np.unique(np.array(self.values, dtype=np.int64))
        self._bp = np.array(self.breakpoints, dtype=np.float64)
        self._vals = np.array(self.values, dtype=np.int64)

    def value_at(self, x):
        """Scalar evaluation; exact for ``Fraction`` inputs."""
        k = 0
        while k < len(self.breakpoints) and x >= self.breakpoints[k]:
            k += 1
        return self.values[k]

    def pieces(self):
        """``(lo, hi, value)`` triples covering the line; ends are +-inf."""
        edges = [-math.inf, *self.breakpoints, math.inf]
        return [(edges[k], edges[k + 1], self.values[k]) for k in range(len(self.values))]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("step classifiers take 1-D inputs")
            X = X[:, 0]
        return self._vals[np.searchsorted(self._bp, X, side="right")]


def step_classifier(which: str) -> StepClassifier:
    """One of the toy classifiers ``f1``, ``f2``, ``f3``."""
    try:
        bps, vals = _STEP_PIECES[which]
    except KeyError:
        raise ValueError(f"unknown step classifier {which!r}") from None
    clf = StepClassifier(which, bps, vals)
    # the piece table must agree with the defining formula
    formula = _STEP_FORMULAS[which]
    for b in bps:
        for x in (Fraction(b), Fraction(b) - Fraction(1, 1024)):
            assert clf.value_at(x) == formula(x)
    return clf


# --------------------------------------------------------------------------
# nearest neighbour


def _tolerance(dataset, metric: MetricKind, vb_tolerance: float) -> float:
    try:
        return vb_tolerance * dataset.closure.diameter(metric)
    except NotImplementedError:
        return vb_tolerance * FiniteClosure(dataset.points).diameter(metric)


def _row_min(D: np.ndarray) -> np.ndarray:
    out = D[:, 0].copy()
    for k in range(1, D.shape[1]):
        np.minimum(out, D[:, k], out=out)
    return out


class OneNN(Classifier):
    """Hard single nearest neighbour; multi-class ties predict ``TIE``."""

    name = "1nn"

    def __init__(self, dataset, metric: MetricKind | str = MetricKind.L2,
                 vb_tolerance: float = DEFAULT_VB_TOLERANCE):
        if len(dataset) == 0:
            raise ValueError("empty dataset")
        self.dataset = dataset
        self.metric = MetricKind.parse(metric)
        self.classes = dataset.classes
        self._idx = dataset.label_index()
        self.tol = _tolerance(dataset, self.metric, vb_tolerance)

    def class_distances(self, X) -> np.ndarray:
        X = kernels.as_points(X)
        if X.shape[1] != self.dataset.dim:
            raise ValueError("dimension mismatch")
        return kernels.class_nearest(X, self.dataset.points, self._idx,
                                     len(self.classes), self.metric.code)

    def tied(self, X) -> np.ndarray:
        """Boolean ``(m, K)`` mask of classes within tolerance of the nearest."""
        D = self.class_distances(X)
        return D - _row_min(D)[:, None] <= self.tol

    def predict(self, X) -> np.ndarray:
        T = self.tied(X)
        # column loops: numpy row reductions are slow for narrow (m, K) arrays
        out = np.full(T.shape[0], TIE, dtype=np.int64)
        count = np.zeros(T.shape[0], dtype=np.int64)
        for k in range(T.shape[1] - 1, -1, -1):
            col = T[:, k]
            out[col] = self.classes[k]
            count += col
        out[count > 1] = TIE
        return out

    def correct(self, X, y, policy: TiePolicy | str = TiePolicy.STRICT) -> np.ndarray:
        T = self.tied(X)
        truth = T[np.arange(T.shape[0]), np.searchsorted(self.classes, np.asarray(y))]
        if TiePolicy.parse(policy) is TiePolicy.OPTIMISTIC:
            return truth
        return truth & (T.sum(axis=1) == 1)


@dataclass(frozen=True)
class Tie:
    labels: frozenset


def predict_1nn(p, dataset, metric: MetricKind | str = MetricKind.L2,
                tie_policy: TiePolicy | str = TiePolicy.STRICT):
    """Label of the nearest point, or ``Tie`` carrying every tied label.

    The policy does not change the outcome itself; it decides how a tie
    is scored (see :func:`outcome_correct`).
    """
    TiePolicy.parse(tie_policy)
    clf = OneNN(dataset, metric)
    T = clf.tied(as_point(p)[None, :])[0]
    labels = clf.classes[T]
    if labels.size == 1:
        return int(labels[0])
    return Tie(frozenset(int(v) for v in labels))


def outcome_correct(outcome, true_label: int, tie_policy: TiePolicy | str = TiePolicy.STRICT) -> bool:
    if isinstance(outcome, Tie):
        if TiePolicy.parse(tie_policy) is TiePolicy.OPTIMISTIC:
            return true_label in outcome.labels
        return outcome.labels == frozenset([true_label])
    return outcome == true_label


# --------------------------------------------------------------------------
# gradual nearest neighbour

KERNELS = ("inverse", "inverse_square", "inverse_log1p")


class GradualScores(NamedTuple):
    per_class: np.ndarray
    nearest_distances: np.ndarray


def gradual_from_distances(D, kernel: str = "inverse") -> np.ndarray:
    """Normalised decreasing-kernel scores from per-class nearest distances."""
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    zero = D == 0.0
    nzero = zero.sum(axis=1)
    if np.any(nzero > 1):
        raise ExclusiveClassViolation("several classes at distance 0 (conflicting duplicates)")
    dmin = D.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kernel == "inverse":
            w = dmin / D
        elif kernel == "inverse_square":
            w = (dmin / D) ** 2
        elif kernel == "inverse_log1p":
            w = np.log1p(dmin) / np.log1p(D)
        else:
            raise ValueError(f"unknown kernel {kernel!r}")
    w = np.where(np.isfinite(D), w, 0.0)
    g = w / w.sum(axis=1, keepdims=True)
    return np.where(nzero[:, None] == 1, zero.astype(np.float64), g)


def gradual_scores(p, dataset, metric: MetricKind | str = MetricKind.L2,
                   kernel: str = "inverse") -> GradualScores:
    metric = MetricKind.parse(metric)
    D = kernels.class_nearest(as_point(p)[None, :], dataset.points, dataset.label_index(),
                              dataset.num_classes, metric.code)[0]
    if not np.all(np.isfinite(D)):
        raise ValueError("every class needs at least one point")
    return GradualScores(gradual_from_distances(D, kernel)[0], D)


class GradualOneNN(OneNN):
    name = "gradual-1nn"

    def __init__(self, dataset, metric=MetricKind.L2, kernel: str = "inverse",
                 vb_tolerance: float = DEFAULT_VB_TOLERANCE):
        super().__init__(dataset, metric, vb_tolerance)
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}")
        self.kernel = kernel

    @property
    def has_scores(self) -> bool:
        return True

    def scores(self, X) -> np.ndarray:
        return gradual_from_distances(self.class_distances(X), self.kernel)


# --------------------------------------------------------------------------
# open-set extension


class OpenSetVariant(enum.Enum):
    ENTROPY = "entropy"
    GEOMETRIC_MEAN = "geometric_mean"

    @classmethod
    def parse(cls, value):
        return value if isinstance(value, cls) else cls(str(value).lower().replace("-", "_"))


def unknown_score(g, alpha: float, variant: OpenSetVariant | str = OpenSetVariant.ENTROPY) -> np.ndarray:
    """Probability mass for the unknown class, one value per row of ``g``."""
    variant = OpenSetVariant.parse(variant)
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    K = g.shape[1]
    if variant is OpenSetVariant.ENTROPY:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("entropy variant needs 0 <= alpha <= 1")
        if K < 2:
            return np.zeros(g.shape[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(g > 0.0, g * np.log(g), 0.0)
        h = np.minimum(-terms.sum(axis=1) / math.log(K), 1.0)
        # the uniform distribution has normalised entropy exactly 1
        h = np.where(np.all(g == g[:, :1], axis=1), 1.0, h)
        return alpha * h
    if not 0.0 <= alpha <= K:
        raise ValueError("geometric-mean variant needs 0 <= alpha <= |Y|")
    return alpha * np.prod(g ** (1.0 / K), axis=1)


def open_set_scores(g, alpha: float, variant: OpenSetVariant | str = OpenSetVariant.ENTROPY) -> np.ndarray:
    """Known-class scores scaled by ``1 - g_unknown`` with ``g_unknown`` appended last."""
    g2 = np.atleast_2d(np.asarray(g, dtype=np.float64))
    u = unknown_score(g2, alpha, variant)
    out = np.hstack([g2 * (1.0 - u)[:, None], u[:, None]])
    return out[0] if np.ndim(g) == 1 else out


def open_set_predict(g, classes, alpha: float, variant=OpenSetVariant.ENTROPY) -> np.ndarray:
    s = np.atleast_2d(open_set_scores(g, alpha, variant))
    labels = np.append(np.asarray(classes, dtype=np.int64), UNKNOWN)
    return labels[s.argmax(axis=1)]


class OpenSetGradualOneNN(GradualOneNN):
    name = "open-set-1nn"

    def __init__(self, dataset, metric=MetricKind.L2, alpha: float = 0.5,
                 variant=OpenSetVariant.ENTROPY, kernel: str = "inverse"):
        super().__init__(dataset, metric, kernel)
        self.alpha = float(alpha)
        self.variant = OpenSetVariant.parse(variant)
        unknown_score(np.full((1, len(self.classes)), 1.0 / len(self.classes)),
                      self.alpha, self.variant)

    def open_scores(self, X) -> np.ndarray:
        return np.atleast_2d(open_set_scores(super().scores(X), self.alpha, self.variant))

    def predict(self, X) -> np.ndarray:
        return open_set_predict(super().scores(X), self.classes, self.alpha, self.variant)


# --------------------------------------------------------------------------
# noisy ensemble


class NoiseModel(enum.Enum):
    GAUSSIAN_ISOTROPIC = "gaussian"
    RBF_KERNEL_WEIGHTING = "rbf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        for m in cls:
            if v in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown noise model {value!r}")


class Combine(enum.Enum):
    VOTE = "vote"                    # average of hard 1-NN votes
    GRADUAL = "gradual"              # average of per-member gradual scores
    GRADUAL_OF_MEAN = "gradual-of-mean"  # gradual scores of member-averaged distances

    @classmethod
    def parse(cls, value):
        return value if isinstance(value, cls) else cls(str(value).lower().replace("_", "-"))


@dataclass(frozen=True)
class EnsembleConfig:
    sigma: float = 0.0
    members: int = 1000
    seed: int = 0
    noise_model: NoiseModel = NoiseModel.GAUSSIAN_ISOTROPIC
    combine: Combine = Combine.VOTE

    def __post_init__(self):
        if self.members < 1:
            raise ValueError("members must be >= 1")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        object.__setattr__(self, "noise_model", NoiseModel.parse(self.noise_model))
        object.__setattr__(self, "combine", Combine.parse(self.combine))


def sample_noise(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Isotropic Gaussian displacement ``N(0, sigma^2 I)`` for one ensemble member."""
    return rng.normal(0.0, sigma, size=shape)


def rbf_weights(noise: np.ndarray, sigma: float, metric: MetricKind) -> np.ndarray:
    """Gaussian-kernel weight ``exp(-||n||^2 / (2 sigma^2))`` of each displaced point.

    The norm is the evaluation metric, so under L1/LINF heavily displaced
    points are discounted according to that metric.
    """
    r = kernels.pairwise(noise, np.zeros((1, noise.shape[1])), metric.code)[:, 0]
    return np.exp(-0.5 * (r / sigma) ** 2)


class NoisyEnsemble(Classifier):
    """Average of 1-NN classifiers over noise-displaced copies of the dataset.

    Member ``m`` draws its noise from a generator seeded by ``(seed, m)``
    and member results are summed in member order, so outputs do not
    depend on the thread count.
    """

    name = "noisy-ensemble"

    def __init__(self, dataset, metric=MetricKind.L2, config: EnsembleConfig = EnsembleConfig(),
                 kernel: str = "inverse", threads: int | None = None,
                 vb_tolerance: float = DEFAULT_VB_TOLERANCE):
        self.dataset = dataset
        self.metric = MetricKind.parse(metric)
        self.config = config
        self.kernel = kernel
        self.classes = dataset.classes
        self._idx = dataset.label_index()
        self.tol = _tolerance(dataset, self.metric, vb_tolerance)
        self.threads = threads or kernels.default_threads()

    @property
    def has_scores(self) -> bool:
        return True

    def _member_points(self, m: int):
        """Displaced points of member ``m`` and their distance weights (or ``None``)."""
        cfg = self.config
        if cfg.sigma == 0.0:
            return self.dataset.points, None
        rng = np.random.default_rng([cfg.seed, m])
        noise = sample_noise(rng, self.dataset.points.shape, cfg.sigma)
        w = None
        if cfg.noise_model is NoiseModel.RBF_KERNEL_WEIGHTING:
            w = rbf_weights(noise, cfg.sigma, self.metric)
        return self.dataset.points + noise, w

    def _class_distances(self, X: np.ndarray, pts: np.ndarray, w, true_distance: bool = False):
        """Per-class nearest distances of one member.

        With weights the nearest point of each class minimises ``d / w``;
        ``true_distance`` then reports its plain distance instead of the
        weighted one (the weighted value has no finite mean over members).
        """
        K = len(self.classes)
        if w is None:
            return kernels.class_nearest(X, pts, self._idx, K, self.metric.code, num_threads=1)
        D = np.full((X.shape[0], K), np.inf)
        for start in range(0, X.shape[0], 4096):
            raw = kernels.pairwise(X[start:start + 4096], pts, self.metric.code, num_threads=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                blk = np.where(w > 0.0, raw / w, np.inf)
            rows = np.arange(raw.shape[0])
            for k in range(K):
                cols = np.flatnonzero(self._idx == k)
                if cols.size:
                    j = cols[blk[:, cols].argmin(axis=1)]
                    D[start:start + 4096, k] = raw[rows, j] if true_distance else blk[rows, j]
        return D

    def _member(self, m: int, X: np.ndarray) -> np.ndarray:
        combine = self.config.combine
        pts, w = self._member_points(m)
        if combine is Combine.GRADUAL_OF_MEAN:
            return self._class_distances(X, pts, w, true_distance=True)
        D = self._class_distances(X, pts, w)
        if combine is Combine.GRADUAL:
            return gradual_from_distances(D, self.kernel)
        T = D - _row_min(D)[:, None] <= self.tol
        return T / T.sum(axis=1, keepdims=True)

    def scores(self, X) -> np.ndarray:
        X = kernels.as_points(X)
        members = 1 if self.config.sigma == 0.0 else self.config.members
        total = np.zeros((X.shape[0], len(self.classes)))
        batch = max(1, 4 * self.threads)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            for start in range(0, members, batch):
                ids = range(start, min(members, start + batch))
                for part in pool.map(lambda m: self._member(m, X), ids):
                    total += part
        total /= members
        if self.config.combine is Combine.GRADUAL_OF_MEAN:
            return gradual_from_distances(total, self.kernel)
        return total

    def predict(self, X) -> np.ndarray:
        S = self.scores(X)
        best = S.max(axis=1, keepdims=True)
        top = S == best
        out = self.classes[S.argmax(axis=1)]
        return np.where(top.sum(axis=1) > 1, TIE, out)


def noisy_ensemble_scores(p, dataset, metric, cfg: EnsembleConfig, threads: int | None = None) -> np.ndarray:
    return NoisyEnsemble(dataset, metric, cfg, threads=threads).scores(as_point(p)[None, :])[0]
