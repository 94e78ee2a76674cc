"""Standard and genuine adversarial accuracy, worst-case search and curves.

Finite datasets are searched numerically (exhaustive lattices, sphere
sampling or PGD); interval datasets with step classifiers can instead be
evaluated in closed form through :mod:`genacc.analytic`.

Search-based accuracies are upper bounds: a search that misses an
adversarial point reports the sample as robust.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import analytic, kernels
from .analytic import UndefinedAccuracy
from .classifiers import Classifier, StepClassifier, TiePolicy
from .geometry import (DEFAULT_VB_TOLERANCE, FiniteClosure, IntervalClosure, MetricKind,
                       VoronoiQuery, as_point, project_ball, project_ball_then_voronoi)
from .modes import AttackMode, Evaluator, NormMode, VoronoiMode

log = logging.getLogger(__name__)

__all__ = [
    "AccuracyCurve", "AttackConfig", "FeasibleSet", "GenuineRegionSample", "SExactSet",
    "SearchResult", "UndefinedAccuracy", "accuracy_curve", "ara", "default_epsilons",
    "genuine_adv_acc_exact", "genuine_adv_acc_max", "plain_accuracy", "s_exact_set",
    "sphere_directions", "std_adv_acc", "worst_case_search",
]


# --------------------------------------------------------------------------
# curves


@dataclass
class AccuracyCurve:
    epsilons: np.ndarray
    accuracies: np.ndarray
    evaluator: str
    classifier: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, dtype=np.float64)
        self.accuracies = np.asarray(self.accuracies, dtype=np.float64)
        if self.epsilons.shape != self.accuracies.shape or self.epsilons.ndim != 1:
            raise ValueError("epsilons and accuracies must be matching 1-D arrays")
        if self.epsilons.size == 0:
            raise ValueError("empty curve")
        if np.any(self.epsilons < 0) or np.any(np.diff(self.epsilons) <= 0):
            raise ValueError("epsilons must be non-negative and strictly increasing")
        if np.any((self.accuracies < 0) | (self.accuracies > 1)):
            raise ValueError("accuracies must lie in [0, 1]")

    def __len__(self):
        return self.epsilons.size

    def at(self, eps: float) -> float:
        hits = np.flatnonzero(self.epsilons == eps)
        if hits.size == 0:
            raise KeyError(eps)
        return float(self.accuracies[hits[0]])

    def is_non_increasing(self) -> bool:
        return bool(np.all(np.diff(self.accuracies) <= 0))

    def to_csv(self) -> str:
        lines = ["epsilon,accuracy"]
        lines += [f"{e:.17g},{a:.17g}" for e, a in zip(self.epsilons, self.accuracies)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        body = {"evaluator": self.evaluator, "classifier": self.classifier,
                "ara": ara(self), **self.meta,
                "epsilons": [float(e) for e in self.epsilons],
                "accuracies": [float(a) for a in self.accuracies]}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def write(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_csv())
        path.with_suffix(".json").write_text(self.to_json())

    @classmethod
    def from_csv(cls, text: str, evaluator: str = "", classifier: str = "") -> "AccuracyCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["epsilon", "accuracy"]:
            raise ValueError("curve CSV header must be epsilon,accuracy")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
        return cls(data[:, 0], data[:, 1], evaluator, classifier)


def ara(curve: AccuracyCurve) -> float:
    """Trapezoidal area under the curve over its own epsilon range."""
    e, a = curve.epsilons, curve.accuracies
    return math.fsum(0.5 * (e[k + 1] - e[k]) * (a[k + 1] + a[k]) for k in range(e.size - 1))


# --------------------------------------------------------------------------
# attack configuration and feasible sets


@dataclass(frozen=True)
class AttackConfig:
    mode: AttackMode = AttackMode.GRID_EXHAUSTIVE
    pgd_steps: int = 40
    pgd_step_fraction: float = 0.1
    pgd_restarts: int = 4
    fd_step: float = 1e-4
    grid_resolution: int = 201
    sphere_directions: int = 4096
    voronoi_mode: VoronoiMode = VoronoiMode.POINT_CELL
    alternations: int = 1
    tie_policy: TiePolicy = TiePolicy.STRICT
    vb_tolerance: float = DEFAULT_VB_TOLERANCE
    seed: int = 0
    threads: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", AttackMode.parse(self.mode))
        object.__setattr__(self, "voronoi_mode", VoronoiMode.parse(self.voronoi_mode))
        object.__setattr__(self, "tie_policy", TiePolicy.parse(self.tie_policy))
        if self.grid_resolution < 2:
            raise ValueError("grid resolution must be >= 2 per axis")
        if self.pgd_steps < 1 or self.pgd_restarts < 1:
            raise ValueError("PGD needs at least one step and one restart")
        if self.sphere_directions < 2:
            raise ValueError("need at least two sphere directions")
        if self.alternations < 1:
            raise ValueError("alternations must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if hasattr(v, "value"):
                d[k] = v.value
        return d


class FeasibleSet:
    """Where an attacker may move a sample ``center``.

    ``norm_mode`` picks the ball or the sphere of radius ``eps``.  The
    optional restrictions are a point Voronoi cell (``query`` plus
    ``anchor``), an open interval (1-D class region) and, for the exact
    genuine measure, exclusion of the previously allowed region and VB.
    """

    def __init__(self, center, eps: float, metric: MetricKind, norm_mode: NormMode = NormMode.MAX,
                 query: VoronoiQuery | None = None, anchor: int | None = None,
                 interval: tuple[float, float] | None = None, genuine_exact: bool = False):
        self.center = as_point(center)
        if eps < 0:
            raise ValueError("eps must be non-negative")
        self.eps = float(eps)
        self.metric = MetricKind.parse(metric)
        self.norm_mode = NormMode.parse(norm_mode)
        self.query = query
        self.anchor = anchor
        self.interval = interval
        self.genuine_exact = genuine_exact
        if (anchor is not None or genuine_exact) and query is None:
            raise ValueError("cell and genuine restrictions need a VoronoiQuery")

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, P) -> np.ndarray:
        P = kernels.as_points(P)
        r = self.metric.norm(P - self.center, axis=1)
        slack = 1e-9 * max(1.0, self.eps)
        if self.norm_mode is NormMode.EXACT:
            ok = np.abs(r - self.eps) <= slack
        else:
            ok = r <= self.eps + slack
        if self.interval is not None:
            lo, hi = self.interval
            ok &= (P[:, 0] > lo) & (P[:, 0] < hi)
        if self.anchor is not None and ok.any():
            ok[ok] = self.query.in_cell(P[ok], self.anchor)
        if self.genuine_exact and ok.any():
            sub = P[ok]
            ok[ok] = ~self.query.previously_allowed(sub, self.eps) & ~self.query.on_boundary(sub)
        return ok

    def candidates(self, attack: AttackConfig) -> np.ndarray:
        """Deterministic candidate points (lattice for the ball, directions for the sphere)."""
        if self.eps == 0.0:
            return self.center[None, :]
        if self.norm_mode is NormMode.EXACT:
            U = sphere_directions(self.dim, self.metric, attack.sphere_directions, attack.seed)
            return self.center + self.eps * U
        O = ball_lattice(self.dim, self.metric, attack.grid_resolution) * self.eps
        return self.center + O


def sphere_directions(d: int, metric: MetricKind, n: int, seed: int = 0) -> np.ndarray:
    """Points on the unit sphere of ``metric``: exhaustive in 1-D, even in 2-D/3-D."""
    metric = MetricKind.parse(metric)
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        t = 2.0 * np.pi * np.arange(n) / n
        U = np.column_stack([np.cos(t), np.sin(t)])
    elif d == 3:
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = np.pi * (3.0 - math.sqrt(5.0)) * k
        rho = np.sqrt(1.0 - z * z)
        U = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        U = np.random.default_rng(seed).normal(size=(n, d))
    return U / metric.norm(U, axis=1)[:, None]


_LATTICE_CACHE: dict = {}


def ball_lattice(d: int, metric: MetricKind, resolution: int):
    """Offsets of the unit-ball lattice, sorted by norm (odd resolutions include 0)."""
    key = (d, metric, resolution)
    if key not in _LATTICE_CACHE:
        axis = np.linspace(-1.0, 1.0, resolution)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        O = np.column_stack([g.reshape(-1) for g in grids])
        r = metric.norm(O, axis=1)
        keep = r <= 1.0 + 1e-12
        O, r = O[keep], r[keep]
        order = np.argsort(r, kind="stable")
        if len(_LATTICE_CACHE) > 8:
            _LATTICE_CACHE.clear()
        _LATTICE_CACHE[key] = np.ascontiguousarray(O[order])
    return _LATTICE_CACHE[key]


# --------------------------------------------------------------------------
# worst-case search


class SearchResult(NamedTuple):
    x_star: np.ndarray
    misclassified: bool
    explored: int


def _wrong(classifier: Classifier, P: np.ndarray, c: int, policy: TiePolicy) -> np.ndarray:
    if policy is TiePolicy.OPTIMISTIC and hasattr(classifier, "correct"):
        return ~classifier.correct(P, np.full(P.shape[0], c), policy)
    return classifier.predict(P) != c


def _surrogate(classifier: Classifier, P: np.ndarray, c: int) -> np.ndarray:
    # negative margin: best wrong-class score minus the true-class score
    S = classifier.scores(P)
    j = int(np.searchsorted(classifier.classes, c))
    wrong = np.delete(S, j, axis=1)
    return wrong.max(axis=1) - S[:, j]


def _pick(classifier, P, wrong, c, center, metric) -> np.ndarray:
    if classifier.has_scores:
        s = _surrogate(classifier, P, c)
        return P[int(np.argmax(s))]
    if wrong.any():
        W = P[wrong]
        return W[int(np.argmax(metric.norm(W - center, axis=1)))]
    return P[0]


def _analytic_search(clf: StepClassifier, feasible: FeasibleSet, c: int) -> SearchResult:
    x, eps = float(feasible.center[0]), feasible.eps
    if feasible.norm_mode is NormMode.EXACT:
        cand = np.array([[x - eps], [x + eps]])
        ok = feasible.contains(cand)
        cand = cand[ok]
        wrong = clf.predict(cand) != c
        xs = cand[wrong][0] if wrong.any() else (cand[0] if cand.size else feasible.center)
        return SearchResult(np.asarray(xs, dtype=float).reshape(1), bool(wrong.any()), int(ok.sum()))
    lo, lo_closed, hi, hi_closed = x - eps, True, x + eps, True
    if feasible.interval is not None:
        L, R = feasible.interval
        if L >= lo:
            lo, lo_closed = L, False
        if R <= hi:
            hi, hi_closed = R, False
    best, best_dist = None, -1.0
    for p_lo, p_hi, v in clf.pieces():
        if v == c or not analytic._intersects(lo, lo_closed, hi, hi_closed, p_lo, p_hi):
            continue
        a, a_closed = (p_lo, True) if p_lo > lo else (lo, lo_closed)
        b, b_closed = (hi, hi_closed) if p_hi > hi else (p_hi, False)
        ends = [e for e, closed in ((a, a_closed), (b, b_closed)) if closed]
        cand = ends or [0.5 * (a + b)]
        for e in cand:
            if abs(e - x) > best_dist:
                best, best_dist = e, abs(e - x)
    if best is None:
        return SearchResult(feasible.center.copy(), False, 0)
    return SearchResult(np.array([best]), True, 1)


def _pgd_search(classifier, feasible: FeasibleSet, c: int, attack: AttackConfig,
                rng: np.random.Generator) -> SearchResult:
    x, eps, metric = feasible.center, feasible.eps, feasible.metric
    explored = []

    def project(y):
        if feasible.anchor is not None:
            return project_ball_then_voronoi(y, feasible.anchor, eps, feasible.query,
                                             attack.alternations).point
        return project_ball(y, x, eps, metric)

    def random_start():
        u = sphere_directions(x.size, metric, 1, int(rng.integers(2 ** 31)))[0] if x.size > 3 \
            else rng.normal(size=x.size)
        u = u / float(metric.norm(u))
        return x + u * eps * rng.uniform()

    if not classifier.has_scores:
        # hard labels give no gradient: random feasibility search
        n = attack.pgd_steps * attack.pgd_restarts
        P = np.array([project(random_start()) for _ in range(n)])
        explored.append(P)
    else:
        h = attack.fd_step * eps
        alpha = attack.pgd_step_fraction * eps
        E = np.eye(x.size) * h
        for _ in range(attack.pgd_restarts):
            y = project(random_start())
            path = [y]
            for _ in range(attack.pgd_steps):
                f = _surrogate(classifier, np.vstack([y + E, y - E]), c)
                g = (f[:x.size] - f[x.size:]) / (2.0 * h)
                if not np.any(g):
                    g = rng.normal(size=x.size)
                if metric is MetricKind.LINF:
                    step = np.sign(g)
                elif metric is MetricKind.L1:
                    step = np.zeros_like(g)
                    k = int(np.argmax(np.abs(g)))
                    step[k] = np.sign(g[k])
                else:
                    step = g / np.linalg.norm(g)
                y = project(y + alpha * step)
                path.append(y)
            explored.append(np.array(path))
    P = np.vstack([x[None, :], *explored])
    P = P[feasible.contains(P)]
    if P.shape[0] == 0:
        return SearchResult(x.copy(), False, 0)
    wrong = _wrong(classifier, P, c, attack.tie_policy)
    return SearchResult(_pick(classifier, P, wrong, c, x, metric), bool(wrong.any()), P.shape[0])


def worst_case_search(classifier: Classifier, x, c_x: int, feasible: FeasibleSet,
                      attack: AttackConfig = AttackConfig(), rng=None) -> SearchResult:
    """Search ``feasible`` for a point the classifier labels differently from ``c_x``.

    ``misclassified`` is true iff some explored feasible point flips the
    prediction.  ``x_star`` maximises the negative-margin surrogate for
    score classifiers; for hard classifiers it is the flipping point
    farthest from ``x`` (or ``x`` itself when nothing flips).
    """
    x = as_point(x)
    if feasible.eps == 0.0:
        wrong = bool(_wrong(classifier, x[None, :], c_x, attack.tie_policy)[0])
        return SearchResult(x.copy(), wrong, 1)
    if attack.mode is AttackMode.ANALYTIC_1D:
        if not isinstance(classifier, StepClassifier) or x.size != 1:
            raise ValueError("analytic search needs a step classifier on 1-D inputs")
        return _analytic_search(classifier, feasible, c_x)
    if attack.mode is AttackMode.PGD and feasible.norm_mode is NormMode.MAX:
        rng = rng if rng is not None else np.random.default_rng(attack.seed)
        return _pgd_search(classifier, feasible, c_x, attack, rng)
    P = feasible.candidates(attack)
    P = P[feasible.contains(P)]
    if P.shape[0] == 0:
        return SearchResult(x.copy(), False, 0)
    wrong = _wrong(classifier, P, c_x, attack.tie_policy)
    return SearchResult(_pick(classifier, P, wrong, c_x, x, feasible.metric),
                        bool(wrong.any()), P.shape[0])


# --------------------------------------------------------------------------
# accuracy measures


def _toy(dataset):
    return analytic.ToyProblem.from_dataset(dataset)


def _finite_query(dataset, metric: MetricKind, attack: AttackConfig) -> VoronoiQuery:
    return VoronoiQuery(FiniteClosure(dataset.points), metric, attack.vb_tolerance)


def _check_analytic(classifier, dataset):
    if not isinstance(classifier, StepClassifier) or not isinstance(dataset.region, IntervalClosure):
        raise ValueError("analytic mode needs a step classifier and an interval dataset")


def _parallel(fn, items, threads: int):
    threads = threads or kernels.default_threads()
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def plain_accuracy(classifier: Classifier, dataset, attack: AttackConfig = AttackConfig()) -> float:
    if attack.mode is AttackMode.ANALYTIC_1D:
        _check_analytic(classifier, dataset)
        return float(analytic.std_max(classifier, _toy(dataset), 0))
    if attack.tie_policy is TiePolicy.OPTIMISTIC and hasattr(classifier, "correct"):
        ok = classifier.correct(dataset.points, dataset.labels, attack.tie_policy)
    else:
        ok = classifier.predict(dataset.points) == dataset.labels
    return float(np.mean(ok))


def std_adv_acc(classifier: Classifier, dataset, eps: float, norm_mode=NormMode.MAX,
                attack: AttackConfig = AttackConfig(), metric=MetricKind.L2) -> float:
    """Fraction of samples whose worst case over the ball/sphere keeps the class."""
    norm_mode = NormMode.parse(norm_mode)
    metric = MetricKind.parse(metric)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if attack.mode is AttackMode.ANALYTIC_1D:
        _check_analytic(classifier, dataset)
        fn = analytic.std_max if norm_mode is NormMode.MAX else analytic.std_exact
        return float(fn(classifier, _toy(dataset), eps))

    def one(i):
        fs = FeasibleSet(dataset.points[i], eps, metric, norm_mode)
        rng = np.random.default_rng([attack.seed, i])
        return worst_case_search(classifier, dataset.points[i], int(dataset.labels[i]), fs,
                                 attack, rng).misclassified

    wrong = _parallel(one, range(len(dataset)), attack.threads)
    return float(np.mean(~np.asarray(wrong, dtype=bool)))


@dataclass(frozen=True)
class GenuineRegionSample:
    epsilon: float
    base_point: np.ndarray
    candidate: np.ndarray


class SExactSet(NamedTuple):
    """Base points admitting an exact genuine perturbation.

    ``indices`` refer to ``dataset.points`` in finite mode; in 1-D
    analytic mode ``points`` holds closure points (endpoints) and
    ``indices`` is ``None``.  At ``eps = 0`` the whole clean set is
    returned (``region`` carries the interval description when there
    is one).
    """

    points: np.ndarray
    labels: np.ndarray
    indices: np.ndarray | None
    candidates: list
    region: object = None


def s_exact_set(dataset, eps: float, metric=MetricKind.L2,
                attack: AttackConfig = AttackConfig()) -> SExactSet:
    metric = MetricKind.parse(metric)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return SExactSet(dataset.points, dataset.labels, np.arange(len(dataset)),
                         [dataset.points[i:i + 1] for i in range(len(dataset))], dataset.region)
    if attack.mode is AttackMode.ANALYTIC_1D:
        if not isinstance(dataset.region, IntervalClosure):
            raise ValueError("analytic mode needs an interval dataset")
        members = analytic.s_exact(_toy(dataset), Fraction(eps))
        pts = np.array([[float(x)] for x, _, _ in members]).reshape(-1, 1)
        labs = np.array([c for _, c, _ in members], dtype=np.int64)
        cands = [np.array([[float(v)] for v in xs]) for _, _, xs in members]
        return SExactSet(pts, labs, None, cands)
    q = _finite_query(dataset, metric, attack)
    U = sphere_directions(dataset.dim, metric, attack.sphere_directions, attack.seed)
    idx, cands = [], []
    for i, x in enumerate(dataset.points):
        fs = FeasibleSet(x, eps, metric, NormMode.EXACT, query=q, genuine_exact=True)
        P = x + eps * U
        P = P[fs.contains(P)]
        if P.shape[0]:
            idx.append(i)
            cands.append(P)
    idx = np.array(idx, dtype=np.int64)
    return SExactSet(dataset.points[idx], dataset.labels[idx], idx, cands)


def genuine_adv_acc_exact(classifier: Classifier, dataset, eps: float,
                          attack: AttackConfig = AttackConfig(), metric=MetricKind.L2) -> float:
    """Mean worst-case correctness over ``S_exact(eps)``; raises when it is empty."""
    metric = MetricKind.parse(metric)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if attack.mode is AttackMode.ANALYTIC_1D:
        _check_analytic(classifier, dataset)
        return float(analytic.gen_exact(classifier, _toy(dataset), eps))
    if eps == 0:
        return plain_accuracy(classifier, dataset, attack)
    s = s_exact_set(dataset, eps, metric, attack)
    if s.points.shape[0] == 0:
        raise UndefinedAccuracy(f"S_exact is empty at eps={eps}")
    wrong = [bool(_wrong(classifier, P, int(c), attack.tie_policy).any())
             for P, c in zip(s.candidates, s.labels)]
    return float(np.mean(~np.asarray(wrong, dtype=bool)))


def genuine_adv_acc_max(classifier: Classifier, dataset, eps: float,
                        attack: AttackConfig = AttackConfig(), metric=MetricKind.L2) -> float:
    """Worst case over ``Ball(x, eps)`` restricted to the sample's Voronoi cell."""
    metric = MetricKind.parse(metric)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if attack.voronoi_mode is VoronoiMode.CLASS_REGION:
        if not isinstance(dataset.region, IntervalClosure):
            raise NotImplementedError("class-region cells are implemented for 1-D interval datasets")
        if attack.mode is AttackMode.ANALYTIC_1D:
            _check_analytic(classifier, dataset)
            return float(analytic.gen_max_class_region(classifier, _toy(dataset), eps))
        return _class_region_search(classifier, dataset, eps, attack)
    if attack.mode is AttackMode.ANALYTIC_1D:
        raise ValueError("point cells of a continuous set are single points; use CLASS_REGION")
    q = _finite_query(dataset, metric, attack)

    def one(i):
        fs = FeasibleSet(dataset.points[i], eps, metric, NormMode.MAX, query=q, anchor=i)
        rng = np.random.default_rng([attack.seed, i])
        return worst_case_search(classifier, dataset.points[i], int(dataset.labels[i]), fs,
                                 attack, rng).misclassified

    wrong = _parallel(one, range(len(dataset)), attack.threads)
    return float(np.mean(~np.asarray(wrong, dtype=bool)))


def class_region_interval(dataset, x: float) -> tuple[float, float]:
    """Open class-region cell (1-D interval datasets) containing ``x``."""
    toy = _toy(dataset)
    for seg, (L, R) in zip(toy.segments, toy._cells):
        if seg.lo <= Fraction(x) <= seg.hi:
            return float(L), float(R)
    raise ValueError("x is not in the closure")


def _class_region_search(classifier, dataset, eps, attack) -> float:
    # numeric search on the discretised samples, class-region cells
    def one(i):
        x = float(dataset.points[i, 0])
        fs = FeasibleSet(dataset.points[i], eps, MetricKind.L2, NormMode.MAX,
                         interval=class_region_interval(dataset, x))
        return worst_case_search(classifier, dataset.points[i], int(dataset.labels[i]), fs,
                                 attack).misclassified

    wrong = [one(i) for i in range(len(dataset))]
    return float(np.mean(~np.asarray(wrong, dtype=bool)))


# --------------------------------------------------------------------------
# curves


def default_epsilons(dataset, metric=MetricKind.L2, n: int = 128) -> np.ndarray:
    """``n`` uniform radii over ``[0, diameter]``."""
    metric = MetricKind.parse(metric)
    try:
        diam = dataset.closure.diameter(metric)
    except NotImplementedError:
        diam = FiniteClosure(dataset.points).diameter(metric)
    return np.linspace(0.0, diam, n)


def break_radii(classifier: Classifier, dataset, eps_max: float, metric=MetricKind.L2,
                attack: AttackConfig = AttackConfig(), genuine: bool = True,
                chunk: int = 1 << 18) -> np.ndarray:
    """Smallest lattice radius at which each sample can be flipped.

    One lattice of ``Ball(x, eps_max)`` per sample is shared by every
    smaller radius, since the feasible sets are nested in ``eps``.  The
    accuracy at ``eps`` is the fraction of samples whose radius exceeds
    ``eps``.  Infinite radius means no flip was found.
    """
    metric = MetricKind.parse(metric)
    if eps_max == 0.0:
        O = np.zeros((1, dataset.dim))
    else:
        O = ball_lattice(dataset.dim, metric, attack.grid_resolution) * eps_max
    r = metric.norm(O, axis=1)
    q = _finite_query(dataset, metric, attack) if genuine else None

    def one(i):
        x, c = dataset.points[i], int(dataset.labels[i])
        for s in range(0, O.shape[0], chunk):
            P = x + O[s:s + chunk]
            wrong = _wrong(classifier, P, c, attack.tie_policy)
            if genuine and wrong.any():
                wrong[wrong] = q.in_cell(P[wrong], i)
            if wrong.any():
                return float(r[s:s + chunk][wrong].min())
        return math.inf

    return np.array(_parallel(one, range(len(dataset)), attack.threads))


def accuracy_curve(evaluator, classifier: Classifier, dataset, epsilons: Sequence[float] | None = None,
                   attack: AttackConfig = AttackConfig(), metric=MetricKind.L2,
                   shared_lattice: bool = True) -> AccuracyCurve:
    """Accuracy at each radius.  Radii where the exact genuine measure is
    undefined are dropped from the curve.

    Max-norm grid curves on finite data search one lattice per sample.
    With ``shared_lattice`` it is laid over the largest ball and reused
    (restricted) for every smaller radius; otherwise each radius gets a
    dedicated lattice at the full resolution, at proportionally higher cost.
    """
    ev = Evaluator.parse(evaluator)
    metric = MetricKind.parse(metric)
    meta = {"attack": attack.to_dict(), "metric": metric.name, "seed": attack.seed,
            "dataset": getattr(dataset, "name", "dataset")}
    name = getattr(classifier, "name", type(classifier).__name__)
    if attack.mode is AttackMode.ANALYTIC_1D and epsilons is None:
        _check_analytic(classifier, dataset)
        pts = analytic.analytic_curve(ev, classifier, _toy(dataset))
        return AccuracyCurve([float(e) for e, _ in pts], [float(a) for _, a in pts],
                             ev.value, name, meta)
    eps = np.asarray(default_epsilons(dataset, metric) if epsilons is None else epsilons, dtype=float)
    if ev in (Evaluator.STD_MAX, Evaluator.GEN_MAX) and attack.mode is AttackMode.GRID_EXHAUSTIVE \
            and attack.voronoi_mode is VoronoiMode.POINT_CELL and dataset.region is None:
        genuine = ev is Evaluator.GEN_MAX
        meta["shared_lattice"] = shared_lattice
        if shared_lattice:
            radii = break_radii(classifier, dataset, float(eps.max()), metric, attack, genuine)
            acc = [float(np.mean(radii > e)) for e in eps]
        else:
            acc = [float(np.mean(np.isinf(break_radii(classifier, dataset, float(e), metric,
                                                      attack, genuine)))) for e in eps]
        return AccuracyCurve(eps, acc, ev.value, name, meta)
    out_e, out_a = [], []
    for e in eps:
        try:
            if ev is Evaluator.STD_MAX:
                a = std_adv_acc(classifier, dataset, e, NormMode.MAX, attack, metric)
            elif ev is Evaluator.STD_EXACT:
                a = std_adv_acc(classifier, dataset, e, NormMode.EXACT, attack, metric)
            elif ev is Evaluator.GEN_MAX:
                a = genuine_adv_acc_max(classifier, dataset, e, attack, metric)
            else:
                a = genuine_adv_acc_exact(classifier, dataset, e, attack, metric)
        except UndefinedAccuracy:
            log.info("%s undefined at eps=%g; skipped", ev.value, e)
            continue
        out_e.append(float(e))
        out_a.append(a)
    return AccuracyCurve(out_e, out_a, ev.value, name, meta)


def genuine_region_samples(dataset, eps: float, n: int, metric=MetricKind.L2,
                           attack: AttackConfig = AttackConfig()) -> list[GenuineRegionSample]:
    """Up to ``n`` (base, candidate) pairs from the exact genuine regions."""
    s = s_exact_set(dataset, eps, metric, attack)
    out = []
    for x, P in zip(s.points, s.candidates):
        for p in P:
            out.append(GenuineRegionSample(float(eps), x, p))
            if len(out) >= n:
                return out
    return out
