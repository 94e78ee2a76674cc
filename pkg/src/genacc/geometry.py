"""Metrics, Voronoi predicates and the constrained projections.

Closures
--------
A *closure* is the topological closure of the clean input set.  Three
kinds are supported:

``FiniteClosure``
    a finite point set (any dimension, any metric);
``IntervalClosure``
    a finite union of labelled intervals on the real line;
``SunsetClosure``
    the circle of radius 1 centred at ``(0, 1)`` plus the segment
    ``x2 = 0, |x1| <= R`` (Euclidean metric only).

All closures answer one vectorised question, :meth:`nearest_pair`:
the distance to the nearest closure point and the distance to the
best *distinct* competing minimiser.  A query lies on the Voronoi
boundary when those two distances agree within the query tolerance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels


class MetricKind(enum.Enum):
    L1 = 0
    L2 = 1
    LINF = 2

    @property
    def code(self) -> int:
        return self.value

    @classmethod
    def parse(cls, value: "MetricKind | str") -> "MetricKind":
        if isinstance(value, MetricKind):
            return value
        key = str(value).strip().upper().replace("_", "")
        aliases = {"L1": cls.L1, "L2": cls.L2, "LINF": cls.LINF, "INF": cls.LINF,
                   "MAX": cls.LINF, "EUCLIDEAN": cls.L2, "MANHATTAN": cls.L1}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown metric {value!r}") from None

    def norm(self, v: np.ndarray, axis: int = -1) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if self is MetricKind.L1:
            return np.abs(v).sum(axis=axis)
        if self is MetricKind.LINF:
            return np.abs(v).max(axis=axis)
        return np.sqrt((v * v).sum(axis=axis))


def as_point(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if p.ndim != 1:
        raise ValueError("a point must be a 1-D coordinate vector")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def distance(p, q, metric: MetricKind | str = MetricKind.L2) -> float:
    """Distance between two points under ``metric``."""
    p, q = as_point(p), as_point(q)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape[0]} vs {q.shape[0]}")
    return float(MetricKind.parse(metric).norm(p - q))


# --------------------------------------------------------------------------
# closures


class FiniteClosure:
    """A finite point set; its closure is itself."""

    def __init__(self, points):
        self.points = kernels.as_points(points)
        if self.points.shape[0] == 0:
            raise ValueError("empty dataset")
        # coincident points are one closure point
        self.sites = np.unique(self.points, axis=0)
        self.dim = self.points.shape[1]
        self._diam: dict[MetricKind, float] = {}

    # beyond this many sites the diameter is bounded by the bounding box
    EXACT_DIAMETER_LIMIT = 4096

    def diameter(self, metric: MetricKind) -> float:
        if metric not in self._diam:
            if self.sites.shape[0] > self.EXACT_DIAMETER_LIMIT:
                extent = self.sites.max(axis=0) - self.sites.min(axis=0)
                self._diam[metric] = float(metric.norm(extent))
                return self._diam[metric]
            best = 0.0
            for s in range(0, self.sites.shape[0], 1024):
                D = kernels.pairwise(self.sites[s:s + 1024], self.sites, metric.code)
                best = max(best, float(D.max()))
            self._diam[metric] = best
        return self._diam[metric]

    def site_of(self, point) -> int:
        hits = np.flatnonzero(np.all(self.sites == point, axis=1))
        if hits.size == 0:
            raise ValueError("not a dataset point")
        return int(hits[0])

    def nearest_pair(self, P: np.ndarray, metric: MetricKind):
        d1, _, d2 = kernels.nearest_two(P, self.sites, metric.code)
        return d1, d2


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    label: int


class IntervalClosure:
    """Union of closed intervals on the real line, one class label each.

    The clean set itself is the union of the half-open intervals
    ``[lo, hi)``; the closure adds the right endpoints.
    """

    dim = 1

    def __init__(self, intervals: Sequence[Interval]):
        if not intervals:
            raise ValueError("empty dataset")
        self.intervals = tuple(sorted(intervals, key=lambda iv: iv.lo))
        for a, b in zip(self.intervals, self.intervals[1:]):
            if b.lo < a.hi:
                raise ValueError("intervals must not overlap")
        self.lo = np.array([iv.lo for iv in self.intervals], dtype=np.float64)
        self.hi = np.array([iv.hi for iv in self.intervals], dtype=np.float64)

    def diameter(self, metric: MetricKind) -> float:
        return float(self.hi.max() - self.lo.min())

    def contains(self, x) -> bool:
        return any(iv.lo <= x <= iv.hi for iv in self.intervals)

    def class_at(self, x):
        for iv in self.intervals:
            if iv.lo <= x < iv.hi:
                return iv.label
        return None

    def nearest_pair(self, P: np.ndarray, metric: MetricKind):
        x = kernels.as_points(P)[:, 0]
        near = np.clip(x[:, None], self.lo[None, :], self.hi[None, :])
        d = np.abs(x[:, None] - near)
        k = d.argmin(axis=1)
        rows = np.arange(x.shape[0])
        d1 = d[rows, k]
        other = np.where(near != near[rows, k][:, None], d, np.inf)
        return d1, other.min(axis=1)


class SunsetClosure:
    """Unit circle centred at (0, 1) plus the segment x2 = 0, |x1| <= R."""

    dim = 2
    center = np.array([0.0, 1.0])

    def __init__(self, line_extent: float = 3.0):
        if line_extent <= 0:
            raise ValueError("line_extent must be positive")
        self.R = float(line_extent)

    def diameter(self, metric: MetricKind) -> float:
        self._check(metric)
        return max(2.0 * self.R, math.hypot(self.R, 1.0) + 1.0)

    @staticmethod
    def _check(metric: MetricKind):
        if metric is not MetricKind.L2:
            raise NotImplementedError("the sunset closure is analytic for the L2 metric only")

    def nearest_pair(self, P: np.ndarray, metric: MetricKind):
        self._check(metric)
        P = kernels.as_points(P)
        v = P - self.center
        r = np.sqrt((v * v).sum(axis=1))
        d_circle = np.abs(r - 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            on_circle = self.center + v / r[:, None]
        on_line = np.column_stack([np.clip(P[:, 0], -self.R, self.R), np.zeros(len(P))])
        d_line = np.sqrt(((P - on_line) ** 2).sum(axis=1))
        d1 = np.minimum(d_circle, d_line)
        d2 = np.maximum(d_circle, d_line)
        # the two components touch at the origin: a shared minimiser is one point
        shared = np.sqrt(((on_circle - on_line) ** 2).sum(axis=1)) <= 1e-12
        d2 = np.where(shared, np.inf, d2)
        # at the centre every circle point is a minimiser
        centre = r == 0.0
        d2 = np.where(centre & (d_circle <= d_line), d_circle, d2)
        return d1, d2


def closure_of(source):
    """Closure for a dataset, a closure object or a raw point array."""
    if isinstance(source, (FiniteClosure, IntervalClosure, SunsetClosure)):
        return source
    closure = getattr(source, "closure", None)
    if closure is not None:
        return closure
    return FiniteClosure(source)


# --------------------------------------------------------------------------
# Voronoi queries

DEFAULT_VB_TOLERANCE = 1e-9


class VoronoiQuery:
    """Point-local Voronoi predicates over a dataset's closure.

    ``vb_tolerance`` is relative to the closure diameter; ``tol`` is the
    resulting absolute width used by every predicate.
    """

    def __init__(self, dataset, metric: MetricKind | str = MetricKind.L2,
                 vb_tolerance: float = DEFAULT_VB_TOLERANCE):
        if not vb_tolerance > 0:
            raise ValueError("vb_tolerance must be positive")
        self.dataset = dataset
        self.metric = MetricKind.parse(metric)
        self.closure = closure_of(dataset)
        self.vb_tolerance = float(vb_tolerance)
        self.tol = self.vb_tolerance * self.closure.diameter(self.metric)

    @property
    def points(self) -> np.ndarray:
        if not isinstance(self.closure, FiniteClosure):
            raise TypeError("point-cell operations need a finite dataset")
        return self.closure.points

    def nearest_distance(self, P) -> np.ndarray:
        return self.closure.nearest_pair(kernels.as_points(P), self.metric)[0]

    def on_boundary(self, P) -> np.ndarray:
        d1, d2 = self.closure.nearest_pair(kernels.as_points(P), self.metric)
        return d2 - d1 <= self.tol

    def previously_allowed(self, P, eps: float) -> np.ndarray:
        d1, d2 = self.closure.nearest_pair(kernels.as_points(P), self.metric)
        return (d1 < eps - self.tol) & (d2 - d1 > self.tol)

    def in_cell(self, P, anchor: int) -> np.ndarray:
        """Strict membership of ``Vor(points[anchor]) - VB``."""
        P = kernels.as_points(P)
        closure = self.closure
        self.points  # finite datasets only
        site = closure.site_of(closure.points[anchor])
        if closure.sites.shape[0] == 1:
            return np.ones(P.shape[0], dtype=bool)
        d1, idx, d2 = kernels.nearest_two(P, closure.sites, self.metric.code)
        # a rival tied with the anchor gives d2 == d1, so the first-minimum
        # index choice does not matter
        return (idx == site) & (d2 - d1 > self.tol)


def nearest_clean(p, q: VoronoiQuery) -> tuple[frozenset[int], float]:
    """Indices of every dataset point within tolerance of the nearest one."""
    p = as_point(p)
    pts = q.points
    if pts.shape[1] != p.shape[0]:
        raise ValueError("dimension mismatch")
    d = kernels.pairwise(p[None, :], pts, q.metric.code)[0]
    dmin = float(d.min())
    return frozenset(int(i) for i in np.flatnonzero(d - dmin <= q.tol)), dmin


def is_on_voronoi_boundary(p, q: VoronoiQuery) -> bool:
    return bool(q.on_boundary(as_point(p)[None, :])[0])


def in_previously_allowed_region(p, eps: float, q: VoronoiQuery) -> bool:
    """Membership of the previously allowed perturbation region for ``eps``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return bool(q.previously_allowed(as_point(p)[None, :], eps)[0])


# --------------------------------------------------------------------------
# projections


def _project_l1_ball(v: np.ndarray, eps: float) -> np.ndarray:
    # sort-based Euclidean projection onto the l1 ball
    a = np.abs(v)
    if a.sum() <= eps:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = np.flatnonzero(u - (css - eps) / j > 0)[-1]
    theta = (css[rho] - eps) / (rho + 1)
    w = np.sign(v) * np.maximum(a - theta, 0.0)
    s = np.abs(w).sum()
    if s > eps:
        w *= eps / s
    return w


def project_ball(p, center, eps: float, metric: MetricKind | str) -> np.ndarray:
    """Projection onto ``Ball(center, eps)`` under ``metric``."""
    metric = MetricKind.parse(metric)
    p, center = as_point(p), as_point(center)
    v = p - center
    n = float(metric.norm(v))
    if n <= eps:
        return p.copy()
    if metric is MetricKind.L2:
        return center + v * (eps / n)
    if metric is MetricKind.LINF:
        return center + np.clip(v, -eps, eps)
    return center + _project_l1_ball(v, eps)


class Projection(NamedTuple):
    point: np.ndarray
    feasible: bool


def _bisect_toward(anchor: np.ndarray, start: np.ndarray, inside, iters: int = 64) -> np.ndarray:
    # cells are star-shaped about their site and the strict margin only grows
    # toward it, so membership along the segment is monotone
    lo, hi = 0.0, 1.0
    v = start - anchor
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if inside(anchor + mid * v):
            lo = mid
        else:
            hi = mid
    return anchor + lo * v


def project_cell(p, anchor: int, q: VoronoiQuery, max_sweeps: int = 50) -> np.ndarray:
    """Move ``p`` strictly inside ``Vor(points[anchor])``, off the boundary."""
    p = as_point(p)
    pts = q.points
    a = pts[anchor]

    def inside(y):
        return bool(q.in_cell(y[None, :], anchor)[0])

    if inside(p):
        return p.copy()
    y = p.copy()
    if q.metric is MetricKind.L2:
        rivals = pts[np.any(pts != a, axis=1)]
        normals = rivals - a
        lengths = np.sqrt((normals * normals).sum(axis=1))
        offsets = 0.5 * ((rivals * rivals).sum(axis=1) - a @ a) - q.tol * lengths
        for _ in range(max_sweeps):
            viol = normals @ y - offsets
            if viol.max() <= 0.0:
                break
            for k in np.flatnonzero(viol > 0.0):
                excess = normals[k] @ y - offsets[k]
                if excess > 0.0:
                    y = y - normals[k] * (excess / (lengths[k] ** 2))
        if inside(y):
            return y
    return _bisect_toward(a, y, inside)


def project_ball_then_voronoi(p, anchor, eps: float, q: VoronoiQuery,
                              alternations: int = 1) -> Projection:
    """Ball projection followed by the Voronoi-cell projection.

    ``anchor`` is a dataset index (or a point equal to a dataset point).
    One alternation is the default; more alternations repeat the pair.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if alternations < 1:
        raise ValueError("alternations must be >= 1")
    pts = q.points
    if isinstance(anchor, (int, np.integer)):
        idx = int(anchor)
    else:
        hits = np.flatnonzero(np.all(pts == as_point(anchor), axis=1))
        if hits.size == 0:
            raise ValueError("anchor must be a dataset point")
        idx = int(hits[0])
    center = pts[idx]
    y = as_point(p)
    for _ in range(alternations):
        y = project_ball(y, center, eps, q.metric)
        y = project_cell(y, idx, q)
    ok = float(q.metric.norm(y - center)) <= eps + 1e-9 and bool(q.in_cell(y[None, :], idx)[0])
    return Projection(y, ok)
