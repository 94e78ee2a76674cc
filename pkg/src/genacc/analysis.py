"""Nearest-neighbour distance statistics, leave-one-out accuracy and histograms.

Two engines compute the same per-sample triple ``(d_diff, d_same_min,
d_same_max)``:

``NAIVE``
    one full distance row per sample in plain numpy; the oracle.
``BLOCKED``
    a symmetric tile loop over the compiled kernels (or their numpy
    twins).  L2 tiles use the Gram expansion with a direct re-check of
    entries where cancellation could matter.  Each finished row block
    can be checkpointed, so long runs resume where they stopped.

When a dataset carries its raw integer pixels, distances are computed
on those (exact in float64) and divided by the pixel scale afterwards.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .classifiers import TiePolicy
from .geometry import DEFAULT_VB_TOLERANCE, MetricKind

log = logging.getLogger(__name__)


class Engine(enum.Enum):
    NAIVE = "naive"
    BLOCKED = "blocked"

    @classmethod
    def parse(cls, value):
        return value if isinstance(value, cls) else cls(str(value).lower())


@dataclass
class DistanceStats:
    labels: np.ndarray
    d_diff: np.ndarray
    d_same_min: np.ndarray
    d_same_max: np.ndarray
    diameter: float
    metric: MetricKind
    singleton: np.ndarray = field(init=False)

    def __post_init__(self):
        self.singleton = ~np.isfinite(self.d_same_min)
        # a lone sample of its class has no same-class neighbour at all
        self.d_same_max = np.where(self.singleton, np.inf, self.d_same_max)

    def __len__(self):
        return self.labels.size

    @property
    def tol(self) -> float:
        return DEFAULT_VB_TOLERANCE * self.diameter

    @staticmethod
    def _ratio(d_diff, d_same):
        with np.errstate(invalid="ignore", divide="ignore"):
            r = d_diff / (d_same + d_diff)
        r = np.where(np.isinf(d_same) & np.isfinite(d_diff), 0.0, r)
        r = np.where(np.isinf(d_diff) & np.isfinite(d_same), 1.0, r)
        # two coincident same-class points and a zero cross distance: 0/0
        return np.where(np.isnan(r), 0.0, r)

    @property
    def ratio_min(self) -> np.ndarray:
        return self._ratio(self.d_diff, self.d_same_min)

    @property
    def ratio_max(self) -> np.ndarray:
        return self._ratio(self.d_diff, self.d_same_max)

    def to_csv(self) -> str:
        lines = ["index,label,d_diff,d_same_min,d_same_max,ratio_min,ratio_max"]
        rmin, rmax = self.ratio_min, self.ratio_max
        for i in range(len(self)):
            vals = (self.d_diff[i], self.d_same_min[i], self.d_same_max[i], rmin[i], rmax[i])
            lines.append(f"{i},{int(self.labels[i])}," + ",".join(f"{v:.17g}" for v in vals))
        return "\n".join(lines) + "\n"


def _working_points(dataset, use_raw: bool):
    raw = dataset.integer_points() if use_raw else None
    if raw is not None and dataset.raw_divisor:
        return np.ascontiguousarray(raw), float(dataset.raw_divisor)
    return dataset.points, 1.0


def _naive(X, labels, metric: MetricKind):
    n = X.shape[0]
    d_diff = np.full(n, np.inf)
    smin = np.full(n, np.inf)
    smax = np.full(n, -np.inf)
    far = 0.0
    for i in range(n):
        d = metric.norm(X - X[i], axis=1)
        d[i] = np.nan
        same = labels == labels[i]
        same[i] = False
        diff = labels != labels[i]
        if diff.any():
            d_diff[i] = d[diff].min()
        if same.any():
            smin[i] = d[same].min()
            smax[i] = d[same].max()
        if n > 1:
            far = max(far, float(np.nanmax(d)))
    return d_diff, smin, smax, far


def _l2_tile(A, B, na, nb):
    sq = na[:, None] + nb[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    # cancellation guard: recompute entries small relative to the norms
    risky = sq < 1e-4 * (na[:, None] + nb[None, :])
    D = np.sqrt(sq)
    if risky.any():
        ri, ci = np.nonzero(risky)
        diff = A[ri] - B[ci]
        D[ri, ci] = np.sqrt((diff * diff).sum(axis=1))
    return D


class _Checkpoint:
    def __init__(self, path, key: dict):
        self.path = Path(path) if path else None
        self.key = json.dumps(key, sort_keys=True)

    def load(self, arrays):
        if self.path is None or not self.path.exists():
            return 0
        with np.load(self.path) as z:
            if str(z["key"]) != self.key:
                log.warning("checkpoint %s belongs to another run; ignoring it", self.path)
                return 0
            for name, arr in arrays.items():
                arr[:] = z[name]
            start = int(z["next_row"])
        log.info("resuming from checkpoint %s at row %d", self.path, start)
        return start

    def save(self, arrays, next_row: int):
        if self.path is None:
            return
        tmp = self.path.with_name(self.path.name + ".tmp.npz")
        np.savez(tmp, key=np.array(self.key), next_row=np.array(next_row), **arrays)
        tmp.replace(self.path)


def _blocked(X, labels, metric: MetricKind, tile: int, backend, threads, checkpoint: _Checkpoint,
             progress: Callable[[int, int], None] | None):
    n = X.shape[0]
    state = {"d_diff": np.full(n, np.inf), "d_same_min": np.full(n, np.inf),
             "d_same_max": np.full(n, -np.inf), "d_far": np.full(n, -np.inf)}
    start = checkpoint.load(state)
    sqn = (X * X).sum(axis=1) if metric is MetricKind.L2 else None
    threads = threads or kernels.default_threads()
    args = (state["d_diff"], state["d_same_min"], state["d_same_max"], state["d_far"])
    for i0 in range(start, n, tile):
        A = X[i0:i0 + tile]
        la = labels[i0:i0 + tile]
        for j0 in range(i0, n, tile):
            B = X[j0:j0 + tile]
            lb = labels[j0:j0 + tile]
            if metric is MetricKind.L2:
                D = _l2_tile(A, B, sqn[i0:i0 + tile], sqn[j0:j0 + tile])
            else:
                D = kernels.pairwise(A, B, metric.code, backend=backend, num_threads=threads)
            kernels.reduce_tile(D, la, lb, i0, j0, *args, backend=backend, num_threads=threads)
            if j0 != i0:
                kernels.reduce_tile(D.T, lb, la, j0, i0, *args, backend=backend, num_threads=threads)
        next_row = min(n, i0 + tile)
        checkpoint.save(state, next_row)
        if progress is not None:
            progress(next_row, n)
    far = float(state["d_far"].max()) if n > 1 else 0.0
    return state["d_diff"], state["d_same_min"], state["d_same_max"], far


def distance_stats(dataset, metric=MetricKind.L2, engine=Engine.BLOCKED, tile: int = 256,
                   backend: str | None = None, threads: int | None = None,
                   checkpoint=None, use_raw: bool = True,
                   progress: Callable[[int, int], None] | None = None) -> DistanceStats:
    """Per-sample nearest other-class and nearest/farthest same-class distances."""
    metric = MetricKind.parse(metric)
    engine = Engine.parse(engine)
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if tile < 1:
        raise ValueError("tile must be >= 1")
    X, scale = _working_points(dataset, use_raw)
    labels = np.ascontiguousarray(dataset.labels, dtype=np.int64)
    t0 = time.perf_counter()
    if engine is Engine.NAIVE:
        out = _naive(X, labels, metric)
    else:
        ck = _Checkpoint(checkpoint, {"digest": dataset.digest(), "metric": metric.name,
                                      "tile": tile, "raw": scale != 1.0})
        out = _blocked(X, labels, metric, tile, backend, threads, ck, progress)
    d_diff, smin, smax, far = out
    log.info("%s distance stats (%s, n=%d) in %.2fs", engine.value, metric.name, len(dataset),
             time.perf_counter() - t0)
    return DistanceStats(dataset.labels.copy(), d_diff / scale, smin / scale, smax / scale,
                         far / scale, metric)


def loo_cv_accuracy(stats: DistanceStats, tie_policy=TiePolicy.STRICT) -> float:
    """Leave-one-out 1-NN accuracy from the per-sample statistics."""
    policy = TiePolicy.parse(tie_policy)
    gap = stats.d_diff - stats.d_same_min
    if policy is TiePolicy.STRICT:
        ok = gap > stats.tol
    else:
        ok = -gap <= stats.tol
    return float(np.mean(ok))


class CrossEntropy(NamedTuple):
    mean_neg_log2_ratio_min: float
    mean_neg_log2_ratio_max: float
    excluded: int


def avg_cross_entropy(stats: DistanceStats) -> CrossEntropy:
    """Mean ``-log2`` of both ratios; zero-ratio samples are excluded and counted."""
    rmin, rmax = stats.ratio_min, stats.ratio_max
    keep = (rmin > 0) & (rmax > 0)
    if not keep.any():
        return CrossEntropy(math.nan, math.nan, int((~keep).sum()))
    return CrossEntropy(float(np.mean(-np.log2(rmin[keep]))),
                        float(np.mean(-np.log2(rmax[keep]))), int((~keep).sum()))


class Histogram(NamedTuple):
    edges: np.ndarray
    density: np.ndarray

    def to_csv(self) -> str:
        lines = ["bin_left,bin_right,density"]
        for a, b, v in zip(self.edges[:-1], self.edges[1:], self.density):
            lines.append(f"{a:.17g},{b:.17g},{v:.17g}")
        return "\n".join(lines) + "\n"

    def mass(self) -> float:
        return math.fsum(self.density * np.diff(self.edges))


def ratio_histograms(stats: DistanceStats, bins: int = 50) -> dict[str, Histogram]:
    """Density histograms of ``d_diff``, ``ratio_min`` and ``ratio_max``."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    out = {}
    for name, values in (("d_diff", stats.d_diff), ("ratio_min", stats.ratio_min),
                         ("ratio_max", stats.ratio_max)):
        v = values[np.isfinite(values)]
        if v.size == 0:
            v = np.zeros(1)
        density, edges = np.histogram(v, bins=bins, density=True)
        out[name] = Histogram(edges, density)
    return out


@dataclass
class AnalysisReport:
    stats: DistanceStats
    min_d_diff: float
    loo_strict: float
    loo_optimistic: float
    cross_entropy: CrossEntropy
    histograms: dict
    config: dict

    def summary(self) -> dict:
        return {
            "min_d_diff": self.min_d_diff,
            "min_d_diff_x255": self.min_d_diff * 255.0,
            "loo_strict": self.loo_strict,
            "loo_optimistic": self.loo_optimistic,
            "avg_neg_log2_ratio_min": self.cross_entropy.mean_neg_log2_ratio_min,
            "avg_neg_log2_ratio_max": self.cross_entropy.mean_neg_log2_ratio_max,
            "cross_entropy_excluded": self.cross_entropy.excluded,
            "singleton_samples": int(self.stats.singleton.sum()),
            "n": len(self.stats),
            "diameter": self.stats.diameter,
            "tie_tolerance": self.stats.tol,
        }

    def to_json(self) -> str:
        return json.dumps({**self.summary(), "config": self.config}, indent=2, sort_keys=True) + "\n"

    def write(self, outdir) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(self.to_json())
        (outdir / "stats.csv").write_text(self.stats.to_csv())
        for name, h in self.histograms.items():
            (outdir / f"hist_{name}.csv").write_text(h.to_csv())


def analyze(dataset, metric=MetricKind.L2, engine=Engine.BLOCKED, bins: int = 50, **kw) -> AnalysisReport:
    metric = MetricKind.parse(metric)
    stats = distance_stats(dataset, metric, engine, **kw)
    config = {"dataset": dataset.name, "digest": dataset.digest(), "metric": metric.name,
              "engine": Engine.parse(engine).value, "bins": bins, "n": len(dataset),
              "tile": kw.get("tile", 256)}
    return AnalysisReport(stats, float(stats.d_diff.min()),
                          loo_cv_accuracy(stats, TiePolicy.STRICT),
                          loo_cv_accuracy(stats, TiePolicy.OPTIMISTIC),
                          avg_cross_entropy(stats), ratio_histograms(stats, bins), config)
