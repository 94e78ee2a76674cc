"""Exact accuracy for step classifiers over unions of intervals.

Everything here runs in rational arithmetic: a float input is converted
with :class:`fractions.Fraction` (exactly), so measures and accuracies
come out as exact fractions.  The indicator "sample ``x`` survives at
radius ``eps``" is constant between a finite set of breakpoints, so the
measure over ``x`` is a finite sum over those pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .classifiers import StepClassifier
from .geometry import IntervalClosure
from .modes import Evaluator

INF = math.inf


class UndefinedAccuracy(ValueError):
    """The exact-norm genuine accuracy has no samples at this radius."""


def _q(v):
    return v if isinstance(v, Fraction) or v in (INF, -INF) else Fraction(v)


@dataclass(frozen=True)
class Segment:
    lo: Fraction
    hi: Fraction
    label: int


class ToyProblem:
    """A 1-D problem: labelled intervals plus class priors."""

    def __init__(self, closure: IntervalClosure, priors: dict[int, float] | None = None):
        self.segments = [Segment(_q(iv.lo), _q(iv.hi), int(iv.label)) for iv in closure.intervals]
        labels = sorted({s.label for s in self.segments})
        if priors is None:
            priors = {c: 1 for c in labels}
        total = sum(_q(priors[c]) for c in labels)
        self.priors = {c: _q(priors[c]) / total for c in labels}
        self.length = {c: sum(s.hi - s.lo for s in self.segments if s.label == c) for c in labels}
        if any(v <= 0 for v in self.length.values()):
            raise ValueError("every class needs positive length")
        self._cells = self._class_regions()

    @classmethod
    def from_dataset(cls, ds) -> "ToyProblem":
        if not isinstance(ds.region, IntervalClosure):
            raise TypeError("analytic evaluation needs an interval dataset")
        return cls(ds.region, ds.priors)

    def _class_regions(self):
        # open cell of each run of same-label segments, split at gap midpoints
        segs = self.segments
        cuts = [(a.hi + b.lo) / 2 for a, b in zip(segs, segs[1:])]
        bounds = [-INF, *cuts, INF]
        cells = []
        k = 0
        while k < len(segs):
            j = k
            while j + 1 < len(segs) and segs[j + 1].label == segs[k].label:
                j += 1
            cells.extend([(bounds[k], bounds[j + 1])] * (j - k + 1))
            k = j + 1
        return cells

    def weight(self, seg: Segment) -> Fraction:
        return self.priors[seg.label] / self.length[seg.label]

    def special_points(self, clf: StepClassifier):
        pts = set()
        for s in self.segments:
            pts.update((s.lo, s.hi))
        pts.update(_q(b) for b in clf.breakpoints)
        for lo, hi in self._cells:
            pts.update(v for v in (lo, hi) if v not in (INF, -INF))
        return sorted(pts)

    def nearest_distance(self, x: Fraction):
        """Distance to the closure and number of segments attaining it."""
        ds = [max(s.lo - x, x - s.hi, Fraction(0)) for s in self.segments]
        d1 = min(ds)
        return d1, sum(1 for d in ds if d == d1)


def _intersects(lo, lo_closed, hi, hi_closed, p_lo, p_hi) -> bool:
    # range [lo, hi] (closedness per flag) against the half-open piece [p_lo, p_hi)
    if p_lo > lo:
        a, a_closed = p_lo, True
    elif p_lo < lo:
        a, a_closed = lo, lo_closed
    else:
        a, a_closed = lo, lo_closed
    if p_hi < hi:
        b, b_closed = p_hi, False
    elif p_hi > hi:
        b, b_closed = hi, hi_closed
    else:
        b, b_closed = hi, False
    return a < b or (a == b and a_closed and b_closed)


def _all_equal(clf: StepClassifier, c: int, lo, lo_closed, hi, hi_closed) -> bool:
    pieces = clf.pieces()
    return all(v == c for p_lo, p_hi, v in pieces
               if _intersects(lo, lo_closed, hi, hi_closed, _q(p_lo), _q(p_hi)))


def _measure(seg: Segment, breaks, good: Callable[[Fraction], bool]) -> Fraction:
    ts = sorted({seg.lo, seg.hi, *(b for b in breaks if seg.lo < b < seg.hi)})
    return sum((b - a for a, b in zip(ts, ts[1:]) if good((a + b) / 2)), Fraction(0))


def _accuracy(toy: ToyProblem, clf: StepClassifier, eps: Fraction, extra_breaks, good) -> Fraction:
    total = Fraction(0)
    bps = [_q(b) for b in clf.breakpoints]
    for k, seg in enumerate(toy.segments):
        breaks = [b + s for b in bps for s in (-eps, Fraction(0), eps)]
        breaks.extend(extra_breaks(k))
        total += toy.weight(seg) * _measure(seg, breaks, lambda x: good(k, seg, x))
    return total


def std_max(clf: StepClassifier, toy: ToyProblem, eps) -> Fraction:
    eps = _check_eps(eps)
    return _accuracy(toy, clf, eps, lambda k: (),
                     lambda k, seg, x: _all_equal(clf, seg.label, x - eps, True, x + eps, True))


def std_exact(clf: StepClassifier, toy: ToyProblem, eps) -> Fraction:
    eps = _check_eps(eps)
    return _accuracy(toy, clf, eps, lambda k: (),
                     lambda k, seg, x: clf.value_at(x - eps) == seg.label
                     and clf.value_at(x + eps) == seg.label)


def gen_max_class_region(clf: StepClassifier, toy: ToyProblem, eps) -> Fraction:
    """Ball intersected with the open class-region cell containing the sample."""
    eps = _check_eps(eps)

    def extra(k):
        L, R = toy._cells[k]
        return [v for v in (L + eps, R - eps) if v not in (INF, -INF)]

    def good(k, seg, x):
        L, R = toy._cells[k]
        lo, lo_closed = (x - eps, True) if x - eps > L else (L, False)
        hi, hi_closed = (x + eps, True) if x + eps < R else (R, False)
        return _all_equal(clf, seg.label, lo, lo_closed, hi, hi_closed)

    return _accuracy(toy, clf, eps, extra, good)


def s_exact(toy: ToyProblem, eps):
    """Closure points with a non-empty exact genuine region.

    Returns ``[(x, label, [feasible perturbations])]``.  Only outward moves
    from segment endpoints can keep the closure distance equal to ``eps``.
    """
    eps = _check_eps(eps)
    if eps == 0:
        raise ValueError("the exact region is defined for eps > 0")
    out = {}
    for seg in toy.segments:
        for x, xp in ((seg.lo, seg.lo - eps), (seg.hi, seg.hi + eps)):
            d1, count = toy.nearest_distance(xp)
            if d1 == eps and count == 1:
                out.setdefault((x, seg.label), []).append(xp)
    return [(x, c, sorted(v)) for (x, c), v in sorted(out.items())]


def gen_exact(clf: StepClassifier, toy: ToyProblem, eps) -> Fraction:
    eps = _check_eps(eps)
    if eps == 0:
        return std_max(clf, toy, eps)
    members = s_exact(toy, eps)
    if not members:
        raise UndefinedAccuracy(f"no sample has an exact genuine perturbation at eps={eps}")
    good = sum(1 for x, c, xps in members if all(clf.value_at(xp) == c for xp in xps))
    return Fraction(good, len(members))


def _check_eps(eps) -> Fraction:
    eps = _q(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return eps


EVALUATORS = {
    Evaluator.STD_MAX: std_max,
    Evaluator.STD_EXACT: std_exact,
    Evaluator.GEN_MAX: gen_max_class_region,
    Evaluator.GEN_EXACT: gen_exact,
}


def accuracy(evaluator, clf: StepClassifier, toy: ToyProblem, eps) -> Fraction:
    return EVALUATORS[Evaluator.parse(evaluator)](clf, toy, eps)


def critical_epsilons(clf: StepClassifier, toy: ToyProblem, eps_max) -> list[Fraction]:
    """Radii where some curve may change slope or jump, plus midpoints between them."""
    eps_max = _q(eps_max)
    pts = toy.special_points(clf)
    cand = {Fraction(0), eps_max}
    for u in pts:
        for v in pts:
            for e in (abs(u - v), abs(u - v) / 2):
                if 0 < e < eps_max:
                    cand.add(e)
    cand = sorted(cand)
    mids = [(a + b) / 2 for a, b in zip(cand, cand[1:])]
    return sorted(set(cand) | set(mids))


def analytic_curve(evaluator, clf: StepClassifier, toy: ToyProblem, eps_max=Fraction(63, 10)):
    """Exact ``(eps, accuracy)`` pairs; undefined radii are skipped."""
    ev = Evaluator.parse(evaluator)
    out = []
    for e in critical_epsilons(clf, toy, eps_max):
        try:
            out.append((e, accuracy(ev, clf, toy, e)))
        except UndefinedAccuracy:
            continue
    return out
