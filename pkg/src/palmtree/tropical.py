"""Max-plus arithmetic, the tropical metric and tropical line segments."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .newick_io import ThreePointViolation, first_three_point_violation
from .topology import NestedSet, topology_of
from .vectors import MetricVector, ProjectivePoint, as_metric_vector, as_projective, raw_array, resolve_tol


def _same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")


def trop_dist(u, v) -> float:
    """max_i(u_i - v_i) - min_i(u_i - v_i); invariant under adding constants."""
    a, b = raw_array(u), raw_array(v)
    _same_dim(a, b)
    d = a - b
    return float(d.max() - d.min())


def maxplus(points: Sequence, coeffs: Sequence[float]) -> np.ndarray:
    """Coordinatewise max over k of coeffs[k] + points[k], unnormalised."""
    if len(points) == 0:
        raise ValueError("need at least one point")
    if len(points) != len(coeffs):
        raise ValueError("one coefficient per point")
    arr = np.stack([raw_array(p) for p in points])
    return np.max(arr + np.asarray(coeffs, dtype=float)[:, None], axis=0)


def trop_combine(points: Sequence, coeffs: Sequence[float]) -> ProjectivePoint:
    return ProjectivePoint(maxplus(points, coeffs))


def segment_point(x, y, lam: float) -> np.ndarray:
    """lam (.) x (+) y, the point of the segment with parameter lam."""
    a, b = raw_array(x), raw_array(y)
    _same_dim(a, b)
    return np.maximum(lam + a, b)


def distinct_sorted(values: np.ndarray, tol: float) -> np.ndarray:
    s = np.sort(np.asarray(values, dtype=float))
    keep = [s[0]]
    for v in s[1:]:
        if v - keep[-1] > tol * max(1.0, abs(v)):
            keep.append(v)
    return np.array(keep)


@dataclass(frozen=True, eq=False)
class Breakpoint:
    """One vertex of a traced segment.

    `raw` is lam (.) x (+) y as computed; `vector` is the representative
    reported for the trace (equal to `raw` unless a height cap rescaled it).
    """

    lam: float
    raw: np.ndarray
    vector: np.ndarray
    topology: NestedSet | None = None

    @property
    def point(self) -> ProjectivePoint:
        return ProjectivePoint(self.vector)

    @property
    def rescaled(self) -> bool:
        return not np.array_equal(self.raw, self.vector)


@dataclass(frozen=True, eq=False)
class SegmentTrace:
    """Breakpoints sorted by lam.  The first is y, the last a translate of x."""

    endpoints: tuple[ProjectivePoint, ProjectivePoint]
    breakpoints: tuple[Breakpoint, ...]

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([b.lam for b in self.breakpoints])

    @property
    def points(self) -> list[ProjectivePoint]:
        return [b.point for b in self.breakpoints]

    def __len__(self) -> int:
        return len(self.breakpoints)


def trop_segment(x, y, tol: float | None = None) -> SegmentTrace:
    """Vertices of the tropical segment between x and y.

    Parameters run over the distinct values of y - x (sorted once); the
    point for lam is max(lam + x, y).
    """
    a, b = raw_array(x), raw_array(y)
    _same_dim(a, b)
    lams = distinct_sorted(b - a, resolve_tol(tol))
    bps = []
    for lam in lams:
        p = np.maximum(lam + a, b)
        bps.append(Breakpoint(float(lam), p, p))
    return SegmentTrace((as_projective(a), as_projective(b)), tuple(bps))


def tropline_ultrametric(
    w1,
    w2,
    height_cap: float = 2.0,
    annotate: bool = True,
    tol: float | None = None,
) -> SegmentTrace:
    """Tropical segment between two ultrametrics with the height-cap rescale.

    For each distinct lam of w2 - w1 (ascending) the point is
    max(lam + w1, w2).  When a coordinate exceeds `height_cap`, the point
    is shifted down by max - height_cap; both raw and shifted vectors are
    kept.  The trace starts at w2 and ends at w1.
    """
    w1, w2 = as_metric_vector(w1), as_metric_vector(w2)
    if w1.n_leaves != w2.n_leaves:
        raise ValueError("leaf counts differ")
    for w in (w1, w2):
        bad = first_three_point_violation(w, tol)
        if bad is not None:
            raise ThreePointViolation(*bad)
    a, b = w1.values, w2.values
    lams = distinct_sorted(b - a, resolve_tol(tol))
    bps = []
    for lam in lams:
        raw = np.maximum(lam + a, b)
        top = raw.max()
        vec = raw - (top - height_cap) if top > height_cap else raw.copy()
        topo = topology_of(MetricVector(w1.n_leaves, vec), tol) if annotate else None
        bps.append(Breakpoint(float(lam), raw, vec, topo))
    return SegmentTrace((as_projective(w1), as_projective(w2)), tuple(bps))


def in_tropical_linear_space(w, tol: float | None = None) -> bool:
    """Tropical vanishing of the three-term relations for every triple.

    For each i<j<k the maximum of w_ij, w_ik, w_jk must be attained at
    least twice.  Written as a plain loop, independent of the vectorised
    three-point check.
    """
    w = as_metric_vector(w)
    tol = resolve_tol(tol)
    for i, j, k in combinations(range(1, w.n_leaves + 1), 3):
        terms = sorted((w[i, j], w[i, k], w[j, k]))
        if terms[2] - terms[1] > tol * max(1.0, abs(terms[2])):
            return False
    return True
