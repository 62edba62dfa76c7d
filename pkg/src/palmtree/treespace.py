"""Membership tests for the metric hierarchy and tropical balls."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .topology import (
    UnrootedTopology,
    double_factorial,
    enumerate_rooted_topologies,
    enumerate_unrooted_topologies,
)
from .vectors import (
    ProjectivePoint,
    as_metric_vector,
    as_projective,
    attained_twice,
    quadruple_pair_indices,
    resolve_tol,
    triple_pair_indices,
)

__all__ = [
    "Level",
    "ValidationReport",
    "TropicalBall",
    "classify_level",
    "check_metric",
    "metric_report",
    "check_four_point",
    "check_three_point",
    "ball_contains",
    "ball_containment_check",
    "enumerate_rooted_topologies",
    "enumerate_unrooted_topologies",
    "UnrootedTopology",
    "double_factorial",
]


class Level(enum.IntEnum):
    NOT_DISSIMILARITY = 0
    DISSIMILARITY = 1
    METRIC = 2
    TREE_METRIC = 3
    TREE_ULTRAMETRIC = 4


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of one condition check.

    `level` is the full classification of the vector, `ok` whether the
    checked condition holds, `witnesses` the violating leaf tuples (1-based)
    followed by the values involved.
    """

    level: Level
    ok: bool
    condition: str
    witnesses: list = field(default_factory=list)


def _triangle_violations(w, tol: float) -> list:
    m = w.matrix()
    n = w.n_leaves
    out = []
    for i, j in combinations(range(n), 2):
        for k in range(n):
            if k in (i, j):
                continue
            rhs = m[i, k] + m[k, j]
            if m[i, j] > rhs + tol * max(1.0, abs(m[i, j])):
                out.append(((i + 1, j + 1, k + 1), float(m[i, j]), float(rhs)))
    return out


def _maxplus_square_identity(w, tol: float) -> bool:
    """Does -W (max,+) -W equal -W?  Equivalent to the triangle inequality."""
    neg = -w.matrix()
    prod = np.max(neg[:, :, None] + neg[None, :, :], axis=1)
    return bool(np.all(np.abs(prod - neg) <= tol * np.maximum(1.0, np.abs(neg))))


def check_metric(w, tol: float | None = None) -> bool:
    w = as_metric_vector(w)
    tol = resolve_tol(tol)
    if np.any(w.values < -tol):
        return False
    return _maxplus_square_identity(w, tol)


def _four_point_failures(w, tol: float) -> list:
    if w.n_leaves < 4:
        return []
    idx = quadruple_pair_indices(w.n_leaves)
    v = w.values[idx]
    sums = np.stack([v[:, 0] + v[:, 1], v[:, 2] + v[:, 3], v[:, 4] + v[:, 5]], axis=1)
    bad = np.nonzero(~attained_twice(sums, tol))[0]
    if not bad.size:
        return []
    quads = list(combinations(range(1, w.n_leaves + 1), 4))
    return [(quads[k], tuple(float(s) for s in sums[k])) for k in bad]


def _three_point_failures(w, tol: float) -> list:
    if w.n_leaves < 3:
        return []
    idx = triple_pair_indices(w.n_leaves)
    v = w.values[idx]
    bad = np.nonzero(~attained_twice(v, tol))[0]
    if not bad.size:
        return []
    triples = list(combinations(range(1, w.n_leaves + 1), 3))
    return [(triples[k], tuple(float(s) for s in v[k])) for k in bad]


def classify_level(w, tol: float | None = None) -> Level:
    """Highest level of the hierarchy whose conditions (and all below) hold."""
    w = as_metric_vector(w)
    tol = resolve_tol(tol)
    if np.any(w.values < -tol):
        return Level.NOT_DISSIMILARITY
    if not _maxplus_square_identity(w, tol):
        return Level.DISSIMILARITY
    if _four_point_failures(w, tol):
        return Level.METRIC
    if _three_point_failures(w, tol):
        return Level.TREE_METRIC
    return Level.TREE_ULTRAMETRIC


def metric_report(w, tol: float | None = None) -> ValidationReport:
    w = as_metric_vector(w)
    tol = resolve_tol(tol)
    negative = [
        (pair, float(x)) for pair, x in zip(combinations(range(1, w.n_leaves + 1), 2), w.values) if x < -tol
    ]
    if negative:
        return ValidationReport(Level.NOT_DISSIMILARITY, False, "metric", negative)
    bad = _triangle_violations(w, tol)
    return ValidationReport(classify_level(w, tol), not bad, "metric", bad)


def check_four_point(w, tol: float | None = None) -> ValidationReport:
    """Each quadruple's largest pairing sum must be attained at least twice.

    Witnesses are ((i,j,k,l), (w_ij+w_kl, w_ik+w_jl, w_il+w_jk)).
    """
    w = as_metric_vector(w)
    tol = resolve_tol(tol)
    bad = _four_point_failures(w, tol)
    return ValidationReport(classify_level(w, tol), not bad, "four-point", bad)


def check_three_point(w, tol: float | None = None) -> ValidationReport:
    """Each triple's largest distance must be attained at least twice.

    Witnesses are ((i,j,k), (w_ij, w_ik, w_jk)).
    """
    w = as_metric_vector(w)
    tol = resolve_tol(tol)
    bad = _three_point_failures(w, tol)
    if __debug__ and not bad:
        assert not _four_point_failures(w, tol), "three-point pass must imply four-point pass"
    return ValidationReport(classify_level(w, tol), not bad, "three-point", bad)


@dataclass(frozen=True)
class TropicalBall:
    center: ProjectivePoint
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_projective(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


def ball_contains(b: TropicalBall, y, tol: float | None = None) -> bool:
    """Open-ball membership via the explicit strict inequalities.

    In the chart x -> (x_2-x_1, ..., x_n-x_1) the ball is cut out by
    |y_i - x_i| < r and |(y_i - y_j) - (x_i - x_j)| < r.  Values within the
    tolerance of r count as outside.
    """
    y = as_projective(y)
    if y.dim != b.center.dim:
        raise ValueError(f"dimension mismatch: {y.dim} vs {b.center.dim}")
    limit = b.radius - resolve_tol(tol) * max(1.0, b.radius)
    d = y.reduced - b.center.reduced
    if np.any(np.abs(d) >= limit):
        return False
    return bool(np.all(np.abs(d[:, None] - d[None, :]) < limit))


def _trop_norm(d: np.ndarray) -> np.ndarray:
    """Tropical distance from the origin of reduced-chart rows."""
    return np.maximum(d.max(axis=-1), 0.0) - np.minimum(d.min(axis=-1), 0.0)


def ball_containment_check(
    x,
    r: float,
    samples: int = 10_000,
    seed: int = 0,
    trop_factor: float = 2.0,
    euclid_factor: float | None = None,
) -> bool:
    """Search for counterexamples to the two ball containments.

    Checks B(x, r) inside B_tr(x, trop_factor*r) and B_tr(x, r) inside
    B(x, euclid_factor*r), with Euclidean balls taken in the reduced chart
    R^{n-1} and euclid_factor defaulting to sqrt(n-1).  Half the samples of
    each kind are pushed to within 1% of the inner ball's boundary.
    """
    x = as_projective(x)
    dim = x.dim - 1
    if dim < 1 or not r > 0:
        raise ValueError("need n >= 2 and r > 0")
    if euclid_factor is None:
        euclid_factor = math.sqrt(dim)
    rng = np.random.default_rng(seed)
    half = samples // 2
    g = rng.standard_normal((samples, dim))
    scale = np.concatenate([rng.uniform(0.0, 1.0, samples - half), rng.uniform(0.99, 1.0, half)])

    # Euclidean sample -> tropical ball
    eu = g / np.linalg.norm(g, axis=1, keepdims=True) * (r * scale)[:, None]
    if np.any(_trop_norm(eu) >= trop_factor * r):
        return False
    # tropical sample -> Euclidean ball
    tn = _trop_norm(g)
    tr = g / tn[:, None] * (r * scale)[:, None]
    if np.any(np.linalg.norm(tr, axis=1) >= euclid_factor * r):
        return False
    return True
