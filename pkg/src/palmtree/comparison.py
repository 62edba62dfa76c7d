"""Tree-to-tree distances: BHV, path difference, Robinson-Foulds, quartets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .newick_io import Tree, build_tree, cophenetic_vector, edge_count_vector
from .tropical import trop_dist
from .vectors import quadruple_pair_indices, resolve_tol


class BhvDistance(NamedTuple):
    value: float
    exact: bool


@dataclass(frozen=True)
class BhvDecomposition:
    """Edge-length differences of two trees read in one common orthant."""

    shared_splits: tuple[frozenset, ...]
    internal_diffs: np.ndarray
    pendant_diffs: np.ndarray

    @property
    def distance(self) -> float:
        return float(math.sqrt(np.sum(self.internal_diffs**2) + np.sum(self.pendant_diffs**2)))


@dataclass(frozen=True)
class StabilityReport:
    d_tr: float
    d_bhv: float
    exact: bool
    bound: float
    tight: bool

    @property
    def holds(self) -> bool:
        return self.d_tr <= self.bound + 1e-9


def _check_leaves(t1: Tree, t2: Tree):
    if t1.names != t2.names:
        raise ValueError(f"leaf sets differ: {t1.names} vs {t2.names}")


def _compatible(a: frozenset, b: frozenset) -> bool:
    # both sides omit leaf N, so compatibility reduces to nested-or-disjoint
    return a <= b or b <= a or not (a & b)


def _support(t: Tree, tol: float) -> tuple[dict, np.ndarray]:
    internal, pendant = t.split_lengths()
    return {s: x for s, x in internal.items() if x > tol}, pendant


def bhv_decomposition(t1: Tree, t2: Tree, tol: float | None = None) -> BhvDecomposition | None:
    """Common-orthant coordinates, or None when the split sets are incompatible."""
    _check_leaves(t1, t2)
    tol = resolve_tol(tol)
    x, px = _support(t1, tol)
    y, py = _support(t2, tol)
    keys = sorted(set(x) | set(y), key=lambda s: (len(s), sorted(s)))
    if not all(_compatible(a, b) for a, b in combinations(keys, 2)):
        return None
    diffs = np.array([x.get(s, 0.0) - y.get(s, 0.0) for s in keys])
    return BhvDecomposition(tuple(keys), diffs, px - py)


def _cone_path(x: dict, y: dict) -> float:
    """Shortest path through the face spanned by the splits both trees share."""
    common = set(x) & set(y)
    a = math.sqrt(sum(v * v for s, v in x.items() if s not in common))
    b = math.sqrt(sum(v * v for s, v in y.items() if s not in common))
    c2 = sum((x[s] - y[s]) ** 2 for s in common)
    return math.sqrt((a + b) ** 2 + c2)


def _all_splits(n: int) -> list[frozenset]:
    leaves = range(1, n)
    return [frozenset(c) for k in range(2, n - 1) for c in combinations(leaves, k)]


def _planar_geodesic(x: dict, y: dict, n: int) -> float:
    """Exact internal geodesic when orthants are two-dimensional (N = 5).

    Candidate paths cross at most one intermediate orthant: unfolding a chain
    of quadrants about the origin, a straight segment spans less than a half
    turn, so it meets at most three quadrants.  Anything else is no shorter
    than the path through the origin.
    """
    splits = _all_splits(n)
    orthants = [frozenset(p) for p in combinations(splits, 2) if _compatible(*p)]
    nx = math.sqrt(sum(v * v for v in x.values()))
    ny = math.sqrt(sum(v * v for v in y.values()))
    best = nx + ny
    ox = [o for o in orthants if set(x) <= o]
    oy = [o for o in orthants if set(y) <= o]

    def chord(theta: float) -> float:
        if theta >= math.pi:
            return nx + ny
        return math.sqrt(max(nx * nx + ny * ny - 2 * nx * ny * math.cos(theta), 0.0))

    for a in ox:
        for b in oy:
            if a == b:
                keys = a
                best = min(best, math.sqrt(sum((x.get(s, 0.0) - y.get(s, 0.0)) ** 2 for s in keys)))
                continue
            shared = a & b
            if len(shared) == 1:
                (r,) = shared
                (xo,) = a - shared
                (yo,) = b - shared
                tx = math.atan2(x.get(r, 0.0), x.get(xo, 0.0))
                ty = math.pi / 2 + math.atan2(y.get(yo, 0.0), y.get(r, 0.0))
                best = min(best, chord(ty - tx))
            for r1 in a:
                for r2 in b:
                    mid = frozenset([r1, r2])
                    if r1 == r2 or mid not in orthants or mid in (a, b):
                        continue
                    (xo,) = a - {r1}
                    (yo,) = b - {r2}
                    tx = math.atan2(x.get(r1, 0.0), x.get(xo, 0.0))
                    ty = math.pi + math.atan2(y.get(yo, 0.0), y.get(r2, 0.0))
                    best = min(best, chord(ty - tx))
    return best


def bhv_distance(t1: Tree, t2: Tree, tol: float | None = None) -> BhvDistance:
    """BHV distance with pendant edges included.

    Exact when both trees lie in a common orthant or N <= 5; otherwise the
    length of the path through the shared face, which bounds the geodesic
    from above and is flagged inexact.
    """
    _check_leaves(t1, t2)
    tol = resolve_tol(tol)
    dec = bhv_decomposition(t1, t2, tol)
    if dec is not None:
        return BhvDistance(dec.distance, True)
    x, px = _support(t1, tol)
    y, py = _support(t2, tol)
    pend2 = float(np.sum((px - py) ** 2))
    n = t1.n_leaves
    if n <= 4:
        internal, exact = _cone_path(x, y), True
    elif n == 5:
        internal, exact = _planar_geodesic(x, y, n), True
    else:
        internal, exact = _cone_path(x, y), False
    return BhvDistance(math.sqrt(internal**2 + pend2), exact)


def stability_check(t1: Tree, t2: Tree, tol: float | None = None) -> StabilityReport:
    """Compare d_tr of the cophenetic vectors with sqrt(N+1) times d_BHV."""
    _check_leaves(t1, t2)
    d_tr = trop_dist(cophenetic_vector(t1), cophenetic_vector(t2))
    d_bhv, exact = bhv_distance(t1, t2, tol)
    bound = math.sqrt(t1.n_leaves + 1) * d_bhv
    tight = exact and abs(d_tr - bound) <= 1e-6 * max(1.0, bound)
    return StabilityReport(d_tr, d_bhv, exact, bound, tight)


def stability_equality_family(n_leaves: int) -> tuple[Tree, Tree]:
    """Two caterpillars in one orthant with d_BHV = sqrt(N+1).

    Splits {1,2}, {1,2,3}, ..., {1..N-2} carry lengths (2,...,2,1) in the
    first tree and (1,...,1,2) in the second.  Pendant edges are zero except
    leaves 2 and N-2 in the first tree and leaves N-1 and N in the second,
    which have length 1.
    """
    n = n_leaves
    if n < 5:
        raise ValueError("the family needs N >= 5")
    clades = [frozenset(range(1, k + 1)) for k in range(2, n - 1)]
    len1 = {s: (2.0 if len(s) < n - 2 else 1.0) for s in clades}
    len2 = {s: (1.0 if len(s) < n - 2 else 2.0) for s in clades}
    p1 = [0.0] * n
    p2 = [0.0] * n
    p1[2 - 1] = p1[n - 2 - 1] = 1.0
    p2[n - 1 - 1] = p2[n - 1] = 1.0
    return build_tree(n, clades, len1, p1), build_tree(n, clades, len2, p2)


def path_difference(t1: Tree, t2: Tree) -> float:
    """Euclidean norm of the difference of edge-count vectors."""
    _check_leaves(t1, t2)
    return float(np.linalg.norm(edge_count_vector(t1).values - edge_count_vector(t2).values))


def rf_distance(t1: Tree, t2: Tree) -> float:
    """Half the symmetric difference of nontrivial splits."""
    _check_leaves(t1, t2)
    return len(t1.splits() ^ t2.splits()) / 2


def quartet_topologies(t: Tree) -> np.ndarray:
    """Induced topology of every 4-subset i<j<k<l.

    0: ij|kl, 1: ik|jl, 2: il|jk, 3: unresolved.  Read off the edge-count
    metric: the resolved pairing has the strictly smallest pair-sum.
    """
    if t.n_leaves < 4:
        return np.zeros(0, dtype=int)
    v = edge_count_vector(t).values[quadruple_pair_indices(t.n_leaves)]
    sums = np.stack([v[:, 0] + v[:, 1], v[:, 2] + v[:, 3], v[:, 4] + v[:, 5]], axis=1)
    srt = np.sort(sums, axis=1)
    return np.where(srt[:, 0] < srt[:, 1], np.argmin(sums, axis=1), 3)


def quartet_distance(t1: Tree, t2: Tree) -> float:
    """Half the symmetric difference of induced quartet sets."""
    _check_leaves(t1, t2)
    q1, q2 = quartet_topologies(t1), quartet_topologies(t2)
    return float(np.count_nonzero(q1 != q2))
