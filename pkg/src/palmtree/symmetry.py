"""Leaf relabelling acting on ultrametrics and on tropical segments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .newick_io import Tree, cophenetic_vector, is_equidistant
from .tropical import tropline_ultrametric
from .vectors import MetricVector, as_metric_vector, pair_arrays, resolve_tol


@dataclass(frozen=True)
class LeafPermutation:
    """A bijection of 1..N in one-line notation: `mapping[i-1]` is the image of i.

    Composition follows (s * t)(i) = s(t(i)).
    """

    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        if sorted(m) != list(range(1, len(m) + 1)):
            raise ValueError(f"{m} is not a permutation of 1..{len(m)}")
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "LeafPermutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def parse(cls, text: str) -> "LeafPermutation":
        return cls(tuple(int(x) for x in text.strip().strip("()").split(",")))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i - 1]

    def __mul__(self, other: "LeafPermutation") -> "LeafPermutation":
        if self.n != other.n:
            raise ValueError("permutations act on different leaf sets")
        return LeafPermutation(tuple(self(other(i)) for i in range(1, self.n + 1)))

    def inverse(self) -> "LeafPermutation":
        inv = [0] * self.n
        for i, s in enumerate(self.mapping, start=1):
            inv[s - 1] = i
        return LeafPermutation(tuple(inv))

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.mapping)) + ")"


def _as_perm(sigma) -> LeafPermutation:
    return sigma if isinstance(sigma, LeafPermutation) else LeafPermutation(tuple(sigma))


def apply_sigma(w, sigma) -> MetricVector:
    """The vector whose entry at {i, j} is w at {sigma(i), sigma(j)}."""
    w = as_metric_vector(w)
    sigma = _as_perm(sigma)
    if sigma.n != w.n_leaves:
        raise ValueError(f"permutation of {sigma.n} leaves applied to a vector on {w.n_leaves}")
    m = w.matrix()
    rows, cols = pair_arrays(w.n_leaves)
    s = np.array(sigma.mapping) - 1
    return MetricVector(w.n_leaves, m[s[rows], s[cols]])


def permutation_relating_vectors(w1, w2, tol: float | None = None) -> LeafPermutation | None:
    """Lexicographically smallest sigma with apply_sigma(w1, sigma^-1) == w2.

    Equivalently w1{i,j} == w2{sigma(i), sigma(j)} for all pairs.  Depth-first
    assignment of sigma(1), sigma(2), ... in increasing order, pruned by
    sorted-row signatures and by consistency with the leaves already placed.
    """
    w1, w2 = as_metric_vector(w1), as_metric_vector(w2)
    if w1.n_leaves != w2.n_leaves:
        return None
    tol = resolve_tol(tol)
    n = w1.n_leaves
    if not np.allclose(np.sort(w1.values), np.sort(w2.values), rtol=0, atol=tol):
        return None
    a, b = w1.matrix(), w2.matrix()
    sa, sb = np.sort(a, axis=1), np.sort(b, axis=1)
    options = [[t for t in range(n) if np.allclose(sa[i], sb[t], rtol=0, atol=tol)] for i in range(n)]
    image = [-1] * n
    used = [False] * n

    def place(i: int) -> bool:
        if i == n:
            return True
        for t in options[i]:
            if used[t]:
                continue
            if all(abs(a[i, k] - b[t, image[k]]) <= tol for k in range(i)):
                image[i], used[t] = t, True
                if place(i + 1):
                    return True
                image[i], used[t] = -1, False
        return False

    if not place(0):
        return None
    return LeafPermutation(tuple(t + 1 for t in image))


def permutation_relating(t1: Tree, t2: Tree, tol: float | None = None) -> LeafPermutation | None:
    """Relabelling that carries equidistant tree t1 onto t2, if one exists."""
    for t in (t1, t2):
        if not t.rooted or not is_equidistant(t, tol):
            raise ValueError("permutation_relating needs rooted equidistant trees")
    return permutation_relating_vectors(cophenetic_vector(t1), cophenetic_vector(t2), tol)


def _same_point_sets(p: Sequence[np.ndarray], q: Sequence[np.ndarray], tol: float) -> bool:
    """Multiset equality of projective points up to tolerance."""
    if len(p) != len(q):
        return False
    norm = lambda v: np.asarray(v) - v[0]  # noqa: E731
    left = [norm(v) for v in q]
    for v in p:
        v = norm(v)
        hit = next((k for k, u in enumerate(left) if np.all(np.abs(u - v) <= tol * max(1.0, np.abs(v).max()))), None)
        if hit is None:
            return False
        left.pop(hit)
    return True


def segment_equivariance_check(w_src1, w_dst1, w_src2, w_dst2, sigma, tol: float | None = None) -> bool:
    """Does relabelling the traced segment (src1, dst1) give the segment (src2, dst2)?

    The hypotheses are w_src2 == apply_sigma(w_src1, sigma) and
    w_dst2 == apply_sigma(w_dst1, sigma); a ValueError is raised before any
    segment is traced if they fail.
    """
    tol = resolve_tol(tol)
    sigma = _as_perm(sigma)
    src1, dst1, src2, dst2 = (as_metric_vector(w) for w in (w_src1, w_dst1, w_src2, w_dst2))
    if not apply_sigma(src1, sigma).allclose(src2, tol) or not apply_sigma(dst1, sigma).allclose(dst2, tol):
        raise ValueError(f"the second pair is not the image of the first under {sigma}")
    first = tropline_ultrametric(src1, dst1, annotate=False, tol=tol)
    second = tropline_ultrametric(src2, dst2, annotate=False, tol=tol)
    moved = [apply_sigma(MetricVector(src1.n_leaves, b.vector), sigma).values for b in first.breakpoints]
    return _same_point_sets(moved, [b.vector for b in second.breakpoints], tol * 100)
