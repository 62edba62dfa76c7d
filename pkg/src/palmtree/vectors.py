"""Pair-indexed vectors and points of the tropical projective torus.

Leaf labels are 1-based throughout the public API.  Pairs are ordered
(1,2), (1,3), ..., (1,N), (2,3), ..., (N-1,N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

# Library-wide comparison tolerance; every public routine accepts `tol=` to override.
DEFAULT_TOL = 1e-9


def resolve_tol(tol: float | None) -> float:
    return DEFAULT_TOL if tol is None else float(tol)


def n_pairs(n_leaves: int) -> int:
    return n_leaves * (n_leaves - 1) // 2


def leaves_from_length(n: int) -> int:
    """Invert n = N(N-1)/2, raising if n is not a triangular number."""
    n_leaves = int(round((1 + math.sqrt(1 + 8 * n)) / 2))
    if n_pairs(n_leaves) != n or n_leaves < 2:
        raise ValueError(f"length {n} is not N(N-1)/2 for any N >= 2")
    return n_leaves


def pair_index(i: int, j: int, n_leaves: int) -> int:
    """Position of the 1-based pair {i, j} in the cophenetic order."""
    if i == j:
        raise ValueError("a pair needs two distinct leaves")
    if i > j:
        i, j = j, i
    if i < 1 or j > n_leaves:
        raise ValueError(f"pair ({i},{j}) outside leaves 1..{n_leaves}")
    a = i - 1
    return a * (2 * n_leaves - a - 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def pair_list(n_leaves: int) -> tuple[tuple[int, int], ...]:
    return tuple(combinations(range(1, n_leaves + 1), 2))


@lru_cache(maxsize=None)
def pair_arrays(n_leaves: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based row and column arrays of the pair order."""
    rows, cols = np.triu_indices(n_leaves, k=1)
    rows.flags.writeable = False
    cols.flags.writeable = False
    return rows, cols


@lru_cache(maxsize=None)
def triple_pair_indices(n_leaves: int) -> np.ndarray:
    """For each triple i<j<k, the positions of (ij, ik, jk)."""
    out = [
        (pair_index(i, j, n_leaves), pair_index(i, k, n_leaves), pair_index(j, k, n_leaves))
        for i, j, k in combinations(range(1, n_leaves + 1), 3)
    ]
    arr = np.array(out, dtype=np.intp).reshape(-1, 3)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def quadruple_pair_indices(n_leaves: int) -> np.ndarray:
    """For each i<j<k<l, positions of (ij, kl, ik, jl, il, jk)."""
    p = lambda a, b: pair_index(a, b, n_leaves)  # noqa: E731
    out = [
        (p(i, j), p(k, l), p(i, k), p(j, l), p(i, l), p(j, k))
        for i, j, k, l in combinations(range(1, n_leaves + 1), 4)
    ]
    arr = np.array(out, dtype=np.intp).reshape(-1, 6)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MetricVector:
    """A dissimilarity on leaves 1..N stored as its upper triangle."""

    n_leaves: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if self.n_leaves < 2:
            raise ValueError("need at least two leaves")
        if vals.size != n_pairs(self.n_leaves):
            raise ValueError(
                f"expected {n_pairs(self.n_leaves)} values for N={self.n_leaves}, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("metric vector entries must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MetricVector":
        vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
        return cls(leaves_from_length(vals.size), vals)

    @classmethod
    def from_matrix(cls, matrix) -> "MetricVector":
        m = np.asarray(matrix, dtype=float)
        rows, cols = pair_arrays(m.shape[0])
        return cls(m.shape[0], m[rows, cols])

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return float(self.values[pair_index(pair[0], pair[1], self.n_leaves)])

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricVector):
            return NotImplemented
        return self.n_leaves == other.n_leaves and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.n_leaves, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"MetricVector(n_leaves={self.n_leaves}, values={self.values.tolist()})"

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n_leaves, self.n_leaves))
        rows, cols = pair_arrays(self.n_leaves)
        m[rows, cols] = self.values
        m[cols, rows] = self.values
        return m

    def allclose(self, other: "MetricVector", tol: float | None = None) -> bool:
        other = as_metric_vector(other)
        return self.n_leaves == other.n_leaves and bool(
            np.all(np.abs(self.values - other.values) <= resolve_tol(tol))
        )


def as_metric_vector(w) -> MetricVector:
    if isinstance(w, MetricVector):
        return w
    if isinstance(w, ProjectivePoint):
        return MetricVector.from_values(w.coords)
    return MetricVector.from_values(np.asarray(w, dtype=float))


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point of R^n / R(1,...,1), stored with its first coordinate set to 0."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size == 0:
            raise ValueError("a projective point needs at least one coordinate")
        c = c - c[0]
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)

    @classmethod
    def from_reduced(cls, reduced: Sequence[float]) -> "ProjectivePoint":
        """Build from the R^{n-1} chart (x_2 - x_1, ..., x_n - x_1)."""
        return cls(np.concatenate([[0.0], np.asarray(reduced, dtype=float)]))

    @property
    def dim(self) -> int:
        return self.coords.size

    @property
    def reduced(self) -> np.ndarray:
        return self.coords[1:]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"ProjectivePoint({self.coords.tolist()})"

    def isclose(self, other, tol: float | None = None) -> bool:
        other = as_projective(other)
        if other.dim != self.dim:
            return False
        return bool(np.all(np.abs(self.coords - other.coords) <= resolve_tol(tol)))


def as_projective(x) -> ProjectivePoint:
    if isinstance(x, ProjectivePoint):
        return x
    if isinstance(x, MetricVector):
        return ProjectivePoint(x.values)
    return ProjectivePoint(np.asarray(x, dtype=float))


def raw_array(x) -> np.ndarray:
    """Coordinates of any vector-like value as a float array (no normalisation)."""
    if isinstance(x, MetricVector):
        return x.values
    if isinstance(x, ProjectivePoint):
        return x.coords
    return np.asarray(x, dtype=float).reshape(-1)


def attained_twice(values: np.ndarray, tol: float) -> np.ndarray:
    """Row-wise test that the maximum of each row occurs at least twice."""
    s = np.sort(values, axis=-1)
    top, second = s[..., -1], s[..., -2]
    return np.abs(top - second) <= tol * np.maximum(1.0, np.abs(top))
