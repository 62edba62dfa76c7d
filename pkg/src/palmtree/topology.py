"""Nested sets of clades and the combinatorics of rooted tree topologies."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np

from .newick_io import ThreePointViolation, first_three_point_violation, merge_levels
from .vectors import MetricVector, as_metric_vector, pair_index, pair_list, resolve_tol

Clade = frozenset  # frozenset[int]


def _canon_key(s: Iterable[int]):
    s = sorted(s)
    return (len(s), s)


def format_clade(s: Iterable[int]) -> str:
    return "{" + ",".join(str(x) for x in sorted(s)) + "}"


@dataclass(frozen=True)
class NestedSet:
    """A rooted tree topology: clades of size 2..N-1, pairwise nested or disjoint."""

    n_leaves: int
    clades: frozenset

    def __post_init__(self):
        n = self.n_leaves
        if n < 2:
            raise ValueError("a nested set needs N >= 2")
        cl = frozenset(frozenset(int(x) for x in s) for s in self.clades)
        full = frozenset(range(1, n + 1))
        for s in cl:
            if not s <= full:
                raise ValueError(f"clade {format_clade(s)} has leaves outside 1..{n}")
            if not 2 <= len(s) <= n - 1:
                raise ValueError(f"clade {format_clade(s)} must have between 2 and {n - 1} leaves")
        for a, b in combinations(cl, 2):
            if a & b and not (a < b or b < a):
                raise ValueError(f"clades {format_clade(a)} and {format_clade(b)} overlap without nesting")
        if len(cl) > max(n - 2, 0):
            raise ValueError(f"{len(cl)} clades exceed the bound N-2 = {n - 2}")
        object.__setattr__(self, "clades", cl)

    @classmethod
    def of(cls, n_leaves: int, clades: Iterable[Iterable[int]]) -> "NestedSet":
        return cls(n_leaves, frozenset(frozenset(c) for c in clades))

    @classmethod
    def parse(cls, text: str, n_leaves: int) -> "NestedSet":
        """Read the `{1,2}|{1,2,3}` text form; `{}` or an empty string is the star."""
        text = text.strip()
        if text in ("", "{}"):
            return cls(n_leaves, frozenset())
        clades = []
        for part in text.split("|"):
            m = re.fullmatch(r"\s*\{\s*(\d+(?:\s*,\s*\d+)*)\s*\}\s*", part)
            if not m:
                raise ValueError(f"cannot read clade {part!r}")
            clades.append(frozenset(int(x) for x in m.group(1).split(",")))
        return cls(n_leaves, frozenset(clades))

    def sorted_clades(self) -> list[tuple[int, ...]]:
        return [tuple(sorted(s)) for s in sorted(self.clades, key=_canon_key)]

    def __str__(self) -> str:
        if not self.clades:
            return "{}"
        return "|".join(format_clade(s) for s in self.sorted_clades())

    def __len__(self) -> int:
        return len(self.clades)

    def __lt__(self, other: "NestedSet"):
        return (self.n_leaves, self.sorted_clades()) < (other.n_leaves, other.sorted_clades())

    @property
    def full(self) -> frozenset:
        return frozenset(range(1, self.n_leaves + 1))

    @cached_property
    def nodes(self) -> tuple[frozenset, ...]:
        """Clades plus the full leaf set, smallest first."""
        return tuple(sorted(self.clades, key=_canon_key)) + (self.full,)

    @cached_property
    def pair_class(self) -> np.ndarray:
        """For each pair (in cophenetic order), the index in `nodes` of its closure."""
        out = np.empty(len(pair_list(self.n_leaves)), dtype=np.intp)
        for k, (i, j) in enumerate(pair_list(self.n_leaves)):
            out[k] = next(t for t, s in enumerate(self.nodes) if i in s and j in s)
        out.flags.writeable = False
        return out

    @cached_property
    def node_parent(self) -> np.ndarray:
        """Index of the smallest node strictly containing each node (-1 for the root)."""
        nodes = self.nodes
        out = np.full(len(nodes), -1, dtype=np.intp)
        for t, s in enumerate(nodes[:-1]):
            out[t] = next(u for u in range(t + 1, len(nodes)) if s < nodes[u])
        out.flags.writeable = False
        return out

    def relabel(self, sigma) -> "NestedSet":
        """Image under a leaf map given in one-line notation (leaf i -> sigma[i-1])."""
        m = tuple(sigma)
        return NestedSet(self.n_leaves, frozenset(frozenset(m[x - 1] for x in s) for s in self.clades))


class PairOrder(enum.Enum):
    EQUAL = "equal"
    LESS = "less"
    GREATER = "greater"
    INCOMPARABLE = "incomparable"


def closure(f: NestedSet, p: tuple[int, int]) -> frozenset:
    """Smallest clade of F (or the full leaf set) containing the pair p."""
    i, j = p
    return f.nodes[f.pair_class[pair_index(i, j, f.n_leaves)]]


def compare_pairs(f: NestedSet, p: tuple[int, int], q: tuple[int, int]) -> PairOrder:
    a, b = closure(f, p), closure(f, q)
    if a == b:
        return PairOrder.EQUAL
    if a < b:
        return PairOrder.LESS
    if b < a:
        return PairOrder.GREATER
    return PairOrder.INCOMPARABLE


class Classification(NamedTuple):
    full_dimensional: bool
    bifurcated: bool
    binary_trichotomy: bool
    binary_tree: bool

    @property
    def consistent(self) -> bool:
        return len(set(self)) == 1


def _children(f: NestedSet) -> dict[frozenset, list[frozenset]]:
    """Maximal proper sub-clades (singletons included) of each node."""
    parts = list(f.clades) + [frozenset([x]) for x in range(1, f.n_leaves + 1)]
    out = {}
    for s in f.nodes:
        below = [c for c in parts if c < s]
        out[s] = [c for c in below if not any(c < d for d in below)]
    return out


def is_bifurcated(f: NestedSet) -> bool:
    clades = f.clades
    for s in f.nodes:
        if len(s) < 3 and s != f.full:
            continue
        a = any(len(c) == len(s) - 1 and c < s for c in clades)
        subs = [c for c in clades if c < s]
        b = any(not (x & y) and x | y == s for x, y in combinations(subs, 2))
        if a == b:
            return False
    return True


def has_binary_trichotomy(f: NestedSet) -> bool:
    """Every triple has two pairs with equal closure and one pair strictly below them."""
    n = f.n_leaves
    if n < 3:
        return False
    pc = f.pair_class
    nodes = f.nodes
    for i, j, k in combinations(range(1, n + 1), 3):
        cls = [pc[pair_index(i, j, n)], pc[pair_index(i, k, n)], pc[pair_index(j, k, n)]]
        for m in range(3):
            lo = cls[m]
            rest = cls[:m] + cls[m + 1 :]
            if rest[0] == rest[1] and nodes[lo] < nodes[rest[0]]:
                break
        else:
            return False
    return True


def is_binary_tree(f: NestedSet) -> bool:
    return all(len(c) == 2 for c in _children(f).values())


def classify(f: NestedSet) -> Classification:
    return Classification(
        full_dimensional=len(f.clades) == f.n_leaves - 2,
        bifurcated=is_bifurcated(f),
        binary_trichotomy=has_binary_trichotomy(f),
        binary_tree=is_binary_tree(f),
    )


def topology_of(w, tol: float | None = None) -> NestedSet:
    """Clades of the single-linkage merge tree of an ultrametric."""
    w = as_metric_vector(w)
    bad = first_three_point_violation(w, tol)
    if bad is not None:
        raise ThreePointViolation(*bad)
    clades = [c for _, group in merge_levels(w, tol) for c in group if len(c) < w.n_leaves]
    return NestedSet(w.n_leaves, frozenset(clades))


def _class_layout(f: NestedSet):
    """Pair positions grouped by closure, for reduceat-style per-class reductions."""
    order = np.argsort(f.pair_class, kind="stable")
    counts = np.bincount(f.pair_class, minlength=len(f.nodes))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return order, starts


def ut_membership_batch(f: NestedSet, values: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Row-wise membership of `values` (shape (..., n)) in the cone ut(F)."""
    tol = resolve_tol(tol)
    v = np.asarray(values, dtype=float)
    order, starts = _class_layout(f)
    vv = v[..., order]
    hi = np.maximum.reduceat(vv, starts, axis=-1)
    lo = np.minimum.reduceat(vv, starts, axis=-1)
    scale = tol * np.maximum(1.0, np.abs(hi))
    ok = np.all(hi - lo <= scale, axis=-1)
    par = f.node_parent
    child = np.nonzero(par >= 0)[0]
    if child.size:
        gap = lo[..., par[child]] - hi[..., child]
        ok &= np.all(gap > tol * np.maximum(1.0, np.abs(lo[..., par[child]])), axis=-1)
    return ok


def ut_membership(f: NestedSet, w, tol: float | None = None) -> bool:
    """Equal values on equal closures and strictly smaller values on smaller closures."""
    w = as_metric_vector(w)
    if w.n_leaves != f.n_leaves:
        raise ValueError("leaf counts differ")
    return bool(ut_membership_batch(f, w.values, tol))


@lru_cache(maxsize=256)
def _incidence(f: NestedSet) -> np.ndarray:
    """M[p, s] = 1 when pair p lies inside clade s (clades in canonical order)."""
    clades = f.nodes[:-1]
    m = np.zeros((len(pair_list(f.n_leaves)), len(clades)))
    for k, (i, j) in enumerate(pair_list(f.n_leaves)):
        for t, s in enumerate(clades):
            if i in s and j in s:
                m[k, t] = 1.0
    return m


@lru_cache(maxsize=256)
def _leaf_incidence(f: NestedSet) -> np.ndarray:
    clades = f.nodes[:-1]
    return np.array([[1.0 if x in s else 0.0 for s in clades] for x in range(1, f.n_leaves + 1)])


def sample_ut(
    f: NestedSet,
    rng: np.random.Generator,
    size: int | None = None,
    low: float = 0.1,
    high: float = 1.0,
) -> np.ndarray:
    """Random cophenetic vectors of equidistant trees with topology F.

    Internal edge lengths are uniform on (low, high); the tree height exceeds
    the deepest clade path by another uniform draw so pendants stay positive.
    """
    k = 1 if size is None else size
    x = rng.uniform(low, high, size=(k, len(f.clades)))
    depth = x @ _leaf_incidence(f).T
    h = depth.max(axis=1, initial=0.0) + rng.uniform(low, high, size=k)
    w = 2.0 * h[:, None] - 2.0 * (x @ _incidence(f).T)
    return w[0] if size is None else w


def satisfies_compatibility_condition(f: NestedSet, f1: NestedSet, f2: NestedSet) -> bool:
    """Each closure class of F sits inside one closure class of F1 or of F2."""
    for t in range(len(f.nodes)):
        members = np.nonzero(f.pair_class == t)[0]
        if len(set(f1.pair_class[members])) > 1 and len(set(f2.pair_class[members])) > 1:
            return False
    return True


def _require_full(*fs: NestedSet):
    for f in fs:
        if len(f.clades) != f.n_leaves - 2:
            raise ValueError(
                f"topology {f} is not full dimensional; the compatibility condition "
                "is only established for full-dimensional (binary) topologies"
            )


def compatible_candidates(f1: NestedSet, f2: NestedSet) -> set[NestedSet]:
    """Full-dimensional topologies passing the necessary compatibility condition."""
    if f1.n_leaves != f2.n_leaves:
        raise ValueError("leaf counts differ")
    _require_full(f1, f2)
    return {f for f in enumerate_rooted_topologies(f1.n_leaves) if satisfies_compatibility_condition(f, f1, f2)}


@dataclass(frozen=True)
class Witness:
    """Ultrametrics w1 in ut(F1), w2 in ut(F2) with max(shift + w1, w2) in ut(F)."""

    w1: MetricVector
    w2: MetricVector
    shift: float

    @property
    def combined(self) -> MetricVector:
        return MetricVector(self.w1.n_leaves, np.maximum(self.shift + self.w1.values, self.w2.values))


WITNESS_BATCH = 1000


def compatibility_witness(
    f1: NestedSet,
    f2: NestedSet,
    f: NestedSet,
    trials: int = 100_000,
    seed: int = 0,
    grid: int = 41,
    tol: float | None = None,
) -> Witness | None:
    """Random search for a pair realising F on the segment between ut(F1) and ut(F2).

    Each trial draws w1, w2 and scans `grid` evenly spaced shifts a across
    [min(w2 - w1), max(w2 - w1)], the range over which max(a + w1, w2)
    moves from w2 to a translate of w1.  Batch b uses the random stream
    seeded by (seed, b), so results depend only on seed and trial count.
    Returning None is evidence, not proof, that F is not reachable.
    """
    _require_full(f1, f2, f)
    if not f1.n_leaves == f2.n_leaves == f.n_leaves:
        raise ValueError("leaf counts differ")
    frac = np.linspace(0.0, 1.0, grid)
    done = 0
    batch = 0
    while done < trials:
        k = min(WITNESS_BATCH, trials - done)
        rng = np.random.default_rng([seed, batch])
        w1 = sample_ut(f1, rng, k)
        w2 = sample_ut(f2, rng, k)
        diff = w2 - w1
        lo, hi = diff.min(axis=1), diff.max(axis=1)
        shifts = lo[:, None] + frac[None, :] * (hi - lo)[:, None]
        y = np.maximum(shifts[:, :, None] + w1[:, None, :], w2[:, None, :])
        hit = ut_membership_batch(f, y, tol)
        if hit.any():
            r, c = np.argwhere(hit)[0]
            n = f.n_leaves
            return Witness(MetricVector(n, w1[r]), MetricVector(n, w2[r]), float(shifts[r, c]))
        done += k
        batch += 1
    return None


# --- enumeration -----------------------------------------------------------


def _grow(n: int):
    """Yield clade lists of all rooted binary trees on leaves 1..n."""
    if n == 2:
        yield []
        return
    for clades in _grow(n - 1):
        prev = frozenset(range(1, n))
        spots = [frozenset([x]) for x in range(1, n)] + list(clades) + [prev]
        for spot in spots:
            grown = [s | {n} if spot < s else s for s in clades]
            grown.append(prev if spot == prev else spot | {n})
            yield grown


def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


MAX_ROOTED = 7
MAX_UNROOTED = 8


def enumerate_rooted_topologies(n_leaves: int) -> list[NestedSet]:
    """All (2N-3)!! rooted binary topologies on leaves 1..N, sorted canonically."""
    if not 3 <= n_leaves <= MAX_ROOTED:
        raise ValueError(f"rooted enumeration supports 3 <= N <= {MAX_ROOTED}, got {n_leaves}")
    return list(_rooted_cache(n_leaves))


@lru_cache(maxsize=None)
def _rooted_cache(n_leaves: int) -> tuple[NestedSet, ...]:
    return tuple(sorted(NestedSet(n_leaves, frozenset(c)) for c in _grow(n_leaves)))


@dataclass(frozen=True)
class UnrootedTopology:
    """Nontrivial splits, each stored as the side that omits leaf N."""

    n_leaves: int
    splits: frozenset

    def __str__(self) -> str:
        if not self.splits:
            return "{}"
        return "|".join(format_clade(s) for s in sorted(self.splits, key=_canon_key))


def enumerate_unrooted_topologies(n_leaves: int) -> list[UnrootedTopology]:
    """All (2N-5)!! unrooted binary topologies, via rooting at leaf N."""
    if not 4 <= n_leaves <= MAX_UNROOTED:
        raise ValueError(f"unrooted enumeration supports 4 <= N <= {MAX_UNROOTED}, got {n_leaves}")
    return list(_unrooted_cache(n_leaves))


@lru_cache(maxsize=None)
def _unrooted_cache(n_leaves: int) -> tuple[UnrootedTopology, ...]:
    out = []
    for clades in _grow(n_leaves - 1):
        splits = frozenset(frozenset(s) for s in clades)
        out.append(UnrootedTopology(n_leaves, splits))
    return tuple(sorted(out, key=lambda u: sorted(_canon_key(s) for s in u.splits)))
