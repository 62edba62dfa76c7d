"""Newick parsing and writing, and the tree <-> cophenetic vector maps."""

from __future__ import annotations

import math
import re
from itertools import combinations, islice
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .vectors import MetricVector, as_metric_vector, attained_twice, pair_arrays, resolve_tol, triple_pair_indices


class NewickError(ValueError):
    """Malformed Newick text.  `offset` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ThreePointViolation(ValueError):
    def __init__(self, triple: tuple[int, int, int], values: tuple[float, float, float]):
        i, j, k = triple
        super().__init__(
            f"three-point condition fails on leaves {triple}: "
            f"w{i}{j}={values[0]:.12g}, w{i}{k}={values[1]:.12g}, w{j}{k}={values[2]:.12g}"
        )
        self.triple = triple
        self.values = values


@dataclass(frozen=True)
class Tree:
    """An immutable phylogenetic tree.

    Node 0 is the root of the stored (possibly unrooted) drawing.  `lengths[v]`
    is the length of the edge from v to its parent.  Leaves carry labels 1..N;
    `names[label - 1]` is the original leaf name.
    """

    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    lengths: tuple[float, ...]
    leaf_label: Mapping[int, int]
    names: tuple[str, ...]
    rooted: bool
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def n_leaves(self) -> int:
        return len(self.names)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def leaf_node(self, label: int) -> int:
        return self._label_to_node()[label]

    def _label_to_node(self) -> dict[int, int]:
        return {lab: v for v, lab in self.leaf_label.items()}

    def postorder(self) -> list[int]:
        order, stack = [], [0]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self.children[v])
        return order[::-1]

    def leaf_sets(self) -> list[frozenset[int]]:
        """Leaf labels below each node."""
        below: list[frozenset[int]] = [frozenset()] * self.n_nodes
        for v in self.postorder():
            if self.is_leaf(v):
                below[v] = frozenset([self.leaf_label[v]])
            else:
                below[v] = frozenset().union(*(below[c] for c in self.children[v]))
        return below

    def depths(self, unit: bool = False) -> np.ndarray:
        d = np.zeros(self.n_nodes)
        for v in reversed(self.postorder()):
            if v:
                d[v] = d[self.parent[v]] + (1.0 if unit else self.lengths[v])
        return d

    def clades(self) -> frozenset[frozenset[int]]:
        """Leaf sets of internal non-root nodes, i.e. the rooted topology."""
        below = self.leaf_sets()
        return frozenset(
            below[v] for v in range(1, self.n_nodes) if not self.is_leaf(v) and len(below[v]) < self.n_leaves
        )

    def split_lengths(self) -> tuple[dict[frozenset[int], float], np.ndarray]:
        """Internal splits with their lengths, and pendant lengths by label.

        The tree is read as unrooted: a degree-2 root is suppressed and its two
        edges merged.  Each split is keyed by the side not containing leaf N.
        """
        n = self.n_leaves
        full = frozenset(range(1, n + 1))
        below = self.leaf_sets()
        internal: dict[frozenset[int], float] = {}
        pendant = np.zeros(n)
        for v in range(1, self.n_nodes):
            side = below[v]
            if n in side:
                side = full - side
            length = self.lengths[v]
            if len(side) == 1 or len(side) == n - 1:
                lab = next(iter(side)) if len(side) == 1 else next(iter(full - side))
                pendant[lab - 1] += length
            elif side:
                internal[side] = internal.get(side, 0.0) + length
        return internal, pendant

    def splits(self) -> frozenset[frozenset[int]]:
        return frozenset(self.split_lengths()[0])


_SPECIAL = set("(),:;[]'")
_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def offset(self, pos: int | None = None) -> int:
        p = self.pos if pos is None else pos
        return len(self.text[:p].encode("utf-8"))

    def error(self, message: str, pos: int | None = None):
        raise NewickError(message, self.offset(pos))

    def skip(self):
        t = self.text
        while self.pos < len(t):
            c = t[self.pos]
            if c.isspace():
                self.pos += 1
            elif c == "[":
                end = t.find("]", self.pos)
                if end < 0:
                    self.error("unterminated comment")
                self.pos = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def label(self) -> str | None:
        self.skip()
        t = self.text
        if self.pos < len(t) and t[self.pos] == "'":
            start = self.pos
            self.pos += 1
            chars = []
            while True:
                if self.pos >= len(t):
                    self.error("unterminated quoted label", start)
                c = t[self.pos]
                if c == "'":
                    if t[self.pos + 1 : self.pos + 2] == "'":
                        chars.append("'")
                        self.pos += 2
                        continue
                    self.pos += 1
                    return "".join(chars)
                chars.append(c)
                self.pos += 1
        start = self.pos
        while self.pos < len(t) and t[self.pos] not in _SPECIAL and not t[self.pos].isspace():
            self.pos += 1
        if self.pos == start:
            return None
        return t[start : self.pos].replace("_", " ")

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            self.error("expected a branch length after ':'")
        value = float(m.group(0))
        if value < 0:
            self.error("negative branch length")
        self.pos = m.end()
        return value

    def subtree(self, nodes: list) -> int:
        """Append the subtree at the cursor to `nodes`; return its index."""
        me = len(nodes)
        self.skip()
        start = self.pos
        nodes.append([None, [], None, start])  # name, children, length, text position
        if self.peek() == "(":
            self.pos += 1
            while True:
                nodes[me][1].append(self.subtree(nodes))
                c = self.peek()
                if c == ",":
                    self.pos += 1
                elif c == ")":
                    self.pos += 1
                    break
                else:
                    self.error("unbalanced parentheses: expected ',' or ')'")
            self.label()  # internal labels are ignored
        else:
            name = self.label()
            if name is None:
                self.error("expected a leaf name or '('", start)
            nodes[me][0] = name
        nodes[me][2] = self.length()
        return me


def _natural_order(names: Iterable[str]) -> list[str]:
    names = list(names)
    if all(re.fullmatch(r"\d+", s) for s in names):
        return sorted(names, key=int)
    return sorted(names)


def _assemble(raw_nodes: list, rooted: bool | None, warnings: list[str]) -> Tree:
    # suppress unary internal nodes (degree 2 away from the root)
    parent_of = {c: v for v, (_, kids, _) in enumerate(raw_nodes) for c in kids}
    for v, (name, kids, length) in enumerate(raw_nodes):
        if len(kids) == 1 and v != 0:
            (c,) = kids
            raw_nodes[c][2] = (raw_nodes[c][2] or 0.0) + (length if length is not None else 1.0)
            p = parent_of[v]
            raw_nodes[p][1] = [c if k == v else k for k in raw_nodes[p][1]]
            parent_of[c] = p
            raw_nodes[v] = None
            warnings.append("collapsed a unary internal node")
    while raw_nodes[0] is not None and len(raw_nodes[0][1]) == 1 and raw_nodes[raw_nodes[0][1][0]][1]:
        (c,) = raw_nodes[0][1]
        raw_nodes[0] = [None, raw_nodes[c][1], None]
        raw_nodes[c] = None
        warnings.append("collapsed a unary root")

    # renumber in preorder
    order, stack = [], [0]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(raw_nodes[v][1]))
    new_id = {old: k for k, old in enumerate(order)}
    parent = [-1] * len(order)
    children: list[tuple[int, ...]] = []
    lengths = [0.0] * len(order)
    leaf_names: dict[int, str] = {}
    for old in order:
        name, kids, length = raw_nodes[old]
        v = new_id[old]
        children.append(tuple(new_id[k] for k in kids))
        for k in kids:
            parent[new_id[k]] = v
        if v:
            lengths[v] = 1.0 if length is None else float(length)
            if lengths[v] == 0.0:
                warnings.append("zero-length " + ("pendant" if not kids else "internal") + " edge")
        if not kids:
            leaf_names[v] = name
    ordered = _natural_order(leaf_names.values())
    label_of = {name: k + 1 for k, name in enumerate(ordered)}
    leaf_label = {v: label_of[name] for v, name in leaf_names.items()}
    if rooted is None:
        rooted = len(children[0]) == 2
    return Tree(tuple(parent), tuple(children), tuple(lengths), leaf_label, tuple(ordered), rooted, tuple(warnings))


def parse_newick(text: str, rooted: bool | None = None) -> Tree:
    """Parse a single Newick statement.

    Missing branch lengths default to 1.0.  Leaves get labels 1..N in sorted
    name order (numeric order when every name is an integer).  `rooted`
    defaults to whether the outermost node has exactly two children.
    """
    p = _Parser(text)
    nodes: list = []
    if p.peek() == "":
        p.error("empty input")
    p.subtree(nodes)
    if p.peek() != ";":
        if p.peek() == ")":
            p.error("unbalanced parentheses: unexpected ')'")
        p.error("expected ';' at end of tree")
    p.pos += 1
    if p.peek() != "":
        p.error("trailing characters after ';'")
    seen: set[str] = set()
    for name, kids, _, pos in nodes:
        if not kids:
            if name in seen:
                p.error(f"duplicate leaf name {name!r}", pos)
            seen.add(name)
    if len(seen) < 2:
        p.error("a tree needs at least two leaves", len(text))
    return _assemble([node[:3] for node in nodes], rooted, [])


def read_newick_lines(text: str) -> list[Tree]:
    """One tree per non-blank line."""
    return [parse_newick(line) for line in text.splitlines() if line.strip()]


def _format_name(name: str) -> str:
    if "_" in name or any(c in _SPECIAL or (c.isspace() and c != " ") for c in name):
        return "'" + name.replace("'", "''") + "'"
    return name.replace(" ", "_")


def format_length(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def write_newick(t: Tree) -> str:
    def rec(v: int) -> str:
        if t.is_leaf(v):
            s = _format_name(t.names[t.leaf_label[v] - 1])
        else:
            s = "(" + ",".join(rec(c) for c in t.children[v]) + ")"
        return s + (":" + format_length(t.lengths[v]) if v else "")

    return rec(0) + ";"


def _pairwise(t: Tree, unit: bool) -> np.ndarray:
    n = t.n_leaves
    depth = t.depths(unit=unit)
    m = np.zeros((n, n))
    below: dict[int, list[int]] = {}
    for v in t.postorder():
        if t.is_leaf(v):
            below[v] = [v]
            continue
        groups = [below.pop(c) for c in t.children[v]]
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                for x in groups[a]:
                    for y in groups[b]:
                        i, j = t.leaf_label[x] - 1, t.leaf_label[y] - 1
                        m[i, j] = m[j, i] = depth[x] + depth[y] - 2 * depth[v]
                        if unit and v == 0 and len(t.children[0]) == 2:
                            m[i, j] = m[j, i] = m[i, j] - 1
        below[v] = [x for g in groups for x in g]
    return m


def cophenetic_vector(t: Tree) -> MetricVector:
    """Leaf-to-leaf path lengths in pair order."""
    m = _pairwise(t, unit=False)
    rows, cols = pair_arrays(t.n_leaves)
    return MetricVector(t.n_leaves, m[rows, cols])


def edge_count_vector(t: Tree) -> MetricVector:
    """Number of edges between leaves, with a degree-2 root suppressed."""
    m = _pairwise(t, unit=True)
    rows, cols = pair_arrays(t.n_leaves)
    return MetricVector(t.n_leaves, m[rows, cols])


def first_three_point_violation(w: MetricVector, tol: float | None = None):
    """The first failing triple (1-based) with its values, or None."""
    tol = resolve_tol(tol)
    if w.n_leaves < 3:
        return None
    idx = triple_pair_indices(w.n_leaves)
    vals = w.values[idx]
    ok = attained_twice(vals, tol)
    if ok.all():
        return None
    k = int(np.argmin(ok))
    triple = next(islice(combinations(range(1, w.n_leaves + 1), 3), k, None))
    return triple, tuple(float(x) for x in vals[k])


def merge_levels(w: MetricVector, tol: float | None = None) -> list[tuple[float, list[frozenset[int]]]]:
    """Single-linkage merge history: (level, clusters formed at that level).

    Values within `tol` of a level's first value are treated as equal, so ties
    produce one multi-way merge.
    """
    tol = resolve_tol(tol)
    n = w.n_leaves
    rows, cols = pair_arrays(n)
    order = np.argsort(w.values, kind="stable")
    comp = list(range(n))
    members = {k: frozenset([k + 1]) for k in range(n)}

    def find(a):
        while comp[a] != a:
            comp[a] = comp[comp[a]]
            a = comp[a]
        return a

    out = []
    k = 0
    while k < len(order):
        level = w.values[order[k]]
        touched = set()
        while k < len(order) and w.values[order[k]] - level <= tol * max(1.0, abs(level)):
            a, b = find(rows[order[k]]), find(cols[order[k]])
            if a != b:
                comp[b] = a
                members[a] = members[a] | members.pop(b)
                touched.add(a)
            k += 1
        if touched:
            roots = {find(a) for a in touched}
            out.append((float(level), [members[r] for r in sorted(roots)]))
    return out


def tree_from_ultrametric(w, names: Iterable[str] | None = None, tol: float | None = None) -> Tree:
    """The equidistant rooted tree whose cophenetic vector is `w`.

    Raises ThreePointViolation naming the offending triple when `w` is not an
    ultrametric.
    """
    w = as_metric_vector(w)
    bad = first_three_point_violation(w, tol)
    if bad is not None:
        raise ThreePointViolation(*bad)
    if np.any(w.values < -resolve_tol(tol)):
        raise ValueError("ultrametric entries must be nonnegative")
    n = w.n_leaves
    # nodes: leaves 1..n get ids 0..n-1 at height 0
    height = {k: 0.0 for k in range(n)}
    kids: dict[int, list[int]] = {}
    top = {frozenset([k + 1]): k for k in range(n)}
    next_id = n
    for level, clusters in merge_levels(w, tol):
        for cl in clusters:
            parts = [s for s in list(top) if s <= cl]
            v = next_id
            next_id += 1
            kids[v] = [top.pop(s) for s in sorted(parts, key=min)]
            height[v] = level / 2.0
            top[cl] = v
    (root,) = top.values()
    root_h = height[root]
    # emit nodes in preorder with root first
    order, stack = [], [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(kids.get(v, [])))
    new = {old: k for k, old in enumerate(order)}
    parent = [-1] * len(order)
    children = []
    lengths = [0.0] * len(order)
    for old in order:
        c = tuple(new[k] for k in kids.get(old, []))
        children.append(c)
        for k, kid_old in zip(c, kids.get(old, [])):
            parent[k] = new[old]
            lengths[k] = height[old] - height[kid_old]
    # leaves hang exactly at depth root_h; absorb rounding in pendant edges
    leaf_label = {new[k]: k + 1 for k in range(n)}
    name_list = tuple(names) if names is not None else tuple(str(k + 1) for k in range(n))
    tree = Tree(tuple(parent), tuple(children), tuple(lengths), leaf_label, name_list, True)
    depth = tree.depths()
    fixed = list(lengths)
    for v in leaf_label:
        fixed[v] = max(0.0, fixed[v] + (root_h - depth[v]))
    return Tree(tuple(parent), tuple(children), tuple(fixed), leaf_label, name_list, True)


def is_equidistant(t: Tree, tol: float | None = None) -> bool:
    """True when every root-to-leaf path has the same length."""
    if not t.rooted:
        raise ValueError("equidistance is only defined for rooted trees")
    d = t.depths()
    leaf_d = np.array([d[v] for v in t.leaf_label])
    return bool(leaf_d.max() - leaf_d.min() <= resolve_tol(tol) * max(1.0, abs(leaf_d.max())))


def build_tree(
    n_leaves: int,
    clades: Iterable[Iterable[int]],
    clade_lengths: Mapping[frozenset[int], float] | None = None,
    pendant_lengths: Iterable[float] | None = None,
    names: Iterable[str] | None = None,
) -> Tree:
    """Tree realising a nested set of clades on leaves 1..N.

    Children of the root are the maximal clades plus uncovered leaves, so the
    result is rooted exactly when that count is two.
    """
    cl = sorted({frozenset(c) for c in clades}, key=lambda s: (-len(s), sorted(s)))
    full = frozenset(range(1, n_leaves + 1))
    lens = dict(clade_lengths or {})
    pend = list(pendant_lengths) if pendant_lengths is not None else [1.0] * n_leaves
    # parent clade of each clade/leaf: the smallest strictly larger clade containing it
    nodes = [full] + cl + [frozenset([k]) for k in range(1, n_leaves + 1)]
    parent = [-1] * len(nodes)
    for v in range(1, len(nodes)):
        best = 0
        for u in range(1, len(cl) + 1):
            if nodes[v] < nodes[u] and len(nodes[u]) < len(nodes[best]):
                best = u
        parent[v] = best
    children = [[] for _ in nodes]
    for v in range(1, len(nodes)):
        children[parent[v]].append(v)
    lengths = [0.0] * len(nodes)
    for v in range(1, len(nodes)):
        s = nodes[v]
        lengths[v] = float(pend[min(s) - 1]) if len(s) == 1 else float(lens.get(s, 1.0))
    leaf_label = {len(cl) + k: k for k in range(1, n_leaves + 1)}
    name_list = tuple(names) if names is not None else tuple(str(k) for k in range(1, n_leaves + 1))
    return Tree(
        tuple(parent),
        tuple(tuple(c) for c in children),
        tuple(lengths),
        leaf_label,
        name_list,
        len(children[0]) == 2,
    )


def isomorphic(a: Tree, b: Tree, tol: float | None = None) -> bool:
    """Same labelled shape and matching branch lengths."""
    tol = resolve_tol(tol)
    if a.n_leaves != b.n_leaves or a.names != b.names:
        return False

    def canon(t: Tree):
        below = t.leaf_sets()
        return {below[v]: t.lengths[v] for v in range(1, t.n_nodes)}, len(t.children[0])

    ca, ra = canon(a)
    cb, rb = canon(b)
    if ra != rb or ca.keys() != cb.keys():
        return False
    return all(math.isclose(ca[k], cb[k], abs_tol=tol) for k in ca)
