"""Slow, independent reference implementations used only by the tests.

Nothing here imports palmtree; each oracle recomputes its answer from first
principles so agreement with the library is real evidence.
"""

from __future__ import annotations

import heapq
import math
from itertools import combinations

import numpy as np


def pairs(n):
    return [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]


def as_dict(values, n):
    return dict(zip(pairs(n), values))


def n_from_len(m):
    n = int(round((1 + math.sqrt(1 + 8 * m)) / 2))
    assert n * (n - 1) // 2 == m
    return n


# --- tropical -----------------------------------------------------------------


def trop_dist(u, v):
    """max over i, j of |(u_i - v_i) - (u_j - v_j)|, by double loop."""
    d = [a - b for a, b in zip(u, v)]
    return max(abs(d[i] - d[j]) for i in range(len(d)) for j in range(len(d)))


def three_point_ok(values, tol=1e-9):
    n = n_from_len(len(values))
    w = as_dict(values, n)
    for i, j, k in combinations(range(1, n + 1), 3):
        t = sorted([w[i, j], w[i, k], w[j, k]])
        if t[2] - t[1] > tol:
            return False
    return True


def four_point_ok(values, tol=1e-9):
    n = n_from_len(len(values))
    w = as_dict(values, n)
    for i, j, k, l in combinations(range(1, n + 1), 4):
        s = sorted([w[i, j] + w[k, l], w[i, k] + w[j, l], w[i, l] + w[j, k]])
        if s[2] - s[1] > tol:
            return False
    return True


def triangle_ok(values, tol=1e-9):
    n = n_from_len(len(values))
    w = as_dict(values, n)

    def d(a, b):
        return 0.0 if a == b else w[min(a, b), max(a, b)]

    return all(
        d(a, c) <= d(a, b) + d(b, c) + tol
        for a in range(1, n + 1)
        for b in range(1, n + 1)
        for c in range(1, n + 1)
    )


# --- a tiny Newick reader -------------------------------------------------------


def parse_simple_newick(text):
    """Adjacency lists {node: [(nbr, length)]} and leaf name -> node.

    Handles only plain labels and lengths, which is all the tests feed it.
    """
    text = text.strip().rstrip(";")
    adj, leaves = {}, {}
    counter = [0]

    def new():
        counter[0] += 1
        adj[counter[0]] = []
        return counter[0]

    def parse(pos):
        node = new()
        if text[pos] == "(":
            pos += 1
            while True:
                child, pos, length = parse(pos)
                adj[node].append((child, length))
                adj[child].append((node, length))
                if text[pos] == ",":
                    pos += 1
                    continue
                assert text[pos] == ")"
                pos += 1
                break
        start = pos
        while pos < len(text) and text[pos] not in ",():":
            pos += 1
        name = text[start:pos]
        if name and not adj[node]:
            leaves[name] = node
        length = 1.0
        if pos < len(text) and text[pos] == ":":
            start = pos + 1
            pos = start
            while pos < len(text) and text[pos] not in ",()":
                pos += 1
            length = float(text[start:pos])
        return node, pos, length

    parse(0)
    return adj, leaves


def _leaf_order(leaves):
    names = list(leaves)
    if all(s.isdigit() for s in names):
        return sorted(names, key=int)
    return sorted(names)


def suppress_degree_two(adj):
    """Splice out internal vertices with exactly two neighbours, summing lengths."""
    for v in [v for v in adj if len(adj[v]) == 2]:
        (a, la), (b, lb) = adj.pop(v)
        adj[a] = [(b, la + lb) if u == v else (u, x) for u, x in adj[a]]
        adj[b] = [(a, la + lb) if u == v else (u, x) for u, x in adj[b]]
    return adj


def path_lengths(text, unit=False):
    """Leaf-to-leaf distances by Dijkstra over the adjacency graph.

    Edge counts are taken after splicing out a degree-2 root, so they count
    edges of the unrooted tree.
    """
    adj, leaves = parse_simple_newick(text)
    if unit:
        adj = suppress_degree_two(adj)
    order = _leaf_order(leaves)
    out = []
    for a, b in combinations(order, 2):
        src, dst = leaves[a], leaves[b]
        dist = {src: 0.0}
        heap = [(0.0, src)]
        while heap:
            d, v = heapq.heappop(heap)
            if v == dst:
                break
            if d > dist[v]:
                continue
            for u, length in adj[v]:
                nd = d + (1.0 if unit else length)
                if nd < dist.get(u, math.inf):
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))
        out.append(dist[dst])
    return out


def splits(text):
    """Nontrivial bipartitions, each as the side not containing the last leaf.

    Degree-2 vertices are treated as edge subdivisions, so a rooted drawing
    and its unrooted version give the same set.
    """
    adj, leaves = parse_simple_newick(text)
    order = _leaf_order(leaves)
    label = {leaves[name]: k + 1 for k, name in enumerate(order)}
    n = len(order)
    out = set()
    for v in adj:
        for u, _ in adj[v]:
            # leaves reachable from u without passing through v
            seen, stack = {v, u}, [u]
            side = set()
            while stack:
                x = stack.pop()
                if x in label:
                    side.add(label[x])
                for y, _ in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if n in side:
                side = set(range(1, n + 1)) - side
            if 2 <= len(side) <= n - 2:
                out.add(frozenset(side))
    return out


def rf(text1, text2):
    return len(splits(text1) ^ splits(text2)) / 2


def quartets(text):
    """Map each 4-subset to the pairing induced by some split, or None."""
    sp = splits(text)
    n = len(parse_simple_newick(text)[1])
    full = frozenset(range(1, n + 1))
    out = {}
    for q in combinations(range(1, n + 1), 4):
        qs = set(q)
        got = None
        for s in sp:
            for side in (s, full - s):
                inside = qs & side
                if len(inside) == 2:
                    got = frozenset([frozenset(inside), frozenset(qs - inside)])
        out[q] = got
    return out


def quartet_distance(text1, text2):
    a, b = quartets(text1), quartets(text2)
    return sum(a[q] != b[q] for q in a)


# --- topology counting ------------------------------------------------------------


def laminar_full_families(n):
    """All families of N-2 clades (sizes 2..N-1) that are pairwise nested or disjoint."""
    clades = [frozenset(c) for k in range(2, n) for c in combinations(range(1, n + 1), k)]
    out = []
    for fam in combinations(clades, n - 2):
        if all(a <= b or b <= a or not (a & b) for a, b in combinations(fam, 2)):
            out.append(frozenset(fam))
    return out


def unrooted_binary_count(n):
    """Count split systems of N-3 pairwise compatible splits on N leaves."""
    sides = [frozenset(c) for k in range(2, n - 1) for c in combinations(range(1, n), k)]
    count = 0
    for fam in combinations(sides, n - 3):
        if all(a <= b or b <= a or not (a & b) for a, b in combinations(fam, 2)):
            count += 1
    return count


# --- BHV on five leaves -------------------------------------------------------------


def bhv5_internal(x, y, samples=300):
    """Internal-edge BHV distance on 5 leaves by shortest paths on a discretised complex.

    x, y map splits (subsets of {1,2,3,4} of size 2 or 3) to positive
    lengths.  Each of the ten rays carries `samples` evenly spaced points;
    inside each two-dimensional orthant every pair of points on its two rays
    (plus the origin and any endpoint tree lying in it) is joined by a
    straight segment.  The result is an upper bound that converges to the
    geodesic length quadratically in the spacing.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    rays = [frozenset(c) for k in (2, 3) for c in combinations(range(1, 5), k)]
    compat = lambda a, b: a <= b or b <= a or not (a & b)  # noqa: E731
    orthants = [(a, b) for a, b in combinations(rays, 2) if compat(a, b)]
    reach = math.sqrt(sum(v * v for v in x.values())) + math.sqrt(sum(v * v for v in y.values()))
    radii = np.linspace(0.0, reach, samples + 1)[1:]
    rid = {r: k for k, r in enumerate(rays)}
    # node 0 origin, 1 source, 2 target, then ray points
    base = 3

    def ray_node(r, k):
        return base + rid[r] * samples + k

    rows, cols, wts = [], [], []

    def coords_in(t, a, b):
        if not set(t) <= {a, b}:
            return None
        return (t.get(a, 0.0), t.get(b, 0.0))

    for a, b in orthants:
        pts = [(0, (0.0, 0.0))]
        pts += [(ray_node(a, k), (radii[k], 0.0)) for k in range(samples)]
        pts += [(ray_node(b, k), (0.0, radii[k])) for k in range(samples)]
        for node, t in ((1, x), (2, y)):
            c = coords_in(t, a, b)
            if c is not None:
                pts.append((node, c))
        ids = np.array([p[0] for p in pts])
        xy = np.array([p[1] for p in pts])
        d = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
        i, j = np.triu_indices(len(pts), 1)
        rows.append(ids[i])
        cols.append(ids[j])
        wts.append(d[i, j])
    rows, cols, wts = map(np.concatenate, (rows, cols, wts))
    size = base + len(rays) * samples
    # edges along a ray recur in every orthant containing it; keep one copy
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    key = lo.astype(np.int64) * size + hi
    order = np.lexsort((wts, key))
    _, first = np.unique(key[order], return_index=True)
    keep = order[first]
    rows, cols, wts = lo[keep], hi[keep], wts[keep]
    g = coo_matrix((np.maximum(wts, 1e-300), (rows, cols)), shape=(size, size)).tocsr()
    return float(dijkstra(g, directed=False, indices=1)[2])


# --- centers ------------------------------------------------------------------


def fermat_weber_lp(points):
    """Optimal tropical Fermat-Weber objective via scipy's HiGHS."""
    from scipy.optimize import linprog

    x = np.asarray(points, dtype=float)
    m, n = x.shape
    # variables: y (n), t (m); minimise sum t with t_i >= (x_i - y)_j - (x_i - y)_k
    c = np.concatenate([np.zeros(n), np.ones(m)])
    a, b = [], []
    for i in range(m):
        for j in range(n):
            for k in range(n):
                if j == k:
                    continue
                row = np.zeros(n + m)
                row[j] -= 1.0
                row[k] += 1.0
                row[n + i] = -1.0
                a.append(row)
                b.append(-(x[i, j] - x[i, k]))
    bounds = [(None, None)] * n + [(0, None)] * m
    res = linprog(c, A_ub=np.array(a), b_ub=np.array(b), bounds=bounds, method="highs")
    assert res.status == 0
    return float(res.fun)
