"""Tropical centres (Fermat-Weber, Frechet) and samplers on ultrametric space."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .newick_io import first_three_point_violation
from .simplex import solve_lp
from .topology import _incidence, _leaf_incidence, enumerate_rooted_topologies
from .vectors import ProjectivePoint, as_metric_vector, n_pairs, raw_array


class CenterMethod(enum.Enum):
    LP = "lp"
    SUBGRADIENT = "subgradient"
    GRID = "grid"


@dataclass(frozen=True)
class CenterResult:
    point: ProjectivePoint
    objective: float
    method: CenterMethod
    iterations: int
    converged: bool


def _stack(points: Sequence) -> np.ndarray:
    if len(points) == 0:
        raise ValueError("need at least one point")
    arr = [raw_array(p) for p in points]
    if len({a.size for a in arr}) != 1:
        raise ValueError("points have different dimensions")
    x = np.stack(arr).astype(float)
    return x - x[:, :1]


def distances_to(y, points: np.ndarray) -> np.ndarray:
    d = raw_array(y)[None, :] - points
    return d.max(axis=1) - d.min(axis=1)


def fermat_weber_objective(y, points: Sequence) -> float:
    return float(distances_to(y, _stack(points)).sum())


def frechet_objective(y, points: Sequence) -> float:
    return float((distances_to(y, _stack(points)) ** 2).sum())


def tropical_frechet_objective(y, points: Sequence) -> float:
    """Sum of tropical squares d (.) d = 2d, i.e. twice the Fermat-Weber sum."""
    return float((2.0 * distances_to(y, _stack(points))).sum())


def fermat_weber(points: Sequence) -> CenterResult:
    """A minimiser of the summed tropical distance, by linear programming.

    Variables y_2..y_n (y_1 = 0) and per-point bounds u_k >= y_i - x_ki >= l_k;
    the objective sum(u_k - l_k) equals the summed distance at the optimum.
    The minimiser set is a polytope; the vertex reached is returned.
    """
    x = _stack(points)
    m, n = x.shape
    if n == 1 or m == 1:
        y = x[0]
        return CenterResult(ProjectivePoint(y), fermat_weber_objective(y, x), CenterMethod.LP, 0, True)
    nv = (n - 1) + 2 * m
    rows, rhs = [], []
    for k in range(m):
        for i in range(n):
            up = np.zeros(nv)
            lo = np.zeros(nv)
            if i:
                up[i - 1] = 1.0
                lo[i - 1] = -1.0
            up[n - 1 + k] = -1.0  # y_i - u_k <= x_ki
            lo[n - 1 + m + k] = 1.0  # l_k - y_i <= -x_ki
            rows += [up, lo]
            rhs += [x[k, i], -x[k, i]]
    c = np.concatenate([np.zeros(n - 1), np.ones(m), -np.ones(m)])
    res = solve_lp(c, np.array(rows), np.array(rhs))
    y = np.concatenate([[0.0], res.x[: n - 1]])
    return CenterResult(ProjectivePoint(y), fermat_weber_objective(y, x), CenterMethod.LP, res.pivots, True)


def _frechet_value_and_grad(y: np.ndarray, x: np.ndarray):
    """Objective and subgradient for a batch of candidates y (r, n)."""
    diff = y[:, None, :] - x[None, :, :]
    imax = diff.argmax(axis=2)  # first index on ties
    imin = diff.argmin(axis=2)
    d = np.take_along_axis(diff, imax[..., None], 2)[..., 0] - np.take_along_axis(diff, imin[..., None], 2)[..., 0]
    f = (d**2).sum(axis=1)
    cols = np.arange(y.shape[1])
    hot = (imax[..., None] == cols).astype(float) - (imin[..., None] == cols)
    g = 2.0 * np.einsum("rm,rmn->rn", d, hot)
    return f, g


def frechet_mean(
    points: Sequence,
    max_iter: int = 100_000,
    decay: float = 0.997,
    rel_tol: float = 1e-10,
) -> CenterResult:
    """Minimiser of the summed squared tropical distance by subgradient descent.

    Runs from every input point and from the coordinatewise median at once,
    taking normalised steps of length s_t = s_0 * decay^t.  Stops once the
    step can no longer change the objective by more than `rel_tol` relative
    to its value, or after `max_iter` steps; the best iterate wins.
    """
    x = _stack(points)
    m, n = x.shape
    starts = np.vstack([x, np.median(x, axis=0, keepdims=True)])
    if m == 1 or n == 1:
        y = x[0]
        return CenterResult(ProjectivePoint(y), frechet_objective(y, x), CenterMethod.SUBGRADIENT, 0, True)
    scale = max(float(distances_to(x[0], x).max()), 1e-12)
    for k in range(1, m):
        scale = max(scale, float(distances_to(x[k], x).max()))
    y = starts.copy()
    f, g = _frechet_value_and_grad(y, x)
    best_f, best_y = f.copy(), y.copy()
    step0 = scale / 2
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        step = step0 * decay ** (it - 1)
        norm = np.linalg.norm(g, axis=1)
        moving = norm > 0
        y[moving] -= (step / norm[moving])[:, None] * g[moving]
        f, g = _frechet_value_and_grad(y, x)
        better = f < best_f
        best_f[better] = f[better]
        best_y[better] = y[better]
        # a step of this length moves the objective by at most step * |g|
        if step * max(norm.max(), 1e-300) <= rel_tol * max(best_f.min(), 1e-300) or not moving.any():
            converged = True
            break
    k = int(np.argmin(best_f))
    yk = best_y[k]
    return CenterResult(ProjectivePoint(yk), frechet_objective(yk, x), CenterMethod.SUBGRADIENT, it, converged)


def frechet_variance(points: Sequence, y) -> float:
    """Mean squared tropical distance from y."""
    x = _stack(points)
    return float(np.mean(distances_to(y, x) ** 2))


def grid_center(points: Sequence, squared: bool, step: float = 0.01) -> CenterResult:
    """Brute-force minimiser over a lattice in the reduced chart.

    The box is the coordinatewise hull of the inputs padded by their
    tropical diameter.  Intended for dimension n <= 4.
    """
    x = _stack(points)
    red = x[:, 1:]
    diam = max(float(distances_to(p, x).max()) for p in x)
    lo, hi = red.min(axis=0) - diam, red.max(axis=0) + diam
    axes = [np.arange(a, b + step / 2, step) for a, b in zip(lo, hi)]
    best_v, best_y = math.inf, None
    # sweep the first axis in slices to bound memory
    if len(axes) > 1:
        rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, len(axes) - 1)
    else:
        rest = np.zeros((1, 0))
    for a in axes[0]:
        cand = np.hstack([np.zeros((rest.shape[0], 1)), np.full((rest.shape[0], 1), a), rest])
        diff = cand[:, None, :] - x[None, :, :]
        d = diff.max(axis=2) - diff.min(axis=2)
        vals = (d**2).sum(axis=1) if squared else d.sum(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best_v:
            best_v, best_y = float(vals[k]), cand[k]
    n_evals = len(axes[0]) * rest.shape[0]
    return CenterResult(ProjectivePoint(best_y), best_v, CenterMethod.GRID, n_evals, True)


# --- sampling ---------------------------------------------------------------


class MeasureKind(enum.Enum):
    BASE = "base"
    EXP_FAMILY = "expfam"


@dataclass(frozen=True)
class MeasureSpec:
    """A measure on equidistant trees of height `height_cap`.

    The base measure picks a rooted binary topology uniformly and internal
    edge lengths uniformly subject to every root-to-leaf path fitting in the
    height.  The exponential family reweights it by exp(-d_tr(w, center) / scale).
    """

    kind: MeasureKind
    n_leaves: int
    height_cap: float = 1.0
    center: object = None
    scale: float | None = None

    def __post_init__(self):
        if not self.height_cap > 0:
            raise ValueError("height_cap must be positive")
        if self.kind is MeasureKind.EXP_FAMILY:
            if self.center is None or self.scale is None:
                raise ValueError("the exponential family needs a center and a scale")
            if not self.scale > 0:
                raise ValueError("scale must be positive")
            c = as_metric_vector(self.center)
            if c.n_leaves != self.n_leaves:
                raise ValueError("center has the wrong number of leaves")
            if first_three_point_violation(c) is not None:
                raise ValueError("center must be an ultrametric")


SAMPLE_BATCH = 1024


def _base_batch(spec: MeasureSpec, rng: np.random.Generator, k: int) -> np.ndarray:
    topologies = enumerate_rooted_topologies(spec.n_leaves)
    pick = rng.integers(len(topologies), size=k)
    h = spec.height_cap
    out = np.empty((k, n_pairs(spec.n_leaves)))
    for t in range(len(topologies)):
        rows = np.nonzero(pick == t)[0]
        if not rows.size:
            continue
        f = topologies[t]
        leaf_inc, pair_inc = _leaf_incidence(f), _incidence(f)
        got: list[np.ndarray] = []
        need = rows.size
        while need > 0:
            x = rng.uniform(0.0, h, size=(max(4 * need, 64), len(f.clades)))
            ok = (x @ leaf_inc.T).max(axis=1) <= h
            acc = x[ok][:need]
            got.append(acc)
            need -= acc.shape[0]
        x = np.vstack(got)
        out[rows] = 2.0 * h - 2.0 * (x @ pair_inc.T)
    return out


def _batches(seed: int):
    b = 0
    while True:
        yield np.random.default_rng([seed, b])
        b += 1


def sample_base(spec: MeasureSpec, seed: int = 0, count: int = 1) -> np.ndarray:
    """`count` cophenetic vectors from the base measure, shape (count, n).

    Batch b draws from the stream seeded by (seed, b), so any prefix of the
    output is reproducible independently of `count`.
    """
    if spec.kind is not MeasureKind.BASE:
        raise ValueError("sample_base needs a base measure spec")
    if not 3 <= spec.n_leaves <= 7:
        raise ValueError("base sampling supports 3 <= N <= 7")
    chunks, have = [], 0
    for rng in _batches(seed):
        if have >= count:
            break
        chunk = _base_batch(spec, rng, SAMPLE_BATCH)
        chunks.append(chunk)
        have += chunk.shape[0]
    return np.vstack(chunks)[:count] if chunks else np.empty((0, n_pairs(spec.n_leaves)))


def exp_family_log_density(w, spec: MeasureSpec) -> float:
    """Unnormalised log density -d_tr(w, center) / scale on the base region."""
    d = raw_array(w) - as_metric_vector(spec.center).values
    return -float(d.max() - d.min()) / spec.scale


def sample_exp_family(
    spec: MeasureSpec,
    seed: int = 0,
    count: int = 1,
    min_rate: float = 1e-4,
    min_proposals: int = 10_000,
) -> tuple[np.ndarray, float]:
    """Rejection sampler with base proposals; returns (samples, acceptance rate).

    Aborts with ValueError when, after `min_proposals` proposals, the running
    acceptance rate is below `min_rate`.
    """
    if spec.kind is not MeasureKind.EXP_FAMILY:
        raise ValueError("sample_exp_family needs an exponential-family spec")
    if not 3 <= spec.n_leaves <= 7:
        raise ValueError("sampling supports 3 <= N <= 7")
    base = MeasureSpec(MeasureKind.BASE, spec.n_leaves, spec.height_cap)
    mu = as_metric_vector(spec.center).values
    kept, proposed, accepted = [], 0, 0
    for rng in _batches(seed):
        w = _base_batch(base, rng, SAMPLE_BATCH)
        d = w - mu
        dist = d.max(axis=1) - d.min(axis=1)
        u = rng.uniform(size=w.shape[0])
        ok = u < np.exp(-dist / spec.scale)
        kept.append(w[ok])
        proposed += w.shape[0]
        accepted += int(ok.sum())
        if accepted >= count:
            break
        if proposed >= min_proposals and accepted / proposed < min_rate:
            raise ValueError(
                f"acceptance rate {accepted / proposed:.3g} after {proposed} proposals is below {min_rate:g}; "
                "increase the scale or move the center"
            )
    return np.vstack(kept)[:count], accepted / proposed
