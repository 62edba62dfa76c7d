"""The `palmtree` command line."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from . import vectors
from .comparison import bhv_distance, path_difference, quartet_distance, rf_distance, stability_check
from .newick_io import NewickError, cophenetic_vector, read_newick_lines
from .stats import (
    MeasureKind,
    MeasureSpec,
    fermat_weber,
    frechet_mean,
    grid_center,
    sample_base,
    sample_exp_family,
)
from .symmetry import LeafPermutation, apply_sigma
from .topology import (
    NestedSet,
    classify,
    compatibility_witness,
    compatible_candidates,
    enumerate_rooted_topologies,
    enumerate_unrooted_topologies,
    topology_of,
)
from .treespace import Level, classify_level
from .tropical import trop_dist, trop_segment, tropline_ultrametric
from .vectors import MetricVector

log = logging.getLogger("palmtree")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    tolerance: float = 1e-9
    seed: int = 0
    output: str = "csv"
    verbosity: int = 0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise UsageError("tolerance must be positive")


def fmt(x: float) -> str:
    return f"{float(x):.12g}"


def rounded(x: float) -> float:
    return float(fmt(x))


def cmd_spider_mean(a: float) -> float:
    """Frechet mean position on a three-legged spider.

    Two data points sit at distance 1 out on two legs and one at distance a
    on the third; the mean lies on the third leg at x minimising
    2(1 + x)^2 + (a - x)^2 over x >= 0, which is stuck at 0 until a = 2.
    """
    if a < 0:
        raise ValueError("a must be nonnegative")
    return max(0.0, (a - 2.0) / 3.0)


# --- input ------------------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def read_vectors(path: str) -> list[MetricVector]:
    """MetricVectors from CSV rows `N,w12,...` or JSON objects {n_leaves, values}."""
    text = _read_text(path)
    stripped = text.lstrip()
    try:
        if stripped.startswith(("{", "[")):
            data = json.loads(text)
            items = data if isinstance(data, list) else [data]
            return [MetricVector(int(d["n_leaves"]), d["values"]) for d in items]
        out = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            out.append(MetricVector(int(fields[0]), [float(f) for f in fields[1:]]))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed vector file {path}: {exc}") from exc
    if not out:
        raise UsageError(f"no vectors in {path}")
    return out


def read_points(path: str) -> list[np.ndarray]:
    text = _read_text(path)
    rows = []
    try:
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append(np.array([float(f) for f in line.split(",")]))
    except ValueError as exc:
        raise UsageError(f"malformed point file {path}: {exc}") from exc
    if not rows:
        raise UsageError(f"no points in {path}")
    return rows


def read_trees(path: str):
    try:
        trees = read_newick_lines(_read_text(path))
    except NewickError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if not trees:
        raise UsageError(f"no trees in {path}")
    return trees


# --- output -----------------------------------------------------------------


def vector_row(w: MetricVector) -> str:
    return ",".join([str(w.n_leaves)] + [fmt(x) for x in w.values])


def emit_vectors(ws: Sequence[MetricVector], cfg: Config, out) -> None:
    if cfg.output == "json":
        json.dump([{"n_leaves": w.n_leaves, "values": [rounded(x) for x in w.values]} for w in ws], out)
        out.write("\n")
    else:
        for w in ws:
            out.write(vector_row(w) + "\n")


def emit_table(header: list[str], rows: list[list], cfg: Config, out) -> None:
    def cell(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return fmt(v)
        return str(v)

    if cfg.output == "json":
        recs = [
            {h: (rounded(v) if isinstance(v, float) else v) for h, v in zip(header, row)} for row in rows
        ]
        json.dump(recs, out)
        out.write("\n")
    else:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(cell(v) for v in row) + "\n")


# --- subcommands ----------------------------------------------------------------

LEVELS = {"metric": Level.METRIC, "tree": Level.TREE_METRIC, "ultra": Level.TREE_ULTRAMETRIC}


def run_check(args, cfg: Config, out) -> int:
    want = LEVELS[args.level]
    rows, all_ok = [], True
    for k, w in enumerate(read_vectors(args.file), start=1):
        level = classify_level(w, cfg.tolerance)
        ok = level >= want
        all_ok &= ok
        rows.append([k, level.name.lower(), ok])
    emit_table(["row", "level", "pass"], rows, cfg, out)
    return EXIT_OK if all_ok else EXIT_INVALID


def _pairwise(items, fn, workers: int, consecutive: bool):
    if consecutive:
        jobs = [(k, k + 1) for k in range(0, len(items) - 1, 2)]
    else:
        jobs = list(combinations(range(len(items)), 2))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        vals = list(pool.map(lambda ij: fn(items[ij[0]], items[ij[1]]), jobs))
    return jobs, vals


def run_dist(args, cfg: Config, out) -> int:
    trees = read_trees(args.file)
    metric = args.metric
    inexact = []

    def one(a, b):
        if metric == "tropical":
            return trop_dist(cophenetic_vector(a), cophenetic_vector(b))
        if metric == "bhv":
            d, exact = bhv_distance(a, b, cfg.tolerance)
            if not exact:
                inexact.append(1)
            return d
        if metric == "path":
            return path_difference(a, b)
        if metric == "rf":
            return rf_distance(a, b)
        return quartet_distance(a, b)

    try:
        jobs, vals = _pairwise(trees, one, args.workers, args.pairs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.pairs:
        emit_table(["first", "second", metric], [[i + 1, j + 1, float(v)] for (i, j), v in zip(jobs, vals)], cfg, out)
    else:
        m = np.zeros((len(trees), len(trees)))
        for (i, j), v in zip(jobs, vals):
            m[i, j] = m[j, i] = v
        if cfg.output == "json":
            json.dump([[rounded(x) for x in row] for row in m], out)
            out.write("\n")
        else:
            for row in m:
                out.write(",".join(fmt(x) for x in row) + "\n")
    if inexact:
        log.warning("%d BHV values are path-length upper bounds, not exact geodesics", len(inexact))
    return EXIT_OK


def run_segment(args, cfg: Config, out) -> int:
    (a,), (b,) = read_vectors(args.a)[:1], read_vectors(args.b)[:1]
    if args.ultrametric:
        try:
            trace = tropline_ultrametric(
                a, b, height_cap=args.height_cap, annotate=args.annotate_topology, tol=cfg.tolerance
            )
        except ValueError as exc:
            log.error("%s", exc)
            return EXIT_INVALID
    else:
        trace = trop_segment(a.values, b.values, cfg.tolerance)
    recs = []
    for bp in trace.breakpoints:
        rec = {"lambda": rounded(bp.lam), "point": [rounded(x) for x in bp.vector]}
        if bp.rescaled:
            rec["raw"] = [rounded(x) for x in bp.raw]
        if args.annotate_topology:
            topo = bp.topology if bp.topology is not None else _maybe_topology(bp.vector, cfg)
            rec["topology"] = None if topo is None else str(topo)
        recs.append(rec)
    json.dump(recs, out)
    out.write("\n")
    return EXIT_OK


def _maybe_topology(values, cfg: Config):
    try:
        return topology_of(values, cfg.tolerance)
    except ValueError:
        return None


def run_topology(args, cfg: Config, out) -> int:
    if args.enumerate is not None:
        try:
            tops = (
                enumerate_unrooted_topologies(args.enumerate)
                if args.unrooted
                else enumerate_rooted_topologies(args.enumerate)
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        for t in tops:
            out.write(str(t) + "\n")
        return EXIT_OK
    if args.of is not None:
        status = EXIT_OK
        for w in read_vectors(args.of):
            try:
                out.write(str(topology_of(w, cfg.tolerance)) + "\n")
            except ValueError as exc:
                log.error("%s", exc)
                out.write("invalid\n")
                status = EXIT_INVALID
        return status
    f = _nested(args.classify, args.n)
    c = classify(f)
    emit_table(list(c._fields), [list(c)], cfg, out)
    return EXIT_OK


def _nested(text: str, n: int | None) -> NestedSet:
    if n is None:
        raise UsageError("--n is required with nested-set arguments")
    try:
        return NestedSet.parse(text, n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def run_compat(args, cfg: Config, out) -> int:
    f1, f2 = _nested(args.f1, args.n), _nested(args.f2, args.n)
    try:
        if args.witness is None:
            for f in sorted(compatible_candidates(f1, f2)):
                out.write(str(f) + "\n")
            return EXIT_OK
        target = _nested(args.witness, args.n)
        w = compatibility_witness(f1, f2, target, trials=args.trials, seed=cfg.seed, tol=cfg.tolerance)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    if w is None:
        out.write(f"no witness in {args.trials} trials\n")
    else:
        out.write(f"shift,{fmt(w.shift)}\n")
        emit_vectors([w.w1, w.w2], Config(cfg.tolerance, cfg.seed, "csv"), out)
    return EXIT_OK


def run_sigma(args, cfg: Config, out) -> int:
    try:
        sigma = LeafPermutation.parse(args.perm)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.inverse:
        sigma = sigma.inverse()
    try:
        result = [apply_sigma(w, sigma) for w in read_vectors(args.file)]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    emit_vectors(result, cfg, out)
    return EXIT_OK


def run_stability(args, cfg: Config, out) -> int:
    trees = read_trees(args.file)
    try:
        jobs, reps = _pairwise(trees, lambda a, b: stability_check(a, b, cfg.tolerance), args.workers, True)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = [[i + 1, j + 1, r.d_tr, r.d_bhv, r.exact, r.bound, r.tight] for (i, j), r in zip(jobs, reps)]
    emit_table(["first", "second", "d_tr", "d_bhv", "exact", "bound", "tight"], rows, cfg, out)
    return EXIT_OK if all(r.holds or not r.exact for r in reps) else EXIT_INVALID


def run_center(args, cfg: Config, out) -> int:
    pts = read_points(args.file) if args.points else [w.values for w in read_vectors(args.file)]
    try:
        res = fermat_weber(pts) if args.method == "fw" else frechet_mean(pts)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = [[res.method.value, res.objective, res.iterations, res.converged, " ".join(fmt(x) for x in res.point.coords)]]
    if args.oracle_grid:
        g = grid_center(pts, squared=args.method == "frechet", step=args.grid_step)
        rows.append([g.method.value, g.objective, g.iterations, g.converged, " ".join(fmt(x) for x in g.point.coords)])
    emit_table(["method", "objective", "iterations", "converged", "point"], rows, cfg, out)
    return EXIT_OK


def run_sample(args, cfg: Config, out) -> int:
    try:
        if args.measure == "base":
            spec = MeasureSpec(MeasureKind.BASE, args.n, args.height_cap)
            vals = sample_base(spec, cfg.seed, args.count)
        else:
            if args.center is None or args.sigma is None:
                raise UsageError("--center and --sigma are required for the exponential family")
            center = read_vectors(args.center)[0]
            spec = MeasureSpec(MeasureKind.EXP_FAMILY, args.n, args.height_cap, center.values, args.sigma)
            vals, rate = sample_exp_family(spec, cfg.seed, args.count)
            log.info("acceptance rate %s", fmt(rate))
    except UsageError:
        raise
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    emit_vectors([MetricVector(args.n, v) for v in vals], cfg, out)
    return EXIT_OK


def run_spider(args, cfg: Config, out) -> int:
    try:
        x = cmd_spider_mean(args.a)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out.write(fmt(x) + "\n")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=float, default=None, help="comparison tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", choices=["csv", "json"], default="csv")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="palmtree", description="Tropical tools for phylogenetic tree space.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="classify vectors in the metric hierarchy")
    s.add_argument("file")
    s.add_argument("--level", choices=list(LEVELS), default="metric")
    s.set_defaults(run=run_check)

    s = sub.add_parser("dist", parents=[common], help="distances between Newick trees")
    s.add_argument("file")
    s.add_argument("--metric", choices=["tropical", "bhv", "path", "rf", "quartet"], default="tropical")
    s.add_argument("--pairs", action="store_true", help="consecutive pairs (1,2), (3,4), ... instead of a matrix")
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    s.set_defaults(run=run_dist)

    s = sub.add_parser("segment", parents=[common], help="tropical segment between two vectors")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--ultrametric", action="store_true")
    s.add_argument("--annotate-topology", action="store_true")
    s.add_argument("--height-cap", type=float, default=2.0)
    s.set_defaults(run=run_segment)

    s = sub.add_parser("topology", parents=[common], help="enumerate, read off or classify topologies")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--enumerate", type=int, metavar="N")
    g.add_argument("--of", metavar="FILE")
    g.add_argument("--classify", metavar="NESTED_SET")
    s.add_argument("--unrooted", action="store_true")
    s.add_argument("--n", type=int)
    s.set_defaults(run=run_topology)

    s = sub.add_parser("compat", parents=[common], help="topologies reachable on segments between two cones")
    s.add_argument("f1")
    s.add_argument("f2")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--witness", metavar="F")
    s.add_argument("--trials", type=int, default=100_000)
    s.set_defaults(run=run_compat)

    s = sub.add_parser("sigma", parents=[common], help="relabel leaves of vectors")
    s.add_argument("file")
    s.add_argument("--perm", required=True, help="one-line notation, e.g. 2,3,1,4")
    s.add_argument("--inverse", action="store_true")
    s.set_defaults(run=run_sigma)

    s = sub.add_parser("stability", parents=[common], help="tropical versus BHV distance on consecutive pairs")
    s.add_argument("file")
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    s.set_defaults(run=run_stability)

    s = sub.add_parser("center", parents=[common], help="Fermat-Weber point or Frechet mean")
    s.add_argument("file")
    s.add_argument("--method", choices=["fw", "frechet"], default="fw")
    s.add_argument("--points", action="store_true", help="rows are plain coordinates, not N-prefixed vectors")
    s.add_argument("--oracle-grid", action="store_true")
    s.add_argument("--grid-step", type=float, default=0.01)
    s.set_defaults(run=run_center)

    s = sub.add_parser("sample", parents=[common], help="draw ultrametrics from a measure")
    s.add_argument("--measure", choices=["base", "expfam"], default="base")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--height-cap", type=float, default=1.0)
    s.add_argument("--center")
    s.add_argument("--sigma", type=float)
    s.set_defaults(run=run_sample)

    s = sub.add_parser("spider", parents=[common], help="Frechet mean on the three-legged spider")
    s.add_argument("a", type=float)
    s.set_defaults(run=run_spider)
    return p


def _tolerance(args) -> float:
    if args.tolerance is not None:
        return args.tolerance
    env = os.environ.get("PALMTREE_TOLERANCE")
    if env:
        try:
            return float(env)
        except ValueError as exc:
            raise UsageError(f"PALMTREE_TOLERANCE={env!r} is not a number") from exc
    return vectors.DEFAULT_TOL


def cmd_pipeline(argv: Sequence[str] | None = None, out=None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="palmtree: %(levelname)s: %(message)s"
    )
    try:
        cfg = Config(_tolerance(args), args.seed, args.output, args.verbose)
        return args.run(args, cfg, out)
    except UsageError as exc:
        print(f"palmtree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    return cmd_pipeline(argv)


if __name__ == "__main__":
    sys.exit(main())
