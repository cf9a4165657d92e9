"""Command-line interface: ``boicp align`` and ``boicp bench``.

Exit codes: 0 success, 1 usage or parse error, 2 registration failed
(``align``) or no registrable pairs (``bench``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace

import numpy as np

from .baseline import PyramidConfig, pyramid_search, random_search
from .errors import BoIcpError, ParseError, RegistrationFailedError
from .evaluation import RunRecord, mean_p2p_distance, select_pairs, summarize
from .fileio import CLOUD_FORMATS, list_clouds, load_cloud, load_poses
from .geom import ROTATION_AXES, SearchBounds, rotation_error, translation_error
from .icp import IcpConfig
from .optimizer import BoConfig, optimize, preset

RESULT_FORMAT_VERSION = 1
CSV_HEADER = ("pair_id", "method", "seed", "mean_p2p_m", "trans_err_m", "rot_err_rad", "runtime_s")
METHODS = ("bo", "pyramid", "random")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_bounds(items, degrees: bool = False) -> SearchBounds:
    """Six ``lo:hi`` pairs (x y z roll pitch yaw), comma or space separated."""
    text = " ".join(items).replace(",", " ").split()
    if len(text) != 6:
        raise UsageError(f"--bounds needs six lo:hi pairs, got {len(text)}")
    lo, hi = np.empty(6), np.empty(6)
    for i, pair in enumerate(text):
        try:
            a, b = pair.split(":")
            lo[i], hi[i] = float(a), float(b)
        except ValueError:
            raise UsageError(f"bad bounds pair {pair!r}; expected lo:hi") from None
    if degrees:
        rot = list(ROTATION_AXES)
        lo[rot], hi[rot] = np.radians(lo[rot]), np.radians(hi[rot])
    try:
        return SearchBounds(lo, hi)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_search_args(p):
    p.add_argument("--preset", choices=["A", "B", "C"], default=None,
                   help="published configuration (default B); explicit flags override it")
    p.add_argument("--n-random", type=int, default=None, help="random samples per stage")
    p.add_argument("--n-iters", type=int, default=None, help="BO iterations per stage")
    p.add_argument("--voxel", type=float, default=None, help="downsampling voxel size (m)")
    p.add_argument("--mode", choices=["nested", "full"], default="nested")
    p.add_argument("--bounds", nargs="+", default=None, metavar="LO:HI",
                   help="six lo:hi pairs for x y z roll pitch yaw, e.g. --bounds=-4:4,-2:2,-1:1,-3.1416:3.1416,...")
    p.add_argument("--degrees", action="store_true", help="rotation bounds are given in degrees")
    p.add_argument("--icp-iters", type=int, default=None, help="ICP iterations per evaluation")
    p.add_argument("--max-corr-dist", type=float, default=None, help="correspondence cutoff (m)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boicp", description="Global point-cloud registration with BO-initialised ICP.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("align", help="register one source cloud onto a reference cloud")
    a.add_argument("--source", required=True)
    a.add_argument("--reference", required=True)
    a.add_argument("--format", choices=CLOUD_FORMATS, default=None, help="override extension-based format")
    _add_search_args(a)
    a.add_argument("--method", choices=METHODS, default="bo")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default=None, help="write the JSON result here (default: stdout only summary)")

    b = sub.add_parser("bench", help="run methods over overlap-selected pairs of a cloud sequence")
    b.add_argument("--clouds", required=True, help="directory of clouds in sequence order")
    b.add_argument("--glob", default="*", help="file pattern inside --clouds (default: all files)")
    b.add_argument("--format", choices=CLOUD_FORMATS, default=None)
    b.add_argument("--poses", default=None, help="KITTI or TUM pose file, one pose per cloud")
    b.add_argument("--overlap-threshold", type=float, default=0.5)
    b.add_argument("--overlap-radius", type=float, default=None,
                   help="neighbour radius for overlap (default: the voxel size)")
    _add_search_args(b)
    b.add_argument("--methods", default="bo,random", help="comma list from bo,pyramid,random")
    b.add_argument("--seeds", default="0", help="comma list of integer seeds")
    b.add_argument("--csv", required=True, help="output CSV path")
    return parser


def search_config(args) -> BoConfig:
    """Search settings chosen on the command line (preset B unless overridden)."""
    cfg = preset(args.preset or "B")
    over = {}
    if args.n_random is not None:
        over["n_random"] = args.n_random
    if args.n_iters is not None:
        over["n_iterations"] = args.n_iters
    if args.voxel is not None:
        over["voxel"] = args.voxel
    over["mode"] = "full6dof" if args.mode == "full" else "nested"
    if args.bounds is not None:
        over["bounds"] = parse_bounds(args.bounds, args.degrees)
    icp = IcpConfig()
    if args.icp_iters is not None:
        icp = replace(icp, max_iterations=args.icp_iters)
    if args.max_corr_dist is not None:
        icp = replace(icp, max_correspondence_dist=args.max_corr_dist)
    over["icp"] = icp
    try:
        return replace(cfg, **over)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_method(method: str, source, reference, bo: BoConfig, seed: int):
    """Run one registration method; returns the ``RegistrationResult``."""
    if method == "bo":
        return optimize(source, reference, replace(bo, seed=seed))
    if method == "random":
        return random_search(source, reference, bo.evaluations, bo.bounds, bo.icp, seed, bo.voxel)
    if method == "pyramid":
        return pyramid_search(source, reference, PyramidConfig(bounds=bo.bounds, voxel=bo.voxel), bo.icp)
    raise UsageError(f"unknown method {method!r}")


def _config_dict(method: str, bo: BoConfig) -> dict:
    out = {
        "bounds": {"lo": [float(v) for v in bo.bounds.lo], "hi": [float(v) for v in bo.bounds.hi]},
        "voxel": bo.voxel,
        "icp": {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(bo.icp).items()},
    }
    if method == "bo":
        out.update(n_random=bo.n_random, n_iterations=bo.n_iterations,
                   mode="full" if bo.mode == "full6dof" else "nested",
                   polish_iterations=bo.polish_iterations)
    elif method == "random":
        out.update(budget=bo.evaluations)
    else:
        p = PyramidConfig(bounds=bo.bounds, voxel=bo.voxel)
        out.update(coarse_grid=p.coarse_grid, refine_grid=p.refine_grid, top_k=p.top_k,
                   levels=p.levels, radius=p.radius)
    return out


def result_json(method, bo, seed, result, mean_p2p, runtime) -> dict:
    return {
        "format_version": RESULT_FORMAT_VERSION,
        "method": method,
        "config": _config_dict(method, bo),
        "best_transform": [[float(v) for v in row] for row in result.best_transform.as_matrix()],
        "best_objective": float(result.best_objective),
        "mean_p2p": float(mean_p2p),
        "history": [s.to_dict() for s in result.history],
        "runtime_s": float(runtime),
        "seed": int(seed),
    }


def cmd_align(args) -> int:
    bo = search_config(args)
    source = load_cloud(args.source, args.format)
    reference = load_cloud(args.reference, args.format)
    t0 = time.perf_counter()
    try:
        result = run_method(args.method, source, reference, bo, args.seed)
    except RegistrationFailedError as exc:
        print(f"registration failed: {exc}", file=sys.stderr)
        return 2
    runtime = time.perf_counter() - t0
    p2p = mean_p2p_distance(source, reference, result.best_transform)
    doc = result_json(args.method, bo, args.seed, result, p2p, runtime)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    print(f"{args.method}: objective {result.best_objective:.6g}  mean_p2p {p2p:.4f} m  "
          f"evaluations {result.evaluations}  {runtime:.2f} s")
    return 0


def _bench_job(job):
    method, seed, pair, source, reference, bo = job
    t0 = time.perf_counter()
    try:
        result = run_method(method, source, reference, bo, seed)
    except RegistrationFailedError:
        return None
    runtime = time.perf_counter() - t0
    T = result.best_transform
    trans = rot = None
    if pair.gt is not None:
        trans, rot = translation_error(T, pair.gt), rotation_error(T, pair.gt)
    return RunRecord(pair, method, mean_p2p_distance(source, reference, T), runtime, seed, trans, rot)


def worker_count(n_jobs: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("BOICP_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise UsageError(f"BOICP_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_jobs))


def _fmt(v):
    return "" if v is None else repr(float(v))


def cmd_bench(args) -> int:
    bo = search_config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"--methods must list names from {METHODS}")
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise UsageError("--seeds must be a comma list of integers") from None
    if not 0.0 <= args.overlap_threshold <= 1.0:
        raise UsageError("--overlap-threshold must lie in [0, 1]")
    paths = list_clouds(args.clouds, args.glob)
    if len(paths) < 2:
        print(f"no pairs found: {len(paths)} cloud(s) match {args.glob!r} in {args.clouds}", file=sys.stderr)
        return 2
    clouds = [load_cloud(p, args.format) for p in paths]
    poses = None
    if args.poses:
        poses = load_poses(args.poses)
        if len(poses) != len(clouds):
            raise ParseError(f"{len(poses)} poses for {len(clouds)} clouds", path=args.poses)
    radius = args.overlap_radius or bo.voxel
    pairs = [p for p in select_pairs(clouds, args.overlap_threshold, poses, radius)
             if p.overlap >= args.overlap_threshold]
    if not pairs:
        print(f"no pairs found with overlap >= {args.overlap_threshold}", file=sys.stderr)
        return 2

    jobs = [(m, s, pair, clouds[pair.target_id], clouds[pair.ref_id], bo)
            for pair in pairs for m in methods for s in seeds]
    n_workers = worker_count(len(jobs))
    if n_workers == 1:
        records = [_bench_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_bench_job, jobs))
    rows = []
    for (m, s, pair, *_), rec in zip(jobs, records):
        if rec is None:
            print(f"warning: {m} failed on pair {pair.pair_id} seed {s}", file=sys.stderr)
            continue
        rows.append(rec)
    rows.sort(key=lambda r: ((r.pair.ref_id, r.pair.target_id), r.method, r.seed))
    with open(args.csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.pair.pair_id, r.method, r.seed, _fmt(r.mean_p2p), _fmt(r.trans_err),
                        _fmt(r.rot_err), _fmt(r.runtime)])
    print(f"{len(pairs)} pair(s), {len(rows)} run(s) -> {args.csv}")
    print(f"{'method':<8} {'metric':<12} {'n':>4} {'mean':>10} {'median':>10} {'q1':>10} {'q3':>10}")
    for m in methods:
        mine = [r for r in rows if r.method == m]
        for label, key in (("mean_p2p_m", "mean_p2p"), ("trans_err_m", "trans_err"), ("rot_err_rad", "rot_err")):
            st = summarize([getattr(r, key) for r in mine])
            if st["n"] == 0:
                continue
            print(f"{m:<8} {label:<12} {st['n']:>4} {st['mean']:>10.4f} {st['median']:>10.4f} "
                  f"{st['q1']:>10.4f} {st['q3']:>10.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "align":
            return cmd_align(args)
        return cmd_bench(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"boicp: error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        print(f"boicp: error: {exc}", file=sys.stderr)
        return 1
    except BoIcpError as exc:
        print(f"boicp: registration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
