"""Acceptance checks. Each test prints one ``[PASS]``/``[FAIL]`` line."""

import json
import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.spatial.distance import cdist
from scipy.spatial.transform import Rotation
from scipy.stats import norm

import boicp
from boicp.acquisition import expected_improvement
from boicp.baseline import PyramidConfig, pyramid_search, random_search
from boicp.cli import main
from boicp.cloud import KdIndex, PointCloud
from boicp.evaluation import welch_anova
from boicp.fileio import load_cloud, save_cloud
from boicp.geom import RigidTransform, SearchBounds, pose_to_transform, rotation_error, translation_error
from boicp.icp import objective, run_icp
from boicp.optimizer import optimize, preset
from boicp.surrogate import fit, posterior
from boicp.synthetic import make_pair


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


# 1 ------------------------------------------------------------------------

def _dense_posterior(X, y, Xq, noise=1e-6, ls=0.2):
    def k(A, B):
        r = cdist(A, B) / ls
        return (1 + math.sqrt(5) * r + 5 * r**2 / 3) * np.exp(-math.sqrt(5) * r)

    m = y.mean()
    s = y.std() if y.size > 1 and y.std() > 0 else 1.0
    Kinv = np.linalg.inv(k(X, X) + noise * np.eye(len(X)))
    Ks = k(Xq, X)
    mean = m + s * Ks @ Kinv @ ((y - m) / s)
    var = s**2 * np.maximum(1.0 - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks), 0.0)
    return mean, var


def test_criterion_1_gp_oracle(capsys):
    rng = np.random.default_rng(1)
    worst, elapsed = 0.0, 0.0
    for i in range(100):
        d = (3, 6)[i % 2]
        n = int(rng.integers(1, 51))
        X = rng.random((n, d))
        y = rng.normal(size=n) * rng.uniform(0.01, 2.0) + rng.normal()
        Xq = rng.random((25, d))
        t0 = time.perf_counter()
        mean, var = posterior(fit(X, y), Xq)
        elapsed += time.perf_counter() - t0
        om, ov = _dense_posterior(X, y, Xq)
        worst = max(worst, np.abs(mean - om).max(), np.abs(var - ov).max())
    report(capsys, 1, worst <= 1e-8 and elapsed < 5.0,
           f"GP vs dense oracle, 100 instances: max abs err {worst:.2e} (tol 1e-8), {elapsed:.3f} s (< 5 s)")


# 2 ------------------------------------------------------------------------

def _ei_quadrature(m, s, y_star):
    lo = m - 40 * s
    if y_star <= lo:
        return 0.0
    pts = [m] if lo < m < y_star else None
    val, _ = integrate.quad(lambda y: (y_star - y) * norm.pdf(y, m, s), lo, y_star,
                            points=pts, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def test_criterion_2_ei_oracle(capsys):
    worst = 0.0
    for m in np.linspace(-2, 2, 10):
        for s in np.geomspace(0.01, 3.0, 10):
            for y_star in np.linspace(-2, 2, 10):
                err = abs(expected_improvement(m, s * s, y_star) - _ei_quadrature(m, s, y_star))
                worst = max(worst, err)
    report(capsys, 2, worst <= 1e-6, f"closed-form EI vs quadrature on 10x10x10 grid: max abs err {worst:.2e} (tol 1e-6)")


# 3 ------------------------------------------------------------------------

def test_criterion_3_icp_correctness(capsys):
    rng = np.random.default_rng(3)
    worst_t = worst_r = 0.0
    monotone = True
    for _ in range(50):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        gt = RigidTransform(Rotation.from_rotvec(axis * rng.uniform(0, 0.3)).as_matrix(), d * rng.uniform(0, 0.3))
        src, ref, _ = make_pair(rng, 500, gt=gt, resample=False)
        res = run_icp(src, ref)
        worst_t = max(worst_t, translation_error(res.transform, gt))
        worst_r = max(worst_r, rotation_error(res.transform, gt))
        h = res.objective_history
        monotone &= all(b <= a for a, b in zip(h, h[1:]))
    report(capsys, 3, worst_t <= 1e-4 and worst_r <= 1e-4 and monotone,
           f"ICP from identity on 50 pairs: max trans err {worst_t:.2e} m, max rot err {worst_r:.2e} rad "
           f"(tol 1e-4), objective non-increasing: {monotone}")


# 4 ------------------------------------------------------------------------

def test_criterion_4_bo_vs_random(capsys):
    n_pairs, n_seeds = 10, 20
    t0 = time.perf_counter()
    bo_t, bo_r, rs_t, rs_r = [], [], [], []
    for j in range(n_pairs):
        src, ref, gt = make_pair(np.random.default_rng([2024, j]), 500, noise=0.02)
        for seed in range(n_seeds):
            cfg = preset("B", seed=seed)
            bo = optimize(src, ref, cfg)
            rs = random_search(src, ref, cfg.evaluations, cfg.bounds, cfg.icp, seed, cfg.voxel)
            bo_t.append(translation_error(bo.best_transform, gt))
            bo_r.append(rotation_error(bo.best_transform, gt))
            rs_t.append(translation_error(rs.best_transform, gt))
            rs_r.append(rotation_error(rs.best_transform, gt))
    elapsed = time.perf_counter() - t0
    bo_r, rs_r = np.array(bo_r), np.array(rs_r)
    med_bo, med_rs = float(np.median(bo_t)), float(np.median(rs_t))
    lower = float(np.mean(bo_r < rs_r))
    ties = float(np.mean(bo_r == rs_r))
    ok = med_bo <= med_rs and lower >= 0.6
    report(capsys, 4, ok,
           f"BO preset B vs random (110 evals) on {n_pairs}x{n_seeds} cells: median trans err "
           f"{med_bo:.4f} vs {med_rs:.4f} m; rot err strictly lower in {lower:.1%} of cells (need >= 60%; "
           f"exact ties {ties:.1%}, higher {float(np.mean(bo_r > rs_r)):.1%}); median rot err "
           f"{np.median(bo_r):.4f} vs {np.median(rs_r):.4f} rad; {elapsed:.0f} s")


# 5 ------------------------------------------------------------------------

def test_criterion_5_presets(capsys):
    got = [(c.n_random, c.n_iterations, c.voxel) for c in (preset("A"), preset("B"), preset("C"))]
    b = SearchBounds.default()
    bounds_ok = (b.lo[:3].tolist() == [-4.0, -2.0, -1.0] and b.hi[:3].tolist() == [4.0, 2.0, 1.0]
                 and preset("B").bounds.lo.tolist() == b.lo.tolist())
    ok = got == [(10, 20, 0.7), (20, 35, 0.7), (30, 60, 0.6)] and bounds_ok
    report(capsys, 5, ok, f"presets {got}; default translation bounds lo {b.lo[:3].tolist()} hi {b.hi[:3].tolist()}")


# 6 ------------------------------------------------------------------------

def test_criterion_6_pyramid_accounting(capsys):
    src, ref, _ = make_pair(6, 500, noise=0.02)
    cfg = PyramidConfig()
    c = pyramid_search(src, ref, cfg).stage_counts
    expect = cfg.coarse_grid**3 + (cfg.levels - 1) * cfg.top_k * cfg.refine_grid**3 + cfg.top_k
    ok = (c["rotation_level1"] == 1728 and c["translation_level1"] == 1728
          and c["rotation"] == c["translation"] == expect == cfg.stage_evaluations())
    report(capsys, 6, ok, f"level-1 evaluations {c['rotation_level1']}/{c['translation_level1']} (1728); "
                          f"stage counters {c['rotation']}/{c['translation']} vs closed form {expect}")


# 7 ------------------------------------------------------------------------

WELCH_FIXTURE = [
    # statsmodels anova_oneway(use_var="unequal")
    (([2.1, 3.4, 1.9, 5.6, 4.4, 3.3], [6.2, 7.1, 5.9, 8.8], [1.0, 1.5, 0.7, 2.2, 1.9, 1.1, 0.4]),
     33.41668078490861, 0.0004515897807210323),
    (([0.31, 0.29, 0.35, 0.30, 0.33], [0.32, 0.36, 0.28, 0.31, 0.34, 0.30]),
     0.021595416483032558, 0.8864108891711014),
]


def test_criterion_7_welch(capsys):
    worst = 0.0
    for groups, F, p in WELCH_FIXTURE:
        f, pv = welch_anova(*groups)
        worst = max(worst, abs(f - F), abs(pv - p))
    g = [1.0, 2.5, 3.0, 4.5]
    ident = welch_anova(g, list(g), list(g))
    report(capsys, 7, worst <= 1e-6 and ident == (0.0, 1.0),
           f"Welch ANOVA fixture max abs err {worst:.2e} (tol 1e-6); identical groups -> F={ident[0]}, p={ident[1]}")


# 8 ------------------------------------------------------------------------

def test_criterion_8_cli_determinism(capsys, tmp_path):
    args = ["align", "--source", str(boicp.data_path("synthetic_source.ply")),
            "--reference", str(boicp.data_path("synthetic_reference.ply")), "--preset", "B", "--seed", "17"]
    blobs, codes = [], []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        codes.append(main(args + ["--out", str(out)]))
        blobs.append(json.dumps(json.loads(out.read_text())["history"]).encode())
    capsys.readouterr()
    ok = codes == [0, 0] and blobs[0] == blobs[1]
    report(capsys, 8, ok, f"two align runs, seed 17: exit codes {codes}, history bytes identical: {blobs[0] == blobs[1]} "
                          f"({len(blobs[0])} bytes)")


# 9 ------------------------------------------------------------------------

coord = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
cloud_arrays = st.integers(1, 30).flatmap(
    lambda n: st.lists(st.tuples(coord, coord, coord), min_size=n, max_size=n))
VARIANTS = [("ply", False), ("ply", True), ("pcd", False), ("pcd", True), ("xyz", False), ("bin", False)]


def test_criterion_9_property_suites(capsys):
    counts = {"roundtrip": 0, "nn": 0, "objective": 0}
    workdir = Path(tempfile.mkdtemp())

    @settings(max_examples=1000, database=None)
    @given(cloud_arrays, st.sampled_from(VARIANTS))
    def roundtrip(rows, variant):
        ext, binary = variant
        c = PointCloud(np.array(rows, dtype=float))
        path = workdir / f"c.{ext}"
        save_cloud(path, c, binary=binary)
        back = load_cloud(path).points
        expect = c.points.astype(np.float32).astype(float) if ext == "bin" else c.points
        assert np.array_equal(back, expect)
        counts["roundtrip"] += 1

    small = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 1))  # rounding forces ties

    @settings(max_examples=1000, database=None)
    @given(st.lists(st.tuples(small, small, small), min_size=1, max_size=120),
           st.lists(st.tuples(coord.map(lambda v: v / 1000), coord.map(lambda v: v / 1000),
                              coord.map(lambda v: v / 1000)), min_size=1, max_size=20),
           st.integers(1, 16))
    def nn(ref_rows, queries, leaf):
        P = np.array(ref_rows, dtype=float)
        Q = np.array(queries, dtype=float)
        ids, dist = KdIndex(PointCloud(P), leaf_size=leaf).query(Q)
        for q, i, dd in zip(Q, ids, dist):
            diff = P - q
            d2 = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]
            best = int(np.argmin(d2))
            assert i == best
            assert dd == math.sqrt(d2[best])
        counts["nn"] += 1

    @settings(max_examples=1000, database=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 80), st.integers(1, 80))
    def objective_brute(seed, n_ref, n_src):
        r = np.random.default_rng(seed)
        ref = r.uniform(-3, 3, (n_ref, 3))
        src = r.uniform(-3, 3, (n_src, 3))
        T = pose_to_transform(r.uniform(SearchBounds.default().lo, SearchBounds.default().hi))
        moved = T.apply(src)
        d2 = ((moved[:, None, :] - ref[None]) ** 2).sum(-1).min(1)
        got = objective(src, KdIndex(PointCloud(ref)), T)
        assert got == pytest.approx(d2.mean(), rel=1e-12, abs=1e-15)
        counts["objective"] += 1

    failure = None
    try:
        roundtrip()
        nn()
        objective_brute()
    except Exception as exc:  # report, then re-raise through the assertion
        failure = f"{type(exc).__name__}: {exc}"
    ok = failure is None and min(counts.values()) >= 1000
    detail = (f"randomized cases: loader round-trip {counts['roundtrip']}, NN brute force {counts['nn']}, "
              f"objective brute force {counts['objective']} (each >= 1000)")
    report(capsys, 9, ok, detail if failure is None else f"{detail}; first failure {failure}")
