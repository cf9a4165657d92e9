"""Benchmark protocol: pair selection by overlap, alignment metrics and
Welch's one-way ANOVA."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import KdIndex, PointCloud, voxel_downsample
from .geom import RigidTransform


@dataclass(frozen=True)
class PairSpec:
    ref_id: int
    target_id: int
    overlap: float
    gt: RigidTransform | None = None  # maps target points into the reference frame

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")

    @property
    def pair_id(self) -> str:
        return f"{self.ref_id}-{self.target_id}"


@dataclass(frozen=True)
class RunRecord:
    pair: PairSpec
    method: str
    mean_p2p: float
    runtime: float
    seed: int
    trans_err: float | None = None
    rot_err: float | None = None

    def __post_init__(self):
        for name in ("mean_p2p", "runtime", "trans_err", "rot_err"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def _directed_overlap(A: PointCloud, B: PointCloud, radius: float) -> float:
    _, dist = KdIndex(B).query(A.points)
    return float(np.count_nonzero(dist <= radius)) / len(A)


def overlap_fraction(A: PointCloud, B: PointCloud, radius: float, symmetric: bool = True,
                     voxel: float | None = None) -> float:
    """Share of points with a neighbour in the other cloud within ``radius``.

    Both clouds are first voxel-downsampled (at ``radius`` unless ``voxel``
    is given). The symmetric variant returns the smaller of the two
    directed fractions.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if len(A) == 0 or len(B) == 0:
        raise ValueError("overlap needs non-empty clouds")
    v = radius if voxel is None else voxel
    a, b = voxel_downsample(A, v), voxel_downsample(B, v)
    f = _directed_overlap(a, b, radius)
    if symmetric:
        f = min(f, _directed_overlap(b, a, radius))
    return f


def select_pairs(clouds, threshold: float, poses=None, radius: float = 0.7) -> list[PairSpec]:
    """Greedy walk over an ordered sequence of clouds.

    From the current reference the target advances while the *next* cloud
    still overlaps the reference by at least ``threshold`` (clouds are
    compared in a common frame when ``poses`` are supplied). The pair is
    emitted at the last such cloud, which always lies at least one step
    ahead, and that target becomes the new reference.
    """
    clouds = list(clouds)
    if len(clouds) < 2:
        raise ValueError("need at least two clouds")
    if poses is not None and len(poses) != len(clouds):
        raise ValueError("need one pose per cloud")
    world = clouds if poses is None else [c.transformed(T) for c, T in zip(clouds, poses)]
    memo = {}

    def ov(i, j):
        if (i, j) not in memo:
            memo[i, j] = overlap_fraction(world[i], world[j], radius)
        return memo[i, j]

    pairs, ref, n = [], 0, len(clouds)
    while ref < n - 1:
        target = ref + 1
        while target + 1 < n and ov(ref, target + 1) >= threshold:
            target += 1
        gt = None
        if poses is not None:
            gt = poses[ref].inverse().compose(poses[target])
        pairs.append(PairSpec(ref, target, ov(ref, target), gt))
        ref = target
    return pairs


def mean_p2p_distance(source: PointCloud, reference: PointCloud, T: RigidTransform) -> float:
    """Mean (unsquared) nearest-neighbour distance of ``T @ source`` to ``reference``."""
    if len(source) == 0 or len(reference) == 0:
        raise ValueError("mean point-to-point distance needs non-empty clouds")
    index = reference if isinstance(reference, KdIndex) else KdIndex(reference)
    _, d2 = index.query_transformed(source.points, T.rotation, T.translation)
    return float(np.sqrt(d2).mean())


# Regularised incomplete beta via the Lentz continued fraction.

def _betacf(a, b, x, max_iter=500, eps=3e-16):
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc needs 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f: float, df1: float, df2: float) -> float:
    """``P(F > f)`` for an F(df1, df2) variable."""
    if f <= 0:
        return 1.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def welch_anova(*groups) -> tuple[float, float]:
    """Welch's heteroscedastic one-way ANOVA.

    Accepts the groups either as separate arguments or as one sequence.
    Returns ``(F, p)`` with ``k - 1`` and Welch–Satterthwaite denominator
    degrees of freedom.
    """
    if len(groups) == 1:
        groups = tuple(groups[0])
    data = [np.asarray(g, dtype=float).reshape(-1) for g in groups]
    k = len(data)
    if k < 2:
        raise ValueError("Welch ANOVA needs at least two groups")
    n = np.array([g.size for g in data], dtype=float)
    if np.any(n < 2):
        raise ValueError("every group needs at least two samples")
    means = np.array([g.mean() for g in data])
    var = np.array([g.var(ddof=1) for g in data])
    if np.any(~(var > 0)):
        raise ValueError("every group needs non-zero variance")
    if np.all(means == means[0]):
        # exact: the weighted grand mean would otherwise leave rounding residue
        return 0.0, 1.0
    w = n / var
    W = w.sum()
    grand = (w * means).sum() / W
    between = (w * (means - grand) ** 2).sum() / (k - 1)
    lam = ((1.0 - w / W) ** 2 / (n - 1.0)).sum()
    f = between / (1.0 + 2.0 * (k - 2) / (k * k - 1.0) * lam)
    df1 = k - 1.0
    df2 = (k * k - 1.0) / (3.0 * lam)
    return float(f), float(f_survival(f, df1, df2))


def summarize(values) -> dict:
    """Mean, median and quartiles (linear interpolation) of finite values."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"n": 0, "mean": math.nan, "median": math.nan, "q1": math.nan, "q3": math.nan}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"n": int(v.size), "mean": float(v.mean()), "median": float(med), "q1": float(q1), "q3": float(q3)}
