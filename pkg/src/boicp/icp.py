"""Point-to-point ICP and the alignment objective used by the optimisers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import KdIndex, PointCloud
from .errors import DegenerateGeometryError, NoOverlapError
from .geom import RigidTransform


@dataclass(frozen=True)
class IcpConfig:
    """Inner-loop controls.

    ``max_correspondence_dist`` is infinite by default so every source point
    is paired, which is plain point-to-point ICP.
    """

    max_iterations: int = 50
    rel_tolerance: float = 1e-6
    max_correspondence_dist: float = math.inf

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be > 0")
        if not self.max_correspondence_dist > 0:
            raise ValueError("max_correspondence_dist must be > 0")


@dataclass
class IcpResult:
    transform: RigidTransform
    objective: float
    mean_p2p: float
    iterations_run: int
    converged: bool
    objective_history: list = field(default_factory=list)


def _points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.ascontiguousarray(cloud, dtype=np.float64).reshape(-1, 3)


def _index(reference) -> KdIndex:
    return reference if isinstance(reference, KdIndex) else KdIndex(reference)


def _match(src: np.ndarray, index: KdIndex, T: RigidTransform, max_dist: float):
    return _match_rt(src, index, T.rotation, T.translation, max_dist)


def _match_rt(src, index, R, t, max_dist):
    ids, d2 = index.query_transformed(src, R, t)
    if math.isinf(max_dist):
        return np.arange(src.shape[0]), ids, d2
    keep = np.flatnonzero(d2 <= max_dist * max_dist)
    if keep.size == 0:
        raise NoOverlapError(f"no source point has a reference neighbour within {max_dist} m")
    return keep, ids[keep], d2[keep]


def correspondences(source, index: KdIndex, T: RigidTransform, max_dist: float = math.inf):
    """Nearest-neighbour pairs of ``T @ source`` in the indexed reference.

    Returns
    -------
    src_ids, ref_ids, distances : ndarray
        One entry per kept source point, ordered by source id.
    """
    src = _points(source)
    if src.shape[0] == 0:
        raise ValueError("source cloud is empty")
    keep, ids, d2 = _match(src, _index(index), T, max_dist)
    return keep, ids, np.sqrt(d2)


def objective(source, index: KdIndex, T: RigidTransform, max_dist: float = math.inf) -> float:
    """Mean squared correspondence distance of ``T @ source`` against the reference."""
    src = _points(source)
    if src.shape[0] == 0:
        raise ValueError("source cloud is empty")
    _, _, d2 = _match(src, _index(index), T, max_dist)
    return float(d2.mean())


def _kabsch(A: np.ndarray, B: np.ndarray, w: np.ndarray):
    ca = w @ A
    cb = w @ B
    H = ((A - ca) * w[:, None]).T @ (B - cb)
    U, s, Vt = np.linalg.svd(H)
    if s[0] <= 0.0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateGeometryError("correspondences are collinear or coincident")
    if np.linalg.det(Vt.T @ U.T) < 0:
        Vt = Vt.copy()
        Vt[2] = -Vt[2]
    R = Vt.T @ U.T
    return R, cb - R @ ca


def solve_rigid(source, target, weights=None) -> RigidTransform:
    """Least-squares rigid transform mapping ``source`` rows onto ``target`` rows.

    Centroid alignment plus SVD of the cross-covariance, with the sign of
    the last singular direction flipped when needed so that det(R) = +1.
    """
    A = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    B = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if A.shape != B.shape:
        raise ValueError("source and target must pair up row by row")
    if A.shape[0] < 3:
        raise DegenerateGeometryError(f"need at least 3 pairs, got {A.shape[0]}")
    if weights is None:
        w = np.full(A.shape[0], 1.0 / A.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != A.shape[0] or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative, one per pair, not all zero")
        w = w / w.sum()
    R, t = _kabsch(A, B, w)
    return RigidTransform(R, t)


def run_icp(source, reference, T0: RigidTransform | None = None, cfg: IcpConfig | None = None) -> IcpResult:
    """Alternate nearest-neighbour matching and :func:`solve_rigid` from ``T0``.

    Stops once the relative objective decrease drops below
    ``cfg.rel_tolerance`` or after ``cfg.max_iterations`` solves. A step that
    would raise the objective (possible only with a finite correspondence
    cutoff, or through rounding at convergence) is rejected, so the recorded
    objective sequence never increases.

    ``reference`` may be a :class:`PointCloud` or a prebuilt :class:`KdIndex`.
    """
    cfg = cfg or IcpConfig()
    T = T0 if T0 is not None else RigidTransform.identity()
    src = _points(source)
    if src.shape[0] < 3:
        raise ValueError("ICP needs at least 3 source points")
    index = _index(reference)
    if len(index) < 3:
        raise ValueError("ICP needs at least 3 reference points")
    ref = index.points
    max_dist = cfg.max_correspondence_dist

    # raw arrays in the loop; a validated transform is built once at the end
    R, t = T.rotation, T.translation
    keep, ids, d2 = _match_rt(src, index, R, t, max_dist)
    e = float(d2.mean())
    history = [e]
    converged = e == 0.0
    iterations = 0
    while not converged and iterations < cfg.max_iterations:
        if keep.size < 3:
            raise DegenerateGeometryError(f"need at least 3 pairs, got {keep.size}")
        moved = src[keep] @ R.T + t
        Rs, ts = _kabsch(moved, ref[ids], np.full(keep.size, 1.0 / keep.size))
        R_new, t_new = Rs @ R, Rs @ t + ts
        iterations += 1
        try:
            keep_n, ids_n, d2_n = _match_rt(src, index, R_new, t_new, max_dist)
        except NoOverlapError:
            converged = True
            break
        e_new = float(d2_n.mean())
        if e_new > e:
            converged = True
            break
        decrease = e - e_new
        R, t, keep, ids, d2, e = R_new, t_new, keep_n, ids_n, d2_n, e_new
        history.append(e)
        if e == 0.0 or decrease <= cfg.rel_tolerance * history[-2]:
            converged = True
    return IcpResult(
        transform=T if R is T.rotation else RigidTransform(R, t),
        objective=e,
        mean_p2p=float(np.sqrt(d2).mean()),
        iterations_run=iterations,
        converged=converged,
        objective_history=history,
    )
