"""Synthetic scenes, registration pairs and scan sequences with ground truth."""

from __future__ import annotations

import numpy as np

from .cloud import PointCloud
from .geom import RigidTransform, SearchBounds, pose_to_transform


def _box_surface(rng, n, center, size):
    """``n`` points on the side and top faces of an axis-aligned box on z=0."""
    sx, sy, sz = size
    areas = np.array([sx * sz, sx * sz, sy * sz, sy * sz, sx * sy])
    face = rng.choice(5, size=n, p=areas / areas.sum())
    u, v = rng.random(n), rng.random(n)
    pts = np.empty((n, 3))
    for f in range(5):
        m = face == f
        if f < 2:  # +-y faces
            pts[m] = np.c_[(u[m] - 0.5) * sx, np.full(m.sum(), (f - 0.5) * sy), v[m] * sz]
        elif f < 4:  # +-x faces
            pts[m] = np.c_[np.full(m.sum(), (f - 2.5) * sx), (u[m] - 0.5) * sy, v[m] * sz]
        else:
            pts[m] = np.c_[(u[m] - 0.5) * sx, (v[m] - 0.5) * sy, np.full(m.sum(), sz)]
    return pts + np.array([center[0], center[1], 0.0])


def make_scene(seed=None, n_points: int = 500, extent=(12.0, 8.0), sample_seed=None) -> PointCloud:
    """Outdoor-like scene on an ``extent`` footprint around the origin: ground
    patch, an L-shaped wall pair, three boxes and three poles.

    ``seed`` fixes the layout (object placement and size); ``sample_seed``,
    when given, draws a different surface sampling of that same layout.
    """
    layout = np.random.default_rng(seed)
    ex, ey = extent
    hx, hy = ex / 2 - 1.0, ey / 2 - 1.0
    boxes = [(layout.uniform([-hx, -hy], [hx, hy]), layout.uniform([0.6, 0.6, 0.6], [2.4, 2.4, 2.2]))
             for _ in range(3)]
    poles = [(*layout.uniform([-hx, -hy], [hx, hy]), layout.uniform(1.5, 3.5)) for _ in range(3)]
    rng = layout if sample_seed is None else np.random.default_rng(sample_seed)
    parts = []
    # ground, walls, objects share points roughly by visible area
    n_ground = n_points * 3 // 10
    n_walls = n_points * 3 // 10
    n_objects = n_points - n_ground - n_walls
    parts.append(np.c_[(rng.random(n_ground) - 0.5) * ex, (rng.random(n_ground) - 0.5) * ey,
                       rng.normal(0, 0.02, n_ground)])
    wall_a = int(n_walls * ex / (ex + 0.6 * ey))
    wall_b = n_walls - wall_a
    h = 2.5
    parts.append(np.c_[(rng.random(wall_a) - 0.5) * ex, np.full(wall_a, ey / 2), rng.random(wall_a) * h])
    parts.append(np.c_[np.full(wall_b, -ex / 2), ey / 2 - rng.random(wall_b) * 0.6 * ey,
                       rng.random(wall_b) * h * 0.7])
    n_box = n_objects // 2
    per = np.full(3, n_box // 3)
    per[: n_box - per.sum()] += 1
    for m, (centre, size) in zip(per, boxes):
        parts.append(_box_surface(rng, m, centre, size))
    n_pole = n_objects - n_box
    per = np.full(3, n_pole // 3)
    per[: n_pole - per.sum()] += 1
    for m, (px, py, ph) in zip(per, poles):
        ang = rng.random(m) * 2 * np.pi
        parts.append(np.c_[px + 0.15 * np.cos(ang), py + 0.15 * np.sin(ang), rng.random(m) * ph])
    return PointCloud(np.vstack(parts))


def random_pose(rng, bounds: SearchBounds | None = None) -> np.ndarray:
    bounds = bounds or SearchBounds.default()
    return np.random.default_rng(rng).uniform(bounds.lo, bounds.hi)


def make_pair(rng=None, n_points: int = 500, gt: RigidTransform | None = None,
              noise: float = 0.0, resample: bool = True, bounds: SearchBounds | None = None):
    """Reference/source clouds with ``reference ≈ gt @ source``.

    With ``resample=False`` the source is exactly ``gt⁻¹ @ reference``;
    otherwise it is an independent draw of the same scene, so no ICP
    solution is exact. ``noise`` adds isotropic Gaussian jitter (metres)
    to the source.
    """
    rng = np.random.default_rng(rng)
    if gt is None:
        gt = pose_to_transform(random_pose(rng, bounds))
    scene_seed = int(rng.integers(2**31))
    reference = make_scene(scene_seed, n_points)
    if resample:
        world = make_scene(scene_seed, n_points, sample_seed=[scene_seed, 1]).points
    else:
        world = reference.points
    src = gt.inverse().apply(world)
    if noise > 0:
        src = src + rng.normal(0.0, noise, src.shape)
    return PointCloud(src), reference, gt


def make_scan_pair(rng=None, gt: RigidTransform | None = None, scan_range: float = 8.0,
                   n_world: int = 1600, noise: float = 0.02, bounds: SearchBounds | None = None):
    """Two range-limited scans of one scene taken from sensor poses related by ``gt``.

    The reference scan is centred on the origin, the source scan on
    ``gt``'s translation, so overlap shrinks as the offset grows. Each scan
    samples the surfaces independently. Returns ``(source, reference, gt)``
    with ``reference ≈ gt @ source`` on the overlap.
    """
    rng = np.random.default_rng(rng)
    if gt is None:
        gt = pose_to_transform(random_pose(rng, bounds))
    seed = int(rng.integers(2**31))
    parts = []
    for k, (dx, dy) in enumerate([(0, 0), (-12, 0), (12, 0), (0, -8), (0, 8)]):
        tile = [make_scene([seed, k], n_world // 5, sample_seed=[seed, k, s]).points for s in (0, 1)]
        for s in (0, 1):
            tile[s] = tile[s] + np.array([dx, dy, 0.0])
        parts.append(tile)
    world_ref = np.vstack([p[0] for p in parts])
    world_src = np.vstack([p[1] for p in parts])
    ref = world_ref[np.linalg.norm(world_ref[:, :2], axis=1) <= scan_range]
    near = np.linalg.norm(world_src[:, :2] - gt.translation[:2], axis=1) <= scan_range
    src = gt.inverse().apply(world_src[near])
    if noise > 0:
        src = src + rng.normal(0.0, noise, src.shape)
        ref = ref + rng.normal(0.0, noise, ref.shape)
    return PointCloud(src), PointCloud(ref), gt


def make_sequence(rng=None, n_clouds: int = 5, step: float = 1.5, scan_range: float = 6.0,
                  n_world: int = 6000):
    """Scans of a long corridor-like world taken along a straight drive.

    Returns ``(clouds, poses)`` where ``poses[i]`` maps scan ``i`` into the
    world frame.
    """
    rng = np.random.default_rng(rng)
    length = step * (n_clouds - 1) + 2 * scan_range
    tiles = []
    n_tiles = int(np.ceil(length / 12.0))
    for k in range(n_tiles):
        tile = make_scene(rng.integers(2**31), n_world // n_tiles).points
        tiles.append(tile + np.array([12.0 * k - scan_range, 0.0, 0.0]))
    world = np.vstack(tiles)
    clouds, poses = [], []
    for i in range(n_clouds):
        yaw = 0.05 * np.sin(i)
        pose = pose_to_transform([step * i, 0.1 * np.cos(i), 0.0, 0.0, 0.0, yaw])
        d = np.linalg.norm(world[:, :2] - pose.translation[:2], axis=1)
        local = pose.inverse().apply(world[d <= scan_range])
        clouds.append(PointCloud(local))
        poses.append(pose)
    return clouds, poses
