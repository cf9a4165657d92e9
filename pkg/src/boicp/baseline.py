"""Comparison initialisers: nested pyramid grid search and pure random search."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud
from .geom import ROTATION_AXES, TRANSLATION_AXES, RigidTransform, SearchBounds, pose_to_transform
from .icp import IcpConfig
from .optimizer import BoConfig, Evaluator, Sample, _polish, best_sample
from .errors import RegistrationFailedError


@dataclass(frozen=True)
class PyramidConfig:
    coarse_grid: int = 12
    refine_grid: int = 6
    top_k: int = 10
    levels: int = 3
    bounds: SearchBounds = field(default_factory=SearchBounds.default)
    voxel: float = 0.7
    # fitness neighbourhood radius, as a multiple of the voxel size
    radius_factor: float = 2.0

    def __post_init__(self):
        if min(self.coarse_grid, self.refine_grid, self.top_k, self.levels) < 1:
            raise ValueError("grid sizes, top_k and levels must all be >= 1")

    @property
    def radius(self) -> float:
        return self.radius_factor * self.voxel

    def stage_evaluations(self, dims: int = 3) -> int:
        """Closed-form grid-plus-ICP evaluation count for one stage."""
        coarse = self.coarse_grid**dims
        k = min(self.top_k, coarse)
        return coarse + (self.levels - 1) * k * self.refine_grid**dims + k


def _fitness(evaluator: Evaluator, start: RigidTransform, radius2: float) -> int:
    """Source points with a reference neighbour inside the radius (higher is better)."""
    _, d2 = evaluator.index.query_transformed(evaluator.source.points, start.rotation, start.translation)
    return int(np.count_nonzero(d2 <= radius2))


def _top(scores, k):
    order = np.argsort(-np.asarray(scores), kind="stable")
    return order[:k]


def _pyramid_stage(evaluator, cfg: PyramidConfig, axes, embed, stage, history, counts):
    bounds = cfg.bounds.subset(axes)
    d = len(axes)
    radius2 = cfg.radius**2
    cell = bounds.width / cfg.coarse_grid
    ticks = [bounds.lo[j] + (np.arange(cfg.coarse_grid) + 0.5) * cell[j] for j in range(d)]
    nodes = np.array(list(itertools.product(*ticks)))
    scores = [_fitness(evaluator, embed(u), radius2) for u in nodes]
    fitness_calls = len(nodes)
    counts[f"{stage}_level1"] = len(nodes)
    keep = _top(scores, cfg.top_k)
    pool, pool_scores = nodes[keep], [scores[i] for i in keep]

    offsets = np.arange(cfg.refine_grid) - (cfg.refine_grid - 1) / 2.0
    delta = cell.copy()
    for level in range(2, cfg.levels + 1):
        delta = delta / 2.0
        fresh = []
        for c in pool:
            axes_vals = [c[j] + offsets * delta[j] for j in range(d)]
            fresh.extend(bounds.clip(np.array(p)) for p in itertools.product(*axes_vals))
        fresh = np.array(fresh)
        fresh_scores = [_fitness(evaluator, embed(u), radius2) for u in fresh]
        fitness_calls += len(fresh)
        # previous survivors compete with the refined nodes
        cand = np.vstack([pool, fresh])
        cand_scores = pool_scores + fresh_scores
        keep = _top(cand_scores, cfg.top_k)
        pool, pool_scores = cand[keep], [cand_scores[i] for i in keep]

    first = len(history)
    for u in pool:
        pose = np.zeros(6)
        pose[list(axes)] = u
        history.append(evaluator.sample(pose, embed(u), "pyramid", stage))
    counts[stage] = fitness_calls + len(pool)
    counts[f"{stage}_icp"] = len(pool)
    i = best_sample(history[first:])
    return None if i is None else history[first + i]


def pyramid_search(source: PointCloud, reference: PointCloud, cfg: PyramidConfig | None = None,
                   icp: IcpConfig | None = None) -> "RegistrationResult":
    """Coarse-to-fine grid over rotation (translation zero), then over
    translation with the winning rotation fixed.

    Each level scores grid nodes by a radius-neighbour count, keeps the
    ``top_k`` best, and builds ``refine_grid``-per-axis grids around them at
    half the previous spacing. ICP is then run from the final ``top_k``
    nodes and the lowest objective wins.
    """
    cfg = cfg or PyramidConfig()
    icp = icp or IcpConfig()
    t0 = time.perf_counter()
    evaluator = Evaluator(source, reference, cfg.voxel, icp)
    history, counts = [], {}
    rot_axes, trans_axes = list(ROTATION_AXES), list(TRANSLATION_AXES)

    def embed_rotation(u):
        pose = np.zeros(6)
        pose[rot_axes] = u
        return pose_to_transform(pose)

    best = _pyramid_stage(evaluator, cfg, rot_axes, embed_rotation, "rotation", history, counts)
    if best is None:
        raise RegistrationFailedError("ICP failed from every pyramid rotation candidate", history)
    rotation = best.start.rotation

    def embed_translation(u):
        return RigidTransform(rotation, u)

    _pyramid_stage(evaluator, cfg, trans_axes, embed_translation, "translation", history, counts)
    bo_like = BoConfig(bounds=cfg.bounds, voxel=cfg.voxel, icp=icp)
    return _polish(evaluator, bo_like, history, t0, counts)


def random_search(source: PointCloud, reference: PointCloud, budget: int,
                  bounds: SearchBounds | None = None, icp: IcpConfig | None = None,
                  seed=0, voxel: float = 0.7) -> "RegistrationResult":
    """Evaluate ``budget`` uniform start poses and polish the best one.

    Poses are drawn one at a time from the seeded stream, so a larger budget
    extends (never reshuffles) a smaller one.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    bounds = bounds or SearchBounds.default()
    icp = icp or IcpConfig()
    t0 = time.perf_counter()
    evaluator = Evaluator(source, reference, voxel, icp)
    rng = np.random.default_rng(seed)
    history = []
    for _ in range(budget):
        pose = rng.uniform(bounds.lo, bounds.hi)
        history.append(evaluator.sample(pose, pose_to_transform(pose), "random", "full"))
    cfg = BoConfig(bounds=bounds, voxel=voxel, icp=icp)
    return _polish(evaluator, cfg, history, t0, {"full": budget})
