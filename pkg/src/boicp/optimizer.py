"""BO-ICP: Bayesian optimisation of the ICP starting pose.

Every evaluation runs point-to-point ICP from a candidate start pose and
scores the start by the converged mean squared correspondence distance. A
Gaussian process over the (normalised) start-pose coordinates, queried
through expected improvement, proposes the next start.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import surrogate
from .acquisition import AcquisitionConfig, argmax_ei
from .cloud import KdIndex, PointCloud, voxel_downsample
from .errors import DegenerateGeometryError, DegeneratePoseError, NoOverlapError, RegistrationFailedError
from .geom import (
    ROTATION_AXES,
    TRANSLATION_AXES,
    RigidTransform,
    SearchBounds,
    pose_to_transform,
    recenter_pose,
    transform_to_pose,
)
from .icp import IcpConfig, IcpResult, run_icp

MODES = ("nested", "full6dof")

# (random samples, BO iterations, voxel size in metres)
PRESETS = {
    "A": (10, 20, 0.7),
    "B": (20, 35, 0.7),
    "C": (30, 60, 0.6),
}


@dataclass(frozen=True)
class BoConfig:
    n_random: int = 20
    n_iterations: int = 35
    bounds: SearchBounds = field(default_factory=SearchBounds.default)
    voxel: float = 0.7
    mode: str = "nested"
    seed: int = 0
    icp: IcpConfig = field(default_factory=IcpConfig)
    acq: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    kernel: surrogate.Kernel = field(default_factory=surrogate.Kernel)
    noise: float = surrogate.DEFAULT_NOISE
    # re-express the rotation search around the best random seed after seeding
    recenter: bool = False
    # optional a-priori start poses (full 6-vectors) used before random draws
    seed_poses: tuple = ()
    polish_iterations: int = 200

    def __post_init__(self):
        if self.n_random < 1 or self.n_iterations < 0:
            raise ValueError("need n_random >= 1 and n_iterations >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.bounds.dim != 6:
            raise ValueError("BO bounds must cover all six pose coordinates")
        if not self.voxel > 0:
            raise ValueError("voxel size must be positive")

    @property
    def evaluations(self) -> int:
        per_stage = self.n_random + self.n_iterations
        return 2 * per_stage if self.mode == "nested" else per_stage


def preset(name: str, **overrides) -> BoConfig:
    """Published testing configuration ``"A"``, ``"B"`` or ``"C"``."""
    key = str(name).upper()
    if key not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    n_random, n_iterations, voxel = PRESETS[key]
    return BoConfig(n_random=n_random, n_iterations=n_iterations, voxel=voxel, **overrides)


@dataclass
class Sample:
    """One objective evaluation."""

    pose: np.ndarray  # 6-vector in search coordinates
    objective: float | None  # None when ICP failed from this start
    source: str  # "random" | "acquired" | baseline-specific label
    stage: str  # "full" | "rotation" | "translation"
    start: RigidTransform = None
    refined: RigidTransform = None

    def to_dict(self) -> dict:
        return {
            "pose": [float(v) for v in self.pose],
            "objective": None if self.objective is None else float(self.objective),
            "source": self.source,
            "stage": self.stage,
        }


@dataclass
class RegistrationResult:
    """Outcome of a global registration run.

    ``best_transform`` is the polished alignment, ``best_start`` the start
    pose that achieved ``best_objective`` (the minimum over ``history``).
    """

    best_transform: RigidTransform
    best_objective: float
    history: list
    evaluations: int
    wall_time: float
    best_start: RigidTransform = None
    final_objective: float = math.nan
    final_icp: IcpResult = None
    acquisition_fallbacks: int = 0
    stage_counts: dict = field(default_factory=dict)

    def running_best(self) -> list:
        out, best = [], math.inf
        for s in self.history:
            if s.objective is not None and s.objective < best:
                best = s.objective
            out.append(best)
        return out


class Evaluator:
    """Scores start poses by the objective reached by ICP from them."""

    def __init__(self, source: PointCloud, reference: PointCloud, voxel: float, icp: IcpConfig):
        self.source = voxel_downsample(source, voxel) if voxel else source
        self.reference = voxel_downsample(reference, voxel) if voxel else reference
        if len(self.source) < 3 or len(self.reference) < 3:
            raise ValueError(
                f"need >= 3 points per cloud after downsampling at {voxel} m "
                f"(got {len(self.source)} and {len(self.reference)})"
            )
        self.index = KdIndex(self.reference)
        self.icp = icp
        self.calls = 0

    def icp_from(self, start: RigidTransform, cfg: IcpConfig | None = None) -> IcpResult | None:
        self.calls += 1
        try:
            return run_icp(self.source, self.index, start, cfg or self.icp)
        except (NoOverlapError, DegenerateGeometryError):
            return None

    def sample(self, pose, start, source_label, stage) -> Sample:
        res = self.icp_from(start)
        if res is None:
            return Sample(np.asarray(pose, float), None, source_label, stage, start, None)
        return Sample(np.asarray(pose, float), res.objective, source_label, stage, start, res.transform)


def seed_samples(bounds: SearchBounds, n: int, rng=None, seeds=()) -> np.ndarray:
    """``n`` start points drawn uniformly per axis inside ``bounds``.

    Rows of ``seeds`` (a-priori guesses, clipped to the bounds) are used
    first; remaining rows are random.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    out = np.empty((n, bounds.dim))
    given = [bounds.clip(s) for s in list(seeds)[:n]]
    for i, s in enumerate(given):
        out[i] = s
    for i in range(len(given), n):
        out[i] = rng.uniform(bounds.lo, bounds.hi)
    return out


def best_sample(history) -> int | None:
    """Index of the lowest objective in ``history``; earliest wins ties."""
    best, best_i = math.inf, None
    for i, s in enumerate(history):
        if s.objective is not None and s.objective < best:
            best, best_i = s.objective, i
    return best_i


class _Stage:
    """Sequential BO over a subset of pose axes.

    ``embed`` maps a point of the sub-space to the start transform. A GP is
    fitted once some evaluation succeeds; failed evaluations are fed to the
    GP at the worst objective seen so far so the acquisition avoids them.
    """

    def __init__(self, cfg: BoConfig, evaluator: Evaluator, axes, embed, stage: str, rng, history):
        self.cfg = cfg
        self.evaluator = evaluator
        self.axes = list(axes)
        self.bounds = cfg.bounds.subset(self.axes)
        self.embed = embed
        self.stage = stage
        self.rng = rng
        self.history = history
        self.X, self.y = [], []
        self.model = None
        self.fallbacks = 0
        self.best = math.inf

    def full_pose(self, u) -> np.ndarray:
        pose = np.zeros(6)
        pose[self.axes] = u
        return pose

    def _record(self, u, label):
        sample = self.evaluator.sample(self.full_pose(u), self.embed(u), label, self.stage)
        self.history.append(sample)
        if sample.objective is not None:
            self.best = min(self.best, sample.objective)
        self.X.append(np.asarray(u, float))
        self.y.append(sample.objective)
        return sample

    def _targets(self):
        finite = [v for v in self.y if v is not None]
        if not finite:
            return None
        worst = max(finite)
        return np.array([worst if v is None else v for v in self.y])

    def _refit(self):
        y = self._targets()
        if y is None:
            self.model = None
            return
        X = surrogate.normalize(np.array(self.X), self.bounds)
        self.model = surrogate.fit(X, y, self.cfg.kernel, self.cfg.noise)

    def seed(self, seeds=()):
        for u in seed_samples(self.bounds, self.cfg.n_random, self.rng, seeds):
            self._record(u, "random")

    def iterate(self):
        self._refit()
        for _ in range(self.cfg.n_iterations):
            if self.model is None:
                self._record(self.rng.uniform(self.bounds.lo, self.bounds.hi), "random")
                self._refit()
                continue
            sugg = argmax_ei(self.model, self.bounds, self.best, self.cfg.acq, self.rng)
            self.fallbacks += sugg.fallback
            prev_had_failure = any(v is None for v in self.y)
            sample = self._record(sugg.x, "acquired")
            if sample.objective is None or prev_had_failure:
                self._refit()
            else:
                u = surrogate.normalize(sugg.x, self.bounds)
                self.model = surrogate.update(self.model, u, sample.objective)


def _polish(evaluator: Evaluator, cfg: BoConfig, history, t0, stage_counts=None, fallbacks=0):
    i = best_sample(history)
    if i is None:
        raise RegistrationFailedError("ICP failed from every sampled start pose", history)
    best = history[i]
    polish_cfg = replace(cfg.icp, max_iterations=max(cfg.polish_iterations, cfg.icp.max_iterations))
    final = evaluator.icp_from(best.start, polish_cfg)
    if final is None or final.objective > best.objective:
        # unreachable with a deterministic ICP; kept as a guard
        final_T, final_obj = best.refined, best.objective
    else:
        final_T, final_obj = final.transform, final.objective
    return RegistrationResult(
        best_transform=final_T,
        best_objective=best.objective,
        history=history,
        evaluations=len(history),
        wall_time=time.perf_counter() - t0,
        best_start=best.start,
        final_objective=final_obj,
        final_icp=final,
        acquisition_fallbacks=fallbacks,
        stage_counts=stage_counts or {},
    )


def optimize_full(source: PointCloud, reference: PointCloud, cfg: BoConfig) -> RegistrationResult:
    """BO over all six pose coordinates at once."""
    t0 = time.perf_counter()
    evaluator = Evaluator(source, reference, cfg.voxel, cfg.icp)
    rng = np.random.default_rng(cfg.seed)
    history = []
    stage = _Stage(cfg, evaluator, range(6), pose_to_transform, "full", rng, history)
    stage.seed(cfg.seed_poses)
    stage.iterate()
    return _polish(evaluator, cfg, history, t0, {"full": len(history)}, stage.fallbacks)


def optimize_nested(source: PointCloud, reference: PointCloud, cfg: BoConfig) -> RegistrationResult:
    """BO over rotation with zero translation, then over translation with the
    best start rotation held fixed. Each stage spends ``n_random + n_iterations``
    evaluations."""
    t0 = time.perf_counter()
    evaluator = Evaluator(source, reference, cfg.voxel, cfg.icp)
    rng = np.random.default_rng(cfg.seed)
    history = []
    rot_axes, trans_axes = list(ROTATION_AXES), list(TRANSLATION_AXES)

    base = [RigidTransform.identity()]

    def embed_rotation(u):
        pose = np.zeros(6)
        pose[rot_axes] = u
        return recenter_pose(pose, base[0])

    stage1 = _Stage(cfg, evaluator, rot_axes, embed_rotation, "rotation", rng, history)
    stage1.seed([np.asarray(s, float)[rot_axes] for s in cfg.seed_poses])
    if cfg.recenter:
        _recenter(stage1, base)
    stage1.iterate()

    i = best_sample(history)
    if i is None:
        raise RegistrationFailedError("ICP failed from every rotation start", history)
    best_rotation = history[i].start.rotation

    def embed_translation(u):
        return RigidTransform(best_rotation, u)

    n1 = len(history)
    stage2 = _Stage(cfg, evaluator, trans_axes, embed_translation, "translation", rng, history)
    stage2.seed([np.asarray(s, float)[trans_axes] for s in cfg.seed_poses])
    stage2.iterate()
    counts = {"rotation": n1, "translation": len(history) - n1}
    return _polish(evaluator, cfg, history, t0, counts, stage1.fallbacks + stage2.fallbacks)


def _recenter(stage: _Stage, base):
    """Move the rotation search frame onto the best seed so increments stay
    small; seed inputs are re-expressed in the new frame for the GP."""
    i = best_sample(stage.history)
    if i is None:
        return
    B = stage.history[i].start
    base[0] = RigidTransform(B.rotation, np.zeros(3))
    inv = base[0].inverse()
    X = []
    for s in stage.history[-len(stage.X):]:
        try:
            inc = transform_to_pose(inv.compose(s.start))[3:]
        except DegeneratePoseError:
            inc = np.zeros(3)
        X.append(stage.bounds.clip(inc))
    stage.X = X


def optimize(source: PointCloud, reference: PointCloud, cfg: BoConfig) -> RegistrationResult:
    if cfg.mode == "nested":
        return optimize_nested(source, reference, cfg)
    return optimize_full(source, reference, cfg)
