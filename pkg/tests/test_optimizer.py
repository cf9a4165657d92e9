import numpy as np
import pytest

from boicp.errors import RegistrationFailedError
from boicp.geom import SearchBounds, pose_to_transform, rotation_error, translation_error
from boicp.icp import IcpConfig
from boicp.optimizer import BoConfig, best_sample, optimize, preset, seed_samples
from boicp.synthetic import make_pair


def small_cfg(**kw):
    return BoConfig(n_random=5, n_iterations=5, **kw)


def test_presets():
    assert [(c.n_random, c.n_iterations, c.voxel) for c in map(preset, "ABC")] == [
        (10, 20, 0.7), (20, 35, 0.7), (30, 60, 0.6)]
    assert preset("b", seed=3).seed == 3
    with pytest.raises(ValueError):
        preset("D")
    assert preset("B").evaluations == 110
    assert preset("B", mode="full6dof").evaluations == 55


def test_config_validation():
    with pytest.raises(ValueError):
        BoConfig(mode="sideways")
    with pytest.raises(ValueError):
        BoConfig(n_random=0)
    with pytest.raises(ValueError):
        BoConfig(bounds=SearchBounds([0, 0, 0], [1, 1, 1]))


def test_seed_samples():
    b = SearchBounds.default()
    s = seed_samples(b, 10, 0, seeds=[np.full(6, 100.0)])
    assert s.shape == (10, 6)
    assert np.array_equal(s[0], b.hi)
    assert all(b.contains(r) for r in s)
    assert np.array_equal(seed_samples(b, 4, 1), seed_samples(b, 4, 1))


def test_nested_accounting_and_determinism():
    src, ref, _ = make_pair(3, 300, noise=0.02)
    cfg = small_cfg(seed=4)
    a, b = optimize(src, ref, cfg), optimize(src, ref, cfg)
    assert len(a.history) == cfg.evaluations == 20
    assert a.stage_counts == {"rotation": 10, "translation": 10}
    assert [s.stage for s in a.history] == ["rotation"] * 10 + ["translation"] * 10
    assert all(np.all(s.pose[:3] == 0) for s in a.history[:10])
    assert [s.to_dict() for s in a.history] == [s.to_dict() for s in b.history]
    i = best_sample(a.history)
    assert a.best_objective == a.history[i].objective
    assert a.final_objective <= a.best_objective
    assert a.running_best()[-1] == a.best_objective


def test_full_mode_accounting():
    src, ref, _ = make_pair(3, 300)
    res = optimize(src, ref, small_cfg(mode="full6dof"))
    assert len(res.history) == 10 and {s.stage for s in res.history} == {"full"}
    assert sum(s.source == "acquired" for s in res.history) == 5


def test_recovers_moderate_offset():
    gt = pose_to_transform([1.0, 0.5, 0.2, 0.1, -0.1, 1.2])
    src, ref, _ = make_pair(11, 500, gt=gt, noise=0.01)
    res = optimize(src, ref, preset("A", seed=0))
    assert translation_error(res.best_transform, gt) < 0.2
    assert rotation_error(res.best_transform, gt) < 0.05


def test_recenter_runs():
    src, ref, _ = make_pair(2, 300)
    res = optimize(src, ref, small_cfg(recenter=True))
    assert len(res.history) == 20


def test_all_failures_raise():
    src, ref, _ = make_pair(0, 200)
    far = type(src)(src.points + 1000.0)
    cfg = small_cfg(icp=IcpConfig(max_correspondence_dist=0.5))
    with pytest.raises(RegistrationFailedError) as err:
        optimize(far, ref, cfg)
    assert len(err.value.history) == 10 and all(s.objective is None for s in err.value.history)
