import numpy as np
import pytest

from boicp.baseline import PyramidConfig, pyramid_search, random_search
from boicp.geom import pose_to_transform, rotation_error, translation_error
from boicp.synthetic import make_pair


def test_closed_form_counts():
    cfg = PyramidConfig()
    assert cfg.stage_evaluations() == 1728 + 2 * 10 * 216 + 10
    assert PyramidConfig(coarse_grid=2, top_k=20).stage_evaluations(3) == 8 + 2 * 8 * 216 + 8
    with pytest.raises(ValueError):
        PyramidConfig(levels=0)


def test_pyramid_counts_and_result():
    gt = pose_to_transform([0.5, -0.3, 0.1, 0.0, 0.1, 0.8])
    src, ref, _ = make_pair(4, 400, gt=gt, noise=0.01)
    cfg = PyramidConfig(coarse_grid=6, refine_grid=3, top_k=4)
    res = pyramid_search(src, ref, cfg)
    c = res.stage_counts
    assert c["rotation_level1"] == c["translation_level1"] == 216
    assert c["rotation"] == c["translation"] == cfg.stage_evaluations()
    assert c["rotation_icp"] == c["translation_icp"] == 4
    assert len(res.history) == 8
    assert translation_error(res.best_transform, gt) < 0.3
    assert rotation_error(res.best_transform, gt) < 0.1


def test_random_search_prefix_and_budget():
    src, ref, _ = make_pair(6, 300)
    a = random_search(src, ref, 5, seed=2)
    b = random_search(src, ref, 8, seed=2)
    assert len(a.history) == 5 and a.stage_counts == {"full": 5}
    assert all(np.array_equal(x.pose, y.pose) for x, y in zip(a.history, b.history))
    assert b.best_objective <= a.best_objective
    with pytest.raises(ValueError):
        random_search(src, ref, 0)
