import numpy as np

from boicp.geom import SearchBounds, pose_to_transform
from boicp.synthetic import make_pair, make_scan_pair, make_scene, make_sequence


def test_scene_deterministic():
    a, b = make_scene(5, 500), make_scene(5, 500)
    assert len(a) == 500 and np.array_equal(a.points, b.points)
    c = make_scene(5, 500, sample_seed=1)
    assert not np.array_equal(a.points, c.points)


def test_pair_ground_truth():
    gt = pose_to_transform([1, 2, 0.5, 0.1, 0.2, 0.3])
    src, ref, g = make_pair(0, 300, gt=gt, resample=False)
    assert g is gt and np.allclose(gt.apply(src.points), ref.points)
    src, ref, g = make_pair(1)
    assert SearchBounds.default().contains(np.zeros(6))
    assert len(src) == len(ref) == 500


def test_scan_pair_and_sequence():
    src, ref, gt = make_scan_pair(0, pose_to_transform([2, 0, 0, 0, 0, 0.2]))
    assert len(src) > 100 and len(ref) > 100
    clouds, poses = make_sequence(0, n_clouds=4)
    assert len(clouds) == len(poses) == 4
    assert all(len(c) > 100 for c in clouds)
