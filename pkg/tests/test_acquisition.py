import math

import numpy as np
import pytest

from boicp.acquisition import AcquisitionConfig, _PointEi, argmax_ei, expected_improvement
from boicp.geom import SearchBounds
from boicp.surrogate import fit, posterior

# EI by adaptive quadrature at 30 significant digits
QUADRATURE = [
    ((0.0, 1.0, 0.0), 0.39894228040143267794),
    ((0.5, 0.2, 0.3), 0.016663094117537260602),
    ((-1.0, 2.0, 1.0), 2.1666309411753725968),
    ((3.0, 0.5, 0.1), 2.7093486597647033533e-10),
    ((0.1, 1e-3, 0.1005), 0.00069779655740130634399),
]


@pytest.mark.parametrize("args,expected", QUADRATURE)
def test_matches_quadrature(args, expected):
    mean, sigma, y_star = args
    assert expected_improvement(mean, sigma**2, y_star) == pytest.approx(expected, abs=1e-12, rel=1e-9)


def test_zero_variance_and_xi():
    assert expected_improvement(1.0, 0.0, 3.0) == 2.0
    assert expected_improvement(3.0, 0.0, 1.0) == 0.0
    assert expected_improvement(1.0, -1e-10, 3.0) == 2.0
    with pytest.raises(ValueError):
        expected_improvement(1.0, -1e-3, 3.0)
    assert expected_improvement(0.0, 1.0, 0.0, xi=0.5) < expected_improvement(0.0, 1.0, 0.0)


def test_monotone_in_mean_and_sigma():
    means = np.linspace(-2, 2, 41)
    ei = expected_improvement(means, np.ones_like(means), 0.0)
    assert np.all(np.diff(ei) < 0)
    sig = np.linspace(0.01, 3, 40)
    ei = expected_improvement(np.zeros_like(sig), sig**2, 0.0)
    assert np.all(np.diff(ei) > 0)


def test_point_evaluator_matches_batch(rng):
    for variant in ("matern52", "se"):
        from boicp.surrogate import Kernel

        m = fit(rng.random((25, 3)), rng.normal(size=25), Kernel(variant))
        U = rng.random((40, 3))
        mu, var = posterior(m, U)
        pe = _PointEi(m, 0.1, 0.01)
        assert np.allclose([pe(u) for u in U], expected_improvement(mu, var, 0.1, 0.01), atol=1e-12)


def test_argmax_ei_in_bounds_and_deterministic(rng):
    b = SearchBounds([-4, -2, -1], [4, 2, 1])
    X = rng.random((8, 3))
    y = ((X - 0.3) ** 2).sum(1)
    m = fit(X, y)
    a = argmax_ei(m, b, y.min(), rng=7)
    c = argmax_ei(m, b, y.min(), rng=7)
    assert np.array_equal(a.x, c.x) and a.ei == c.ei
    assert b.contains(a.x) and a.ei > 0 and not a.fallback
    # polishing never lowers the best candidate's EI
    raw = argmax_ei(m, b, y.min(), AcquisitionConfig(n_refine=0), rng=7)
    assert a.ei >= raw.ei


def test_all_zero_ei_falls_back_to_best_mean():
    X = np.array([[0.1], [0.9]])
    m = fit(X, [0.0, 1.0], noise=1e-6)
    b = SearchBounds([0.0], [1.0])
    s = argmax_ei(m, b, -1e9, AcquisitionConfig(n_candidates=50), rng=0)
    assert s.fallback and s.ei == 0.0
    U = np.random.default_rng(0).random((50, 1))
    assert s.x[0] == pytest.approx(U[np.argmin(posterior(m, U)[0]), 0])


def test_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(xi=-1)
    with pytest.raises(ValueError):
        AcquisitionConfig(n_candidates=0)
    assert AcquisitionConfig().n_candidates == 2000 and math.isclose(AcquisitionConfig().xi, 0.0)
