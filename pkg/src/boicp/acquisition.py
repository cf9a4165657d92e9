"""Expected improvement (minimisation form) and its bounded maximisation."""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import ndtr

from .geom import SearchBounds
from .surrogate import GpModel, denormalize, posterior

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
_SQRT5 = math.sqrt(5.0)
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_LINE_ITERS = 10


@dataclass(frozen=True)
class AcquisitionConfig:
    xi: float = 0.0
    n_candidates: int = 2000
    n_refine: int = 20

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError("xi must be >= 0")
        if self.n_candidates < 1 or self.n_refine < 0:
            raise ValueError("n_candidates must be >= 1 and n_refine >= 0")


@dataclass(frozen=True)
class Suggestion:
    """Maximiser output: the point in search units, its EI, and whether the
    best-mean fallback replaced an all-zero EI."""

    x: np.ndarray
    ei: float
    fallback: bool = False


def expected_improvement(mean, variance, y_star, xi=0.0):
    """Expected amount by which a Gaussian ``N(mean, variance)`` undercuts ``y_star - xi``.

    Broadcasts over array inputs. Variances in ``[-1e-8, 0)`` are treated
    as rounding and clamped to zero.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < -1e-8):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(np.maximum(variance, 0.0))
    gain = y_star - xi - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gain / np.where(sigma > 0, sigma, 1.0), 0.0)
    ei = np.where(
        sigma > 0,
        gain * ndtr(z) + sigma * _INV_SQRT_2PI * np.exp(-0.5 * z * z),
        np.maximum(gain, 0.0),
    )
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


class _PointEi:
    """EI at single points with the GP solves done up front.

    The line searches evaluate thousands of lone points, where the generic
    batched path is dominated by call overhead. Uses the explicit inverse
    of the (small) Gram matrix instead of triangular solves.
    """

    def __init__(self, model: GpModel, y_star, xi):
        k = model.kernel
        self.X = model.X / np.asarray(k.length_scales, dtype=float)
        self.inv_ls = 1.0 / np.asarray(k.length_scales, dtype=float)
        self.se = k.variant == "se"
        self.s2 = k.signal_variance
        self.alpha = model.alpha
        self.kinv = cho_solve((model.chol, True), np.eye(model.n))
        self.mean0, self.scale = model.y_mean, model.y_scale
        self.target = y_star - xi

    def __call__(self, u) -> float:
        diff = self.X - u * self.inv_ls
        r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if self.se:
            kv = self.s2 * np.exp(-0.5 * r * r)
        else:
            sr = _SQRT5 * r
            kv = self.s2 * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)
        mean = self.mean0 + self.scale * float(kv @ self.alpha)
        var = max(self.s2 - float(kv @ self.kinv @ kv), 0.0) * self.scale**2
        sigma = math.sqrt(var)
        gain = self.target - mean
        if sigma <= 0:
            return max(gain, 0.0)
        z = gain / sigma
        return max(gain * 0.5 * math.erfc(-z / _SQRT2) + sigma * _INV_SQRT_2PI * math.exp(-0.5 * z * z), 0.0)


def _line_search(ei, u, j, lo, hi):
    """Golden-section maximisation of ``ei`` along coordinate ``j`` in ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    pc, pd = u.copy(), u.copy()
    pc[j], pd[j] = c, d
    fc, fd = ei(pc), ei(pd)
    best_t, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(_LINE_ITERS):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            pc[j] = c
            fc = ei(pc)
            if fc > best_f:
                best_t, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            pd[j] = d
            fd = ei(pd)
            if fd > best_f:
                best_t, best_f = d, fd
    return best_t, best_f


def argmax_ei(model: GpModel, bounds: SearchBounds, y_star: float,
              cfg: AcquisitionConfig | None = None, rng=None) -> Suggestion:
    """Point in ``bounds`` with (approximately) maximal expected improvement.

    Scores ``cfg.n_candidates`` uniform draws from the unit cube (ties go to
    the lowest index), then polishes the winner with ``cfg.n_refine``
    coordinate-wise golden-section line searches whose bracket half-width
    starts at the typical candidate spacing and halves after each sweep over
    the coordinates. If every candidate has zero EI the candidate with the
    lowest posterior mean is returned unpolished, flagged as a fallback.
    """
    cfg = cfg or AcquisitionConfig()
    rng = np.random.default_rng(rng)
    d = model.dim
    if bounds.dim != d:
        raise ValueError(f"bounds have {bounds.dim} axes but the model has {d}")
    U = rng.random((cfg.n_candidates, d))
    mean, var = posterior(model, U)
    ei = expected_improvement(mean, var, y_star, cfg.xi)
    best = int(np.argmax(ei))
    if not ei[best] > 0:
        best = int(np.argmin(mean))
        return Suggestion(denormalize(U[best], bounds), 0.0, fallback=True)

    u = U[best].copy()
    f = float(ei[best])
    point_ei = _PointEi(model, y_star, cfg.xi)
    half = cfg.n_candidates ** (-1.0 / d)
    for step in range(cfg.n_refine):
        j = step % d
        lo, hi = max(0.0, u[j] - half), min(1.0, u[j] + half)
        t, ft = _line_search(point_ei, u, j, lo, hi)
        if ft > f:
            u[j], f = t, ft
        if j == d - 1:
            half *= 0.5
    return Suggestion(denormalize(u, bounds), f)
