"""Gaussian-process regression over normalised pose coordinates.

Targets are centred (and scaled by their standard deviation when there is
more than one distinct value) before fitting; predictions are mapped back to
objective units. Hyperparameters are fixed, never optimised.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericalError
from .geom import SearchBounds

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
DEFAULT_NOISE = 1e-6

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class Kernel:
    """Stationary covariance function.

    Parameters
    ----------
    variant : {"matern52", "se"}
    length_scales : float or sequence of float
        Per-dimension length scales in normalised units (a scalar is
        broadcast to every dimension).
    signal_variance : float
    """

    variant: str = "matern52"
    length_scales: float | tuple = 0.2
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.variant not in ("matern52", "se"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if np.any(ls <= 0) or self.signal_variance <= 0:
            raise ValueError("kernel hyperparameters must be positive")
        object.__setattr__(self, "length_scales", tuple(ls.tolist()) if ls.size > 1 else float(ls[0]))

    def scaled_distance(self, A, B) -> np.ndarray:
        ls = np.asarray(self.length_scales, dtype=float)
        A = np.asarray(A, dtype=float) / ls
        B = np.asarray(B, dtype=float) / ls
        diff = A[:, None, :] - B[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def __call__(self, A, B) -> np.ndarray:
        r = self.scaled_distance(A, B)
        if self.variant == "se":
            return self.signal_variance * np.exp(-0.5 * r * r)
        sr = _SQRT5 * r
        return self.signal_variance * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


@dataclass(frozen=True, eq=False)
class GpModel:
    X: np.ndarray
    y: np.ndarray  # raw observations, objective units
    kernel: Kernel
    noise_variance: float
    y_mean: float
    y_scale: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def y_standardized(self) -> np.ndarray:
        return (self.y - self.y_mean) / self.y_scale


def normalize(p, bounds: SearchBounds) -> np.ndarray:
    """Affine map of a point inside ``bounds`` onto the unit cube."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != bounds.dim:
        raise ValueError(f"expected {bounds.dim} coordinates, got {p.shape[-1]}")
    if not bounds.contains(p, tol=1e-12 * max(1.0, float(np.abs(bounds.width).max()))):
        raise ValueError(f"point {p} lies outside the search bounds")
    return np.clip((p - bounds.lo) / bounds.width, 0.0, 1.0)


def denormalize(u, bounds: SearchBounds) -> np.ndarray:
    return bounds.lo + np.clip(np.asarray(u, dtype=float), 0.0, 1.0) * bounds.width


def _standardize(y: np.ndarray):
    mean = float(y.mean())
    std = float(y.std())
    if y.size < 2 or not std > 0:
        std = 1.0
    return mean, std


def _cholesky(K: np.ndarray, start_jitter: float = 0.0):
    n = K.shape[0]
    for jitter in JITTER_LADDER:
        if jitter < start_jitter:
            continue
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("kernel matrix not positive definite after jitter ladder")


def fit(X, y, kernel: Kernel | None = None, noise: float = DEFAULT_NOISE) -> GpModel:
    """Condition a zero-mean GP prior on ``(X, y)``.

    Raises
    ------
    NumericalError
        If the Gram matrix cannot be factorised even with 1e-6 jitter.
    """
    kernel = kernel or Kernel()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError("need at least one observation and one target per input row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    if noise < 0:
        raise ValueError("noise variance must be >= 0")
    mean, scale = _standardize(y)
    K = kernel(X, X) + noise * np.eye(X.shape[0])
    L, jitter = _cholesky(K)
    alpha = cho_solve((L, True), (y - mean) / scale)
    return GpModel(X, y, kernel, float(noise), mean, scale, L, alpha, jitter)


def posterior(model: GpModel, x):
    """Posterior mean and latent-function variance at one or more inputs.

    A single ``(d,)`` input returns two floats; an ``(m, d)`` batch returns
    two arrays. The variance is clamped at zero.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xq = np.atleast_2d(x)
    Ks = model.kernel(Xq, model.X)
    mean = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = model.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
    mean = model.y_mean + model.y_scale * mean
    var = np.maximum(var, 0.0) * model.y_scale**2
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def update(model: GpModel, x, y) -> GpModel:
    """Return a new model conditioned on one more observation.

    Extends the Cholesky factor by one row when that stays well posed;
    otherwise (jittered model, duplicate input with tiny noise) refits.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    X = np.vstack([model.X, x])
    Y = np.append(model.y, float(y))
    if model.jitter == 0.0:
        k = model.kernel(model.X, x)[:, 0]
        ell = solve_triangular(model.chol, k, lower=True, check_finite=False)
        kxx = model.kernel.signal_variance + model.noise_variance
        d2 = kxx - ell @ ell
        if d2 > 1e-12 * kxx:
            n = model.n
            L = np.zeros((n + 1, n + 1))
            L[:n, :n] = model.chol
            L[n, :n] = ell
            L[n, n] = np.sqrt(d2)
            mean, scale = _standardize(Y)
            alpha = cho_solve((L, True), (Y - mean) / scale)
            return replace(model, X=X, y=Y, y_mean=mean, y_scale=scale, chol=L, alpha=alpha)
    return fit(X, Y, model.kernel, model.noise_variance)
