"""Gaussian density primitives: evaluation, sampling and stable log-space sums.

All log-likelihood values are in nats. Conversion to bits happens only at
reporting time (see :func:`geneval.likelihood.nats_to_bits_per_dim`).

Randomness policy: every stochastic function takes an explicit 64-bit seed and
uses the Philox4x64 counter-based generator keyed directly with that seed, so
streams are reproducible across platforms and independent of global state.
Use :func:`subseed` to derive independent seeds for sub-tasks.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "RngSeed",
    "make_rng",
    "subseed",
    "log_sum_exp",
    "IsotropicGaussian",
    "GaussianMixture",
    "SampleMatrix",
    "gaussian_log_density",
    "gmm_log_density",
    "log_density",
    "sample",
]

LOG_2PI = math.log(2.0 * math.pi)

# Seeds are plain unsigned 64-bit integers.
RngSeed = int

# Cap on the number of matrix cells materialized at once by batched
# density evaluations (rows x components); larger problems are chunked.
_BLOCK_CELLS = 1 << 23


def make_rng(seed: RngSeed) -> np.random.Generator:
    """Return a Philox-backed generator keyed with ``seed``."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def subseed(seed: RngSeed, *labels: object) -> RngSeed:
    """Derive an independent 64-bit seed from ``seed`` and a label path.

    Uses BLAKE2b over the seed bytes and the labels, so derived streams are
    stable across runs, platforms and Python versions.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little"))
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def log_sum_exp(values, axis=None):
    """Compute ``log(sum(exp(values)))`` without overflow or underflow.

    Entries may be ``-inf`` (they contribute nothing); slices that are all
    ``-inf`` yield ``-inf``. Safe for magnitudes up to at least 700.

    Raises
    ------
    ValueError
        If ``values`` is empty along the reduced axis ("empty aggregation").
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty aggregation")
    shifted_max = np.max(v, axis=axis, keepdims=True)
    # All--inf slices would produce nan from (-inf) - (-inf); shift those by 0.
    shift = np.where(np.isfinite(shifted_max), shifted_max, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - shift), axis=axis))
    out = out + np.squeeze(shift, axis=axis) if axis is not None else out + shift.reshape(())
    if axis is None:
        return float(out)
    return out


def _as_matrix(x) -> tuple[np.ndarray, bool]:
    """Normalize a vector or matrix of points to (N, D); flag if input was 1-D."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected a vector or matrix of points, got ndim={arr.ndim}")


@dataclass(frozen=True)
class IsotropicGaussian:
    """Gaussian with arbitrary mean and a single shared standard deviation."""

    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64)).copy()
        if mean.ndim != 1 or mean.size < 1:
            raise ValueError("mean must be a nonempty vector")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma > 0):
            raise ValueError(f"sigma must be a positive real, got {sigma}")
        mean.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mean.size

    def as_mixture(self) -> "GaussianMixture":
        """Equivalent single-component mixture with isotropic variance."""
        var = np.full(self.dim, self.sigma**2)
        return GaussianMixture(np.array([1.0]), self.mean[None, :], var[None, :])


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted mixture of diagonal-covariance Gaussians.

    ``means`` is (K, D) and ``variances`` is (K, D): one row per component.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64)).copy()
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64)).copy()
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64)).copy()
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be nonnegative and finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        if mu.shape[0] != w.size or var.shape != mu.shape:
            raise ValueError(
                f"shape mismatch: weights {w.shape}, means {mu.shape}, variances {var.shape}"
            )
        if not np.all(np.isfinite(mu)):
            raise ValueError("component means must be finite")
        if not (np.all(var > 0) and np.all(np.isfinite(var))):
            raise ValueError("variances must be positive and finite")
        for a in (w, mu, var):
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        """Mixture mean, sum_k w_k mu_k."""
        return self.weights @ self.means

    def per_dim_variance(self) -> np.ndarray:
        """Marginal variance per dimension by the law of total variance."""
        m = self.mean()
        return self.weights @ (self.variances + (self.means - m) ** 2)


@dataclass(frozen=True)
class SampleMatrix:
    """N x D matrix of real observations with optional value-range metadata."""

    data: np.ndarray
    value_range: tuple[float, float] | None = None

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=np.float64)).copy()
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"data must be a nonempty N x D matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("data must be finite")
        if self.value_range is not None:
            lo, hi = (float(v) for v in self.value_range)
            if data.min() < lo or data.max() > hi:
                raise ValueError(f"data outside declared value range [{lo}, {hi}]")
            object.__setattr__(self, "value_range", (lo, hi))
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def gaussian_log_density(model: IsotropicGaussian, x) -> Union[float, np.ndarray]:
    """Log density of an isotropic Gaussian, in nats.

    ``x`` may be a single length-D vector (returns a float) or an (N, D)
    matrix (returns a length-N array).
    """
    pts, single = _as_matrix(x)
    if pts.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: model D={model.dim}, x D={pts.shape[1]}")
    sq = np.sum((pts - model.mean) ** 2, axis=1)
    out = (
        -0.5 * model.dim * LOG_2PI
        - model.dim * math.log(model.sigma)
        - sq / (2.0 * model.sigma**2)
    )
    return float(out[0]) if single else out


def gmm_log_density(model: GaussianMixture, x) -> Union[float, np.ndarray]:
    """Log density of a Gaussian mixture, in nats.

    Computed as a log-sum-exp over ``log w_k + log N_k(x)``; components with
    zero weight contribute ``-inf`` log weight and drop out. Accepts a single
    vector or an (N, D) matrix like :func:`gaussian_log_density`.
    """
    pts, single = _as_matrix(x)
    if pts.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: model D={model.dim}, x D={pts.shape[1]}")
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    inv_var = 1.0 / model.variances  # (K, D)
    # Per-component constants: log w_k - D/2 log 2pi - 1/2 sum_d log var_kd
    #                          - 1/2 sum_d mu_kd^2 / var_kd
    const = (
        log_w
        - 0.5 * model.dim * LOG_2PI
        - 0.5 * np.sum(np.log(model.variances), axis=1)
        - 0.5 * np.sum(model.means**2 * inv_var, axis=1)
    )
    scaled_mu = (model.means * inv_var).T  # (D, K)
    inv_var_t = inv_var.T  # (D, K)

    n = pts.shape[0]
    out = np.empty(n)
    block = max(1, _BLOCK_CELLS // model.n_components)
    for start in range(0, n, block):
        chunk = pts[start : start + block]
        # log N_k(x) + log w_k = const_k + x . (mu_k/var_k) - 1/2 x^2 . (1/var_k)
        logs = const + chunk @ scaled_mu - 0.5 * (chunk**2) @ inv_var_t
        out[start : start + block] = log_sum_exp(logs, axis=1)
    return float(out[0]) if single else out


DensityHandle = Union[IsotropicGaussian, GaussianMixture, Callable[[np.ndarray], np.ndarray]]


def log_density(model: DensityHandle, x) -> Union[float, np.ndarray]:
    """Evaluate the log density of a model object or a raw log-density callable.

    Callables must accept an (N, D) matrix and return a length-N array of
    log densities in nats.
    """
    if isinstance(model, IsotropicGaussian):
        return gaussian_log_density(model, x)
    if isinstance(model, GaussianMixture):
        return gmm_log_density(model, x)
    if callable(model):
        pts, single = _as_matrix(x)
        out = np.asarray(model(pts), dtype=np.float64)
        return float(out[0]) if single else out
    raise TypeError(f"not a density handle: {type(model).__name__}")


def sample(model: Union[IsotropicGaussian, GaussianMixture], n: int, seed: RngSeed) -> SampleMatrix:
    """Draw ``n`` rows from a Gaussian or Gaussian mixture, deterministically per seed.

    Mixture sampling first draws a component index from the weights, then a
    Gaussian draw within that component.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = make_rng(seed)
    if isinstance(model, IsotropicGaussian):
        data = model.mean + model.sigma * rng.standard_normal((n, model.dim))
        return SampleMatrix(data)
    if isinstance(model, GaussianMixture):
        idx = rng.choice(model.n_components, size=n, p=model.weights)
        z = rng.standard_normal((n, model.dim))
        data = model.means[idx] + np.sqrt(model.variances[idx]) * z
        return SampleMatrix(data)
    raise TypeError(f"cannot sample from {type(model).__name__}")
