"""Fit an isotropic Gaussian to a target by minimizing KLD, MMD or JSD.

The three objectives make different trade-offs on multi-modal targets:
KLD has a closed-form moment-matching minimizer that covers all modes,
while MMD and JSD fits (plain gradient descent) tend to commit to one mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import (
    GaussianMixture,
    IsotropicGaussian,
    RngSeed,
    SampleMatrix,
    gaussian_log_density,
    log_density,
    make_rng,
    subseed,
)

__all__ = [
    "KernelBank",
    "FitConfig",
    "QuadratureGrid",
    "fit_kld",
    "mmd_squared",
    "mmd_squared_grad",
    "fit_mmd",
    "jsd",
    "fit_jsd",
    "median_pairwise_distance",
]

LN2 = math.log(2.0)

# Densities below this are treated as zero inside KL integrands (avoids 0*log 0).
_DENSITY_FLOOR = 1e-300

# Hard cap on tensor-grid size; keeps quadrature honest about its D <= 3 reach.
MAX_GRID_POINTS = 1 << 22


@dataclass(frozen=True)
class KernelBank:
    """Bandwidths of a sum-of-Gaussians kernel k(u, v) = sum_j exp(-|u-v|^2 / 2 s_j^2)."""

    bandwidths: tuple[float, ...]

    def __post_init__(self):
        bw = tuple(float(b) for b in self.bandwidths)
        if len(bw) == 0:
            raise ValueError("kernel bank needs at least one bandwidth")
        if any(not (np.isfinite(b) and b > 0) for b in bw):
            raise ValueError(f"bandwidths must be positive reals, got {bw}")
        object.__setattr__(self, "bandwidths", bw)

    @classmethod
    def median_heuristic(
        cls, samples: SampleMatrix, multipliers=(0.25, 0.5, 1.0, 2.0, 4.0)
    ) -> "KernelBank":
        """Bank of ``multipliers`` times the median pairwise distance of ``samples``."""
        med = median_pairwise_distance(samples)
        if med <= 0:
            raise ValueError("median pairwise distance is zero; samples are degenerate")
        return cls(tuple(m * med for m in multipliers))


def median_pairwise_distance(samples: SampleMatrix, max_rows: int = 2048) -> float:
    """Median Euclidean distance over distinct row pairs.

    Rows beyond ``max_rows`` are thinned by even striding so the pair count
    stays bounded; the subsample is deterministic.
    """
    x = samples.data
    if x.shape[0] > max_rows:
        stride = -(-x.shape[0] // max_rows)
        x = x[::stride]
    d2, _ = _sqdist(x, x)
    iu = np.triu_indices(x.shape[0], k=1)
    if iu[0].size == 0:
        return 0.0
    return float(np.median(np.sqrt(d2[iu])))


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings shared by the MMD and JSD fits."""

    max_iters: int
    step_size: float
    tolerance: float
    init: IsotropicGaussian
    seed: RngSeed

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not isinstance(self.init, IsotropicGaussian):
            raise TypeError("init must be an IsotropicGaussian")


@dataclass(frozen=True)
class QuadratureGrid:
    """Regular tensor grid given per-dimension (lo, hi, points) axes."""

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(pts)) for lo, hi, pts in self.axes)
        if len(axes) == 0:
            raise ValueError("grid needs at least one axis")
        total = 1
        for lo, hi, pts in axes:
            if not hi > lo:
                raise ValueError(f"axis needs hi > lo, got ({lo}, {hi})")
            if pts < 2:
                raise ValueError(f"axis needs at least 2 points, got {pts}")
            total *= pts
        if total > MAX_GRID_POINTS:
            raise ValueError(f"grid of {total} points exceeds cap of {MAX_GRID_POINTS}")
        object.__setattr__(self, "axes", axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @classmethod
    def covering(cls, models, points_per_dim: int = 200, span: float = 8.0) -> "QuadratureGrid":
        """Grid covering the effective support (mean +/- ``span`` std devs) of all models."""
        lo = None
        hi = None
        for model in models:
            if isinstance(model, IsotropicGaussian):
                m_lo = model.mean - span * model.sigma
                m_hi = model.mean + span * model.sigma
            elif isinstance(model, GaussianMixture):
                sd = np.sqrt(model.variances)
                m_lo = np.min(model.means - span * sd, axis=0)
                m_hi = np.max(model.means + span * sd, axis=0)
            else:
                raise TypeError(f"cannot bound support of {type(model).__name__}")
            lo = m_lo if lo is None else np.minimum(lo, m_lo)
            hi = m_hi if hi is None else np.maximum(hi, m_hi)
        return cls(tuple((float(a), float(b), points_per_dim) for a, b in zip(lo, hi)))

    def nodes_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Tensor-product nodes (P, D) and trapezoid weights (P,)."""
        grids_1d = []
        weights_1d = []
        for lo, hi, pts in self.axes:
            g = np.linspace(lo, hi, pts)
            w = np.full(pts, (hi - lo) / (pts - 1))
            w[0] *= 0.5
            w[-1] *= 0.5
            grids_1d.append(g)
            weights_1d.append(w)
        mesh = np.meshgrid(*grids_1d, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        weights = weights_1d[0]
        for w in weights_1d[1:]:
            weights = np.multiply.outer(weights, w)
        return nodes, weights.ravel()


def fit_kld(target: GaussianMixture) -> IsotropicGaussian:
    """Closed-form KLD[target || q] minimizer over isotropic Gaussians q.

    The optimum matches moments: mean is the mixture mean and sigma^2 is the
    average per-dimension marginal variance of the target.
    """
    mean = target.mean()
    sigma2 = float(np.mean(target.per_dim_variance()))
    return IsotropicGaussian(mean, math.sqrt(sigma2))


def _sqdist(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise squared distances (clamped at 0) and the inner-product matrix."""
    xy = x @ y.T
    d2 = np.sum(x**2, axis=1)[:, None] - 2.0 * xy + np.sum(y**2, axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2, xy


def _check_dims(a: SampleMatrix, b: SampleMatrix):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def mmd_squared(samples_p: SampleMatrix, samples_q: SampleMatrix, kernels: KernelBank) -> float:
    """Biased (V-statistic) estimate of squared MMD between two sample sets.

    All pairs including self-pairs enter the three kernel means, which keeps
    the estimate nonnegative up to rounding.
    """
    _check_dims(samples_p, samples_q)
    x, y = samples_p.data, samples_q.data
    d2_xx, _ = _sqdist(x, x)
    d2_yy, _ = _sqdist(y, y)
    d2_xy, _ = _sqdist(x, y)
    total = 0.0
    for bw in kernels.bandwidths:
        c = 1.0 / (2.0 * bw**2)
        total += (
            float(np.mean(np.exp(-c * d2_xx)))
            - 2.0 * float(np.mean(np.exp(-c * d2_xy)))
            + float(np.mean(np.exp(-c * d2_yy)))
        )
    return total


def mmd_squared_grad(
    target: np.ndarray, noise: np.ndarray, mean: np.ndarray, log_sigma: float, kernels: KernelBank
) -> tuple[float, np.ndarray, float]:
    """Squared MMD between ``target`` and ``mean + exp(log_sigma) * noise``,
    with its analytic gradient in (mean, log_sigma).

    ``noise`` is a frozen bank of standard-normal rows (the reparameterization
    that makes the objective a deterministic function of the parameters).
    Returns ``(value, d/dmean, d/dlog_sigma)``.
    """
    # np.exp (not math.exp) so a diverged log_sigma yields inf -> nan gradients
    # that the descent loop reports, instead of an OverflowError here.
    with np.errstate(over="ignore", invalid="ignore"):
        sigma = float(np.exp(log_sigma))
        y = mean + sigma * noise
        return _mmd_cross_value_grad(target, y, mean, kernels, _kernel_sum(target, kernels))


def _kernel_sum(x: np.ndarray, kernels: KernelBank) -> float:
    """Sum over all pairs (including self-pairs) of the banked kernel."""
    d2, _ = _sqdist(x, x)
    return float(sum(np.sum(np.exp(-d2 / (2.0 * bw**2))) for bw in kernels.bandwidths))


def _mmd_cross_value_grad(x, y, mean, kernels, k_xx):
    """Value and gradient given the (parameter-independent) target self term."""
    n, m = x.shape[0], y.shape[0]

    d2_xy, xy = _sqdist(x, y)
    d2_yy, _ = _sqdist(y, y)

    k_xy = k_yy = 0.0
    g_xy = np.zeros_like(d2_xy)
    g_yy_d2 = 0.0  # sum over pairs of G_yy * |y_i - y_j|^2
    for bw in kernels.bandwidths:
        c = 1.0 / (2.0 * bw**2)
        e_xy = np.exp(-c * d2_xy)
        e_yy = np.exp(-c * d2_yy)
        k_xy += float(np.sum(e_xy))
        k_yy += float(np.sum(e_yy))
        g_xy += e_xy / bw**2
        g_yy_d2 += float(np.sum(e_yy * d2_yy)) / bw**2

    value = k_xx / n**2 - 2.0 * k_xy / (n * m) + k_yy / m**2

    # d k(x_i, y_j) / d y_j = G_ij (x_i - y_j); sum the pair gradients.
    row = g_xy.sum(axis=1)  # (n,)
    col = g_xy.sum(axis=0)  # (m,)
    sum_pairs = row @ x - col @ y  # sum_ij G_ij (x_i - y_j)
    d_sxy_dmean = sum_pairs / (n * m)
    # d y_j / d log_sigma = y_j - mean, hence the inner products below.
    dot_xy = float(np.sum(g_xy * xy))
    dot_yy = float(col @ np.sum(y * y, axis=1))
    d_sxy_dls = (dot_xy - dot_yy - float(sum_pairs @ mean)) / (n * m)
    # |y_i - y_j|^2 scales as sigma^2, so d k / d log_sigma = -G_ij |y_i - y_j|^2.
    d_syy_dls = -g_yy_d2 / m**2

    grad_mean = -2.0 * d_sxy_dmean
    grad_ls = -2.0 * d_sxy_dls + d_syy_dls
    return value, grad_mean, grad_ls


def _descend(value_and_grad, theta0: np.ndarray, config: FitConfig):
    """Fixed-step gradient descent, stopping on small update norm or the cap.

    Returns the final parameters and a trace of (iter, objective, *params) rows
    (one per evaluated point, including the final parameters).
    """
    theta = theta0.astype(np.float64).copy()
    trace = []
    for it in range(config.max_iters):
        value, grad = value_and_grad(theta)
        if not np.all(np.isfinite(grad)):
            raise RuntimeError(f"non-finite gradient at iteration {it}")
        trace.append((it, value, *theta))
        update = config.step_size * grad
        theta -= update
        if float(np.linalg.norm(update)) < config.tolerance:
            break
    final_value, _ = value_and_grad(theta)
    trace.append((trace[-1][0] + 1, final_value, *theta))
    return theta, trace


def _theta_to_model(theta: np.ndarray) -> IsotropicGaussian:
    return IsotropicGaussian(theta[:-1], math.exp(theta[-1]))


def fit_mmd(
    target_samples: SampleMatrix,
    kernels: KernelBank,
    config: FitConfig,
    model_samples: int = 1000,
    return_trace: bool = False,
):
    """Fit an isotropic Gaussian to ``target_samples`` by descending squared MMD.

    Model samples are reparameterized as ``mean + sigma * z`` with a frozen
    bank of ``model_samples`` standard-normal draws from ``config.seed``, so
    the objective is deterministic and the analytic gradient exact. Sigma is
    optimized through log-sigma to stay positive.
    """
    d = target_samples.dim
    if config.init.dim != d:
        raise ValueError(f"init dimension {config.init.dim} != sample dimension {d}")
    noise = make_rng(subseed(config.seed, "mmd-model-noise")).standard_normal((model_samples, d))
    x = target_samples.data
    k_xx = _kernel_sum(x, kernels)  # constant across iterations

    def value_and_grad(theta):
        with np.errstate(over="ignore", invalid="ignore"):
            sigma = float(np.exp(theta[-1]))
            y = theta[:-1] + sigma * noise
            value, g_mean, g_ls = _mmd_cross_value_grad(x, y, theta[:-1], kernels, k_xx)
        return value, np.concatenate([g_mean, [g_ls]])

    theta0 = np.concatenate([config.init.mean, [math.log(config.init.sigma)]])
    theta, trace = _descend(value_and_grad, theta0, config)
    model = _theta_to_model(theta)
    if return_trace:
        return model, _trace_array(trace)
    return model


def _trace_array(trace) -> np.ndarray:
    """Trace rows as an array with sigma reported on its natural scale."""
    arr = np.array(trace, dtype=np.float64)
    arr[:, -1] = np.exp(arr[:, -1])
    return arr


def jsd(p, q: IsotropicGaussian, grid: QuadratureGrid) -> float:
    """Jensen-Shannon divergence by tensor-grid trapezoid quadrature.

    ``p`` may be a Gaussian mixture or an isotropic Gaussian; ``q`` is the
    isotropic Gaussian under evaluation. The grid must cover the effective
    support of both densities (mean +/- 8 standard deviations is enough; see
    :meth:`QuadratureGrid.covering`): if either density normalizes to worse
    than 1e-3 on the grid, the quadrature is rejected. The result is clamped
    to the valid range [0, ln 2].
    """
    nodes, weights = grid.nodes_and_weights()
    log_p = np.asarray(log_density(p, nodes))
    _check_normalization(log_p, weights, "p")
    log_q = np.asarray(log_density(q, nodes))
    _check_normalization(log_q, weights, "q")
    return _jsd_from_logs(log_p, log_q, weights)


def _check_normalization(log_f: np.ndarray, weights: np.ndarray, name: str):
    mass = float(weights @ np.exp(log_f))
    if abs(mass - 1.0) > 1e-3:
        raise ValueError(
            f"insufficient quadrature: {name} normalizes to {mass:.6f} on the grid"
        )


def _jsd_from_logs(log_p: np.ndarray, log_q: np.ndarray, weights: np.ndarray) -> float:
    log_m = np.logaddexp(log_p, log_q) - LN2
    log_floor = math.log(_DENSITY_FLOOR)
    kl_p = _kl_term(log_p, log_m, weights, log_floor)
    kl_q = _kl_term(log_q, log_m, weights, log_floor)
    value = 0.5 * (kl_p + kl_q)
    return min(max(value, 0.0), LN2)


def _kl_term(log_f, log_m, weights, log_floor):
    mask = log_f > log_floor
    integrand = np.zeros_like(log_f)
    integrand[mask] = np.exp(log_f[mask]) * (log_f[mask] - log_m[mask])
    return float(weights @ integrand)


def fit_jsd(
    target,
    grid: QuadratureGrid,
    config: FitConfig,
    return_trace: bool = False,
):
    """Fit an isotropic Gaussian to a target density by descending JSD.

    Gradients are central finite differences on (mean, log sigma) with a
    1e-4 relative step. The target's grid evaluation is cached across
    iterations. A sensible default for ``config.init`` is the closed-form
    KLD fit. Raises the quadrature error of :func:`jsd` if either density
    stops normalizing on the grid.
    """
    nodes, weights = grid.nodes_and_weights()
    log_p = np.asarray(log_density(target, nodes))
    _check_normalization(log_p, weights, "p")

    def objective(theta):
        q = _theta_to_model(theta)
        log_q = np.asarray(gaussian_log_density(q, nodes))
        _check_normalization(log_q, weights, "q")
        return _jsd_from_logs(log_p, log_q, weights)

    def value_and_grad(theta):
        value = objective(theta)
        grad = np.empty_like(theta)
        for i in range(theta.size):
            h = 1e-4 * max(1.0, abs(float(theta[i])))
            up = theta.copy()
            dn = theta.copy()
            up[i] += h
            dn[i] -= h
            grad[i] = (objective(up) - objective(dn)) / (2.0 * h)
        return value, grad

    theta0 = np.concatenate([config.init.mean, [math.log(config.init.sigma)]])
    theta, trace = _descend(value_and_grad, theta0, config)
    model = _theta_to_model(theta)
    if return_trace:
        return model, _trace_array(trace)
    return model
