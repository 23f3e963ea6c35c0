"""Dequantized log-likelihoods, the discrete compression bound, and the
mixture constructions that decouple likelihood from sample quality.

The central object is the probability mass a continuous density q assigns to
an integer image x, obtained by integrating q over the unit cell at x. The
expected dequantized log-likelihood lower-bounds the log of that mass
(Jensen), which is what an entropy coder could achieve on the discrete data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .density import (
    DensityHandle,
    RngSeed,
    SampleMatrix,
    GaussianMixture,
    log_density,
    log_sum_exp,
    make_rng,
    subseed,
)

__all__ = [
    "QuantizedImageSet",
    "MixtureTrickModel",
    "DiscreteLLEstimate",
    "JensenCheck",
    "dequantize",
    "discrete_log_likelihood",
    "jensen_bound_check",
    "nats_to_bits_per_dim",
    "build_lookup_table_model",
    "mixture_trick_log_density",
    "sample_mixture_trick",
    "posterior_alpha",
]

LN256 = math.log(256.0)


@dataclass(frozen=True)
class QuantizedImageSet:
    """N x D matrix of 8-bit integer images plus their (height, width, channels).

    Rows are flattened row-major with channels interleaved:
    ``pixel(r, c, ch) -> index (r * width + c) * channels + ch``.
    """

    data: np.ndarray
    geometry: tuple[int, int, int]

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data))
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError(f"pixel data must be integer, got dtype {data.dtype}")
        if data.min() < 0 or data.max() > 255:
            raise ValueError("pixel values must lie in 0..255")
        h, w, c = (int(v) for v in self.geometry)
        if h * w * c != data.shape[1]:
            raise ValueError(
                f"geometry {h}x{w}x{c} inconsistent with row length {data.shape[1]}"
            )
        data = data.astype(np.int64)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "geometry", (h, w, c))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MixtureTrickModel:
    """Two-component density 0.01 p + 0.99 q (weight configurable).

    ``good`` and ``bad`` are density handles: model objects or callables
    mapping an (N, D) matrix to log densities.
    """

    good: DensityHandle
    bad: DensityHandle
    weight_good: float = 0.01

    def __post_init__(self):
        w = float(self.weight_good)
        if not 0.0 < w < 1.0:
            raise ValueError(f"weight_good must lie strictly in (0, 1), got {w}")
        object.__setattr__(self, "weight_good", w)


@dataclass(frozen=True)
class DiscreteLLEstimate:
    """Monte-Carlo estimate of a discrete log mass, in nats per image."""

    mean_log_mass: float
    std_error: float
    mc_samples: int

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if not (self.std_error >= 0 or math.isnan(self.std_error)):
            raise ValueError("std_error must be nonnegative")


@dataclass(frozen=True)
class JensenCheck:
    """Continuous vs. discrete average log-likelihood on the same images.

    ``gap = discrete - continuous`` is nonnegative in expectation; the paired
    per-image standard error ``gap_se`` makes the inequality testable:
    ``continuous_ll <= discrete_ll + 3 * gap_se`` should hold.
    """

    continuous_ll: float
    discrete_ll: DiscreteLLEstimate
    gap: float
    gap_se: float

    def bound_holds(self, n_se: float = 3.0) -> bool:
        return self.gap >= -n_se * self.gap_se


def dequantize(images: QuantizedImageSet, seed: RngSeed, rescale: bool = False) -> SampleMatrix:
    """Add uniform [0, 1) noise to integer pixels; optionally rescale to [0, 1).

    With ``rescale`` the noisy values are divided by 256 and the result carries
    value_range (0, 1); log-likelihoods computed on that scale need a
    ``+ D * ln 256`` correction to be comparable with the raw scale (applied
    at report time, not here).
    """
    rng = make_rng(seed)
    noisy = images.data + rng.random(images.data.shape)
    if rescale:
        return SampleMatrix(noisy / 256.0, value_range=(0.0, 1.0))
    return SampleMatrix(noisy)


def _estimate_log_mean(log_values: np.ndarray, n_batches: int = 64) -> tuple[float, float]:
    """log of the mean of exp(log_values), with a delta-method standard error.

    The draws are split into (nearly) equal batches; the spread of the batch
    means yields the error of the overall mean, mapped through the log by the
    delta method. A single draw gives an infinite standard error.
    """
    m = log_values.size
    estimate = log_sum_exp(log_values) - math.log(m)
    if not np.isfinite(estimate):
        return float(estimate), float("inf")
    if m == 1:
        return float(estimate), float("inf")
    shift = float(np.max(log_values))
    scaled = np.exp(log_values - shift)
    batches = np.array_split(scaled, min(m, n_batches))
    means = np.array([b.mean() for b in batches])
    overall = float(scaled.mean())
    se_mean = float(np.std(means, ddof=1)) / math.sqrt(len(means))
    return float(estimate), se_mean / overall


def discrete_log_likelihood(
    model: DensityHandle, x, mc_samples: int, seed: RngSeed
) -> DiscreteLLEstimate:
    """Estimate the log probability mass of the unit cell at integer vector ``x``.

    Monte-Carlo: draw ``mc_samples`` uniform offsets u in [0, 1)^D, evaluate
    log q(x + u), and return log-mean-exp minus log m. If every draw lands at
    -inf the estimate is -inf with infinite standard error.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    rng = make_rng(seed)
    u = rng.random((mc_samples, x.size))
    log_q = np.asarray(log_density(model, x[None, :] + u))
    estimate, se = _estimate_log_mean(log_q)
    return DiscreteLLEstimate(estimate, se, mc_samples)


def jensen_bound_check(
    model: DensityHandle, images: QuantizedImageSet, seed: RngSeed, mc_samples: int
) -> JensenCheck:
    """Compare the dequantized (continuous) and discrete log-likelihoods.

    The continuous side uses one noise draw per image; the discrete side
    integrates each unit cell with ``mc_samples`` draws. Both sides share the
    images, so the difference is paired and its standard error is immune to
    between-image spread.
    """
    x = images.data.astype(np.float64)
    n, d = x.shape
    rng = make_rng(subseed(seed, "continuous-noise"))
    continuous_vals = np.asarray(log_density(model, x + rng.random((n, d))))

    discrete_vals = np.empty(n)
    discrete_ses = np.empty(n)
    for i in range(n):
        est = discrete_log_likelihood(
            model, images.data[i], mc_samples, subseed(seed, "cell", i)
        )
        discrete_vals[i] = est.mean_log_mass
        discrete_ses[i] = est.std_error

    continuous_ll = float(np.mean(continuous_vals))
    discrete_ll = float(np.mean(discrete_vals))
    mean_se = math.sqrt(float(np.sum(discrete_ses**2))) / n
    diffs = discrete_vals - continuous_vals
    if n > 1:
        gap_se = float(np.std(diffs, ddof=1)) / math.sqrt(n)
    else:
        gap_se = float(discrete_ses[0])
    estimate = DiscreteLLEstimate(discrete_ll, mean_se, mc_samples)
    return JensenCheck(continuous_ll, estimate, discrete_ll - continuous_ll, gap_se)


def nats_to_bits_per_dim(ll_nats_per_item: float, d: int) -> float:
    """Average bits per dimension implied by a per-item log-likelihood in nats."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return -ll_nats_per_item / (d * math.log(2.0))


def build_lookup_table_model(train: SampleMatrix, epsilon: float) -> GaussianMixture:
    """Uniform mixture of tiny isotropic Gaussians centered on the training rows.

    Great samples for small epsilon, terrible generalization: the continuous
    analogue of memorizing the training set.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = train.n
    weights = np.full(n, 1.0 / n)
    weights /= weights.sum()  # exact normalization even when 1/n rounds
    variances = np.full((n, train.dim), float(epsilon) ** 2)
    return GaussianMixture(weights, train.data, variances)


def mixture_trick_log_density(model: MixtureTrickModel, x):
    """Log density of w * good + (1 - w) * bad, stable in log space.

    Never falls more than ln(1/w) below the good model's log density, which
    for the default w = 0.01 is the ln 100 (about 4.61 nats) ceiling on the
    likelihood cost of mixing in an arbitrarily bad sampler.
    """
    log_p = np.asarray(log_density(model.good, x), dtype=np.float64)
    log_q = np.asarray(log_density(model.bad, x), dtype=np.float64)
    w = model.weight_good
    out = np.logaddexp(math.log(w) + log_p, math.log1p(-w) + log_q)
    return float(out) if out.ndim == 0 else out


def sample_mixture_trick(
    model: MixtureTrickModel,
    sampler_good: Callable[[int, RngSeed], SampleMatrix],
    sampler_bad: Callable[[int, RngSeed], SampleMatrix],
    n: int,
    seed: RngSeed,
) -> tuple[SampleMatrix, np.ndarray]:
    """Draw from the two-component mixture; returns (samples, component labels).

    Labels are 1 where the draw came from the good component. Samplers are
    callables (count, seed) -> SampleMatrix so arbitrary generators plug in.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = make_rng(subseed(seed, "component-choice"))
    labels = (rng.random(n) < model.weight_good).astype(np.int64)
    n_good = int(labels.sum())
    good = sampler_good(n_good, subseed(seed, "good")).data if n_good > 0 else None
    bad = sampler_bad(n - n_good, subseed(seed, "bad")).data if n - n_good > 0 else None
    dim = good.shape[1] if good is not None else bad.shape[1]
    data = np.empty((n, dim))
    if good is not None:
        data[labels == 1] = good
    if bad is not None:
        data[labels == 0] = bad
    return SampleMatrix(data), labels


def posterior_alpha(log_p, log_q, weight_good: float = 0.01):
    """Posterior probability that a point came from the good component.

    alpha = sigmoid(log_p - log_q - ln((1 - w) / w)); for w = 0.01 the offset
    is ln 99, matching the posterior mixing weight of the two-component trick.
    Accepts scalars or arrays.
    """
    if not 0.0 < weight_good < 1.0:
        raise ValueError("weight_good must lie strictly in (0, 1)")
    z = (
        np.asarray(log_p, dtype=np.float64)
        - np.asarray(log_q, dtype=np.float64)
        - (math.log1p(-weight_good) - math.log(weight_good))
    )
    # Sigmoid without overflow on either tail.
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return float(out) if out.ndim == 0 else out
