"""Parzen-window log-likelihood estimation and the ways it can be gamed.

A Parzen (kernel density) estimate built from model samples is a popular
stand-in for an intractable log-likelihood. These tools measure how far the
proxy sits from the truth as sample counts grow, and implement the k-means
centroid generator whose Parzen score beats samples from the true
distribution even though its actual log-likelihood is minus infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import (
    LOG_2PI,
    RngSeed,
    SampleMatrix,
    log_density,
    log_sum_exp,
    make_rng,
    sample,
    subseed,
)

__all__ = [
    "ParzenEstimator",
    "KMeansResult",
    "SweepResult",
    "BenchmarkEntry",
    "parzen_log_likelihood",
    "select_bandwidth",
    "parzen_convergence_sweep",
    "kmeans",
    "sample_centroids",
    "parzen_benchmark",
]

# Cap on (eval rows x centers) cells held at once; larger problems are chunked.
_BLOCK_CELLS = 1 << 23


@dataclass(frozen=True)
class ParzenEstimator:
    """Kernel density estimate: Gaussian kernels of one shared bandwidth."""

    centers: SampleMatrix
    bandwidth: float

    def __post_init__(self):
        if not isinstance(self.centers, SampleMatrix):
            raise TypeError("centers must be a SampleMatrix")
        bw = float(self.bandwidth)
        if not (np.isfinite(bw) and bw > 0):
            raise ValueError(f"bandwidth must be a positive real, got {bw}")
        object.__setattr__(self, "bandwidth", bw)


@dataclass(frozen=True)
class KMeansResult:
    centroids: SampleMatrix
    assignments: np.ndarray
    inertia: float
    inertia_history: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        if a.min() < 0 or a.max() >= self.centroids.n:
            raise ValueError("assignments index outside centroid range")
        a.flags.writeable = False
        object.__setattr__(self, "assignments", a)


@dataclass(frozen=True)
class SweepResult:
    """Parzen estimates per sample count, with the true-model reference."""

    sample_counts: np.ndarray
    bandwidths: np.ndarray
    mean_test_ll: np.ndarray
    std_errors: np.ndarray
    reference_ll: float
    reference_se: float

    def __post_init__(self):
        counts = np.asarray(self.sample_counts, dtype=np.int64)
        if counts.size > 1 and not np.all(np.diff(counts) > 0):
            raise ValueError("sample counts must be strictly increasing")


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    n_samples: int
    bandwidth: float
    mean_nats: float
    std_error: float


def _mean_lls_over_bandwidths(
    centers: np.ndarray, bandwidths, eval_points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-bandwidth mean and per-point log-likelihood sums for one center set.

    The expensive squared-distance matrix is computed once per row chunk and
    shared across bandwidths. Returns (means, per_point_lls) where
    per_point_lls has shape (len(bandwidths), n_eval).
    """
    m, d = centers.shape
    n = eval_points.shape[0]
    bandwidths = [float(b) for b in bandwidths]
    lls = np.empty((len(bandwidths), n))
    center_sq = np.sum(centers**2, axis=1)
    block = max(1, _BLOCK_CELLS // m)
    for start in range(0, n, block):
        chunk = eval_points[start : start + block]
        d2 = np.sum(chunk**2, axis=1)[:, None] - 2.0 * (chunk @ centers.T) + center_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        for bi, h in enumerate(bandwidths):
            ll = log_sum_exp(-d2 / (2.0 * h * h), axis=1)
            lls[bi, start : start + block] = ll
    for bi, h in enumerate(bandwidths):
        lls[bi] += -math.log(m) - d * math.log(h) - 0.5 * d * LOG_2PI
    return lls.mean(axis=1), lls


def parzen_log_likelihood(est: ParzenEstimator, test: SampleMatrix) -> float:
    """Mean test log-likelihood (nats per item) under the kernel density estimate.

    Equals the log density of the uniform-weight Gaussian mixture with the
    estimator's centers and isotropic variance bandwidth^2.
    """
    if est.centers.dim != test.dim:
        raise ValueError(f"dimension mismatch: centers D={est.centers.dim}, test D={test.dim}")
    means, _ = _mean_lls_over_bandwidths(est.centers.data, [est.bandwidth], test.data)
    return float(means[0])


def select_bandwidth(samples: SampleMatrix, validation: SampleMatrix, grid) -> float:
    """Grid-search bandwidth maximizing mean validation log-likelihood.

    Ties break toward the smaller bandwidth. Scoring a set against itself
    degenerates to favoring the tiniest bandwidth on the grid (every kernel
    peaks at its own center), which is why validation should be disjoint.
    """
    grid = sorted(float(h) for h in grid)
    if len(grid) == 0:
        raise ValueError("bandwidth grid must be nonempty")
    if samples.dim != validation.dim:
        raise ValueError("samples and validation dimensionality differ")
    scores, _ = _mean_lls_over_bandwidths(samples.data, grid, validation.data)
    return grid[int(np.argmax(scores))]


def parzen_convergence_sweep(
    true_model,
    sample_counts,
    test: SampleMatrix,
    bandwidth_grid,
    seed: RngSeed,
) -> SweepResult:
    """Parzen estimates from growing sample banks of a known Gaussian.

    ``true_model`` may be an IsotropicGaussian or a GaussianMixture (a K=1
    mixture is the anisotropic diagonal Gaussian of patch-like data, where
    the isotropic-kernel estimate stays far from the truth). For each count
    n, draws n samples from ``true_model``, holds out roughly 10% of them
    for bandwidth selection (at n = 1 the single sample doubles as its own
    validation), and scores ``test`` with the selected bandwidth. The true
    model's mean test log-likelihood is reported alongside as the value the
    proxy is trying to reach.
    """
    counts = [int(c) for c in sample_counts]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("sample counts must be strictly increasing")
    used_bandwidths = np.empty(len(counts))
    means = np.empty(len(counts))
    ses = np.empty(len(counts))
    for i, n in enumerate(counts):
        draws = sample(true_model, n, subseed(seed, "sweep-draw", n)).data
        n_val = max(1, n // 10)
        if n - n_val >= 1:
            fit_rows, val_rows = draws[: n - n_val], draws[n - n_val :]
        else:
            fit_rows = val_rows = draws
        h = select_bandwidth(SampleMatrix(fit_rows), SampleMatrix(val_rows), bandwidth_grid)
        _, lls = _mean_lls_over_bandwidths(fit_rows, [h], test.data)
        used_bandwidths[i] = h
        means[i] = lls[0].mean()
        ses[i] = lls[0].std(ddof=1) / math.sqrt(test.n) if test.n > 1 else float("inf")
    ref_lls = np.asarray(log_density(true_model, test.data))
    ref_se = float(ref_lls.std(ddof=1)) / math.sqrt(test.n) if test.n > 1 else float("inf")
    return SweepResult(
        np.array(counts), used_bandwidths, means, ses, float(ref_lls.mean()), ref_se
    )


def _segment_means(data: np.ndarray, assignments: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster means via a stable sort and segmented reduction."""
    counts = np.bincount(assignments, minlength=k)
    order = np.argsort(assignments, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    nonempty = counts > 0
    sums = np.zeros((k, data.shape[1]))
    if np.any(nonempty):
        sums[nonempty] = np.add.reduceat(data[order], starts[nonempty], axis=0)
    means = sums.copy()
    means[nonempty] /= counts[nonempty, None]
    return means, counts


def _assign(data: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid assignments and the squared distance to them."""
    n = data.shape[0]
    k = centroids.shape[0]
    assignments = np.empty(n, dtype=np.int64)
    min_d2 = np.empty(n)
    c_sq = np.sum(centroids**2, axis=1)
    block = max(1, _BLOCK_CELLS // k)
    for start in range(0, n, block):
        chunk = data[start : start + block]
        d2 = np.sum(chunk**2, axis=1)[:, None] - 2.0 * (chunk @ centroids.T) + c_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        idx = np.argmin(d2, axis=1)
        assignments[start : start + block] = idx
        min_d2[start : start + block] = d2[np.arange(chunk.shape[0]), idx]
    return assignments, min_d2


def _kmeans_pp_seed(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ initialization: spread starting centroids by squared distance."""
    n = data.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            target = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            idx = min(idx, n - 1)
        else:
            # All remaining points coincide with chosen centroids; take the
            # lowest-index point not yet chosen.
            mask = np.ones(n, dtype=bool)
            mask[chosen[:j]] = False
            idx = int(np.flatnonzero(mask)[0])
        chosen[j] = idx
        d2 = np.minimum(d2, np.sum((data - data[idx]) ** 2, axis=1))
    return data[chosen].copy()


def kmeans(data: SampleMatrix, k: int, max_iters: int, seed: RngSeed) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments are stable or at ``max_iters``. Empty clusters are
    re-seeded to the point currently farthest from its assigned centroid
    (ties to the lowest index), so exactly k clusters survive. The recorded
    inertia history (sum of squared distances after each assignment step) is
    nonincreasing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > data.n:
        raise ValueError(f"k={k} exceeds the number of data rows {data.n}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    x = data.data
    rng = make_rng(subseed(seed, "kmeans-init"))
    centroids = _kmeans_pp_seed(x, k, rng)

    prev_assignments = None
    history = []
    assignments = None
    for _ in range(max_iters):
        assignments, min_d2 = _assign(x, centroids)
        repaired = False
        counts = np.bincount(assignments, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size > 0:
            order = np.argsort(-min_d2, kind="stable")
            cursor = 0
            for cid in empty:
                p = int(order[cursor])
                cursor += 1
                assignments[p] = cid
                min_d2[p] = 0.0
                centroids[cid] = x[p]
                repaired = True
        history.append(float(min_d2.sum()))
        if not repaired and prev_assignments is not None and np.array_equal(
            assignments, prev_assignments
        ):
            break
        prev_assignments = assignments.copy()
        means, counts = _segment_means(x, assignments, k)
        centroids = means

    final_assignments, final_d2 = _assign(x, centroids)
    # Keep returned assignments consistent with returned centroids.
    return KMeansResult(
        SampleMatrix(centroids),
        final_assignments,
        float(final_d2.sum()),
        np.array(history),
    )


def sample_centroids(centroids: SampleMatrix, n: int, seed: RngSeed) -> SampleMatrix:
    """Uniform with-replacement draws of centroid rows; no noise is added.

    This is the zero-bandwidth lookup-table generator: its samples look fine
    but the underlying density is a set of point masses.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = make_rng(seed)
    idx = rng.integers(0, centroids.n, size=n)
    return SampleMatrix(centroids.data[idx], value_range=centroids.value_range)


def parzen_benchmark(
    entries, test: SampleMatrix, validation: SampleMatrix, bandwidth_grid
) -> list[BenchmarkEntry]:
    """Score named sample sets with validation-selected bandwidths; rank by score.

    Each entry is a (name, SampleMatrix) pair. Results are sorted by mean
    test log-likelihood, best first; ties keep input order.
    """
    results = []
    for name, samples in entries:
        if samples.dim != test.dim:
            raise ValueError(f"entry {name!r}: dimension {samples.dim} != test {test.dim}")
        h = select_bandwidth(samples, validation, bandwidth_grid)
        _, lls = _mean_lls_over_bandwidths(samples.data, [h], test.data)
        se = float(lls[0].std(ddof=1)) / math.sqrt(test.n) if test.n > 1 else float("inf")
        results.append(BenchmarkEntry(str(name), samples.n, h, float(lls[0].mean()), se))
    return sorted(results, key=lambda e: -e.mean_nats)
