"""The shifted-window nearest-neighbor test for overfitting detection.

Queries are training windows shifted diagonally by a few pixels. If Euclidean
nearest-neighbor lookup against the unshifted windows cannot recover the
source image after a 2 to 4 pixel shift, showing samples next to training
nearest neighbors cannot be trusted to reveal memorization either.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .datasets import to_grayscale
from .density import RngSeed, SampleMatrix, make_rng, subseed
from .likelihood import QuantizedImageSet

__all__ = [
    "ShiftedQuerySet",
    "PrecisionPoint",
    "extract_shifted_windows",
    "nearest_neighbor",
    "binomial_ci",
    "shift_precision_curve",
]

# Queries per work chunk during batched search. Pixel data is integer-valued,
# so chunked float64 distance arithmetic is exact and chunking or worker
# count cannot change any result.
_QUERY_CHUNK = 64


@dataclass(frozen=True)
class ShiftedQuerySet:
    """Windows cropped at a diagonal offset, tagged with their source images."""

    shift: int
    queries: SampleMatrix
    source_indices: np.ndarray

    def __post_init__(self):
        if self.shift < 0:
            raise ValueError("shift must be nonnegative")
        idx = np.asarray(self.source_indices, dtype=np.int64)
        if idx.shape[0] != self.queries.n:
            raise ValueError("one source index per query required")
        idx.flags.writeable = False
        object.__setattr__(self, "source_indices", idx)


@dataclass(frozen=True)
class PrecisionPoint:
    shift: int
    precision: float
    ci_low: float
    ci_high: float
    n_queries: int

    def __post_init__(self):
        if not (0.0 <= self.ci_low <= self.precision <= self.ci_high <= 1.0):
            raise ValueError("need 0 <= ci_low <= precision <= ci_high <= 1")


def _check_window(images: QuantizedImageSet, window: int, shifts) -> list[int]:
    h, w, _ = images.geometry
    shifts = [int(s) for s in shifts]
    if any(s < 0 for s in shifts):
        raise ValueError("shifts must be nonnegative")
    max_shift = max(shifts) if shifts else 0
    if window < 1 or window + max_shift > h or window + max_shift > w:
        raise ValueError(
            f"window {window} with max shift {max_shift} does not fit in {h}x{w} images"
        )
    return shifts


def _cropped_rows(images: QuantizedImageSet, window: int, shift: int, rows=None) -> np.ndarray:
    """Float64 matrix of the (shift, shift) window of the given image rows."""
    h, w, c = images.geometry
    stacked = images.data.reshape(-1, h, w, c)
    if rows is not None:
        stacked = stacked[rows]
    crop = stacked[:, shift : shift + window, shift : shift + window, :]
    return crop.reshape(crop.shape[0], window * window * c).astype(np.float64)


def extract_shifted_windows(
    images: QuantizedImageSet, window: int, shifts
) -> list[ShiftedQuerySet]:
    """Crop a square window at diagonal offset (s, s) for each requested shift.

    Shift 0 is the top-left window, the reference set the queries are matched
    against. Windows are flattened row-major with channels interleaved.
    """
    shifts = _check_window(images, window, shifts)
    indices = np.arange(images.n, dtype=np.int64)
    return [
        ShiftedQuerySet(s, SampleMatrix(_cropped_rows(images, window, s)), indices)
        for s in shifts
    ]


def nearest_neighbor(query, train: SampleMatrix) -> tuple[int, float]:
    """Exact Euclidean nearest neighbor; ties break to the smallest index."""
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.size != train.dim:
        raise ValueError(f"dimension mismatch: query D={q.size}, train D={train.dim}")
    d2 = np.sum(train.data**2, axis=1) - 2.0 * (train.data @ q) + float(q @ q)
    np.maximum(d2, 0.0, out=d2)
    idx = int(np.argmin(d2))
    return idx, float(d2[idx])


def _nearest_indices_batch(
    queries: np.ndarray, train: np.ndarray, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbor indices and squared distances for every query row;
    exact, chunked, optionally run on worker threads (chunks are fixed, so
    results never depend on the worker count)."""
    train_sq = np.sum(train**2, axis=1)
    n = queries.shape[0]
    out = np.empty(n, dtype=np.int64)
    dist = np.empty(n)

    def scan(start: int):
        chunk = queries[start : start + _QUERY_CHUNK]
        d2 = np.sum(chunk**2, axis=1)[:, None] - 2.0 * (chunk @ train.T) + train_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        idx = np.argmin(d2, axis=1)
        out[start : start + _QUERY_CHUNK] = idx
        dist[start : start + _QUERY_CHUNK] = d2[np.arange(chunk.shape[0]), idx]

    starts = range(0, n, _QUERY_CHUNK)
    if workers <= 1:
        for start in starts:
            scan(start)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(scan, starts))
    return out, dist


def binomial_ci(successes: int, n: int, level: float) -> tuple[float, float]:
    """Two-sided Clopper-Pearson interval for a binomial proportion.

    Endpoints are Beta quantiles clamped to [0, 1]; zero successes pin the
    lower end to 0 and all successes pin the upper end to 1 (with the lower
    end at ((1 - level) / 2) ** (1/n)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= successes <= n:
        raise ValueError(f"need 0 <= successes <= n, got {successes}/{n}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly in (0, 1)")
    alpha = 1.0 - level
    low = 0.0 if successes == 0 else float(beta_dist.ppf(alpha / 2, successes, n - successes + 1))
    high = 1.0 if successes == n else float(beta_dist.ppf(1 - alpha / 2, successes + 1, n - successes))
    return max(0.0, low), min(1.0, high)


def shift_precision_curve(
    images: QuantizedImageSet,
    window: int,
    shifts,
    n_queries: int,
    seed: RngSeed,
    level: float = 0.9,
    grayscale: bool = False,
    workers: int = 1,
    return_matches: bool = False,
):
    """Fraction of shifted queries whose nearest neighbor is their own source.

    Samples ``n_queries`` source images without replacement (so every query
    has a unique correct answer), crops the shifted windows, and searches the
    full shift-0 reference set. Returns one point per shift with a
    Clopper-Pearson confidence interval at ``level``. With ``return_matches``
    also returns, per shift, the (source index, matched index, squared
    distance) arrays for manual inspection of the retrieved neighbors.
    """
    if n_queries < 1 or n_queries > images.n:
        raise ValueError(f"need 1 <= n_queries <= {images.n}, got {n_queries}")
    if grayscale:
        images = to_grayscale(images)
    shifts = _check_window(images, window, shifts)
    # Only the reference set is materialized in full; per shift just the
    # chosen query rows are cropped.
    reference = _cropped_rows(images, window, 0)

    rng = make_rng(subseed(seed, "query-choice"))
    chosen = np.sort(rng.choice(images.n, size=n_queries, replace=False))

    points = []
    matches = []
    for s in shifts:
        queries = _cropped_rows(images, window, s, rows=chosen)
        nn_idx, nn_d2 = _nearest_indices_batch(queries, reference, workers=workers)
        successes = int(np.sum(nn_idx == chosen))
        precision = successes / n_queries
        low, high = binomial_ci(successes, n_queries, level)
        points.append(PrecisionPoint(s, precision, low, high, n_queries))
        matches.append((s, chosen, nn_idx, nn_d2))
    if return_matches:
        return points, matches
    return points
