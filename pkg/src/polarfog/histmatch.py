"""Histogram matching of a processed image onto a reference image."""
from __future__ import annotations

import numpy as np

from .core import as_gray

__all__ = ["match_histogram", "bin_index", "ks_distance"]


def bin_index(img, bins: int) -> np.ndarray:
    """Bin of each sample on ``bins`` equal-width bins over [0, 1] (values outside are clipped)."""
    idx = np.floor(np.asarray(img, dtype=np.float64) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def match_histogram(src, ref, bins: int = 256) -> np.ndarray:
    """Map ``src`` so its distribution follows ``ref``.

    Source samples are grouped into ``bins`` bins on [0, 1]. Every sample in a
    bin receives the smallest reference value whose empirical CDF reaches the
    bin's mid-CDF (the cumulative count halfway through the bin). Output values
    are always actual reference samples, so a constant reference maps exactly.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    src = as_gray(src, "src")
    ref = as_gray(ref, "ref")

    idx = bin_index(src, bins)
    counts = np.bincount(idx.ravel(), minlength=bins)
    upper = np.cumsum(counts)
    n_src = int(upper[-1])
    ref_sorted = np.sort(ref, axis=None)
    n_ref = ref_sorted.size

    # smallest k with k / n_ref >= (lower + upper) / (2 * n_src), in integers
    twice_mid = 2 * upper - counts
    k = -(-(twice_mid * n_ref) // (2 * n_src))
    k = np.clip(k, 1, n_ref)
    mapping = ref_sorted[k - 1]
    return np.ascontiguousarray(mapping[idx])


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic between the empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=np.float64), axis=None)
    b = np.sort(np.asarray(b, dtype=np.float64), axis=None)
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())
