"""No-reference dehazing metrics: new-edge rate, gradient ratio, saturation.

Visible edges are pixels whose Sobel gradient magnitude reaches a fraction
(default 5%) of the image's own dynamic range. The Sobel response is divided
by 8 so it estimates the per-pixel derivative; borders are edge-replicated.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .core import as_gray

__all__ = [
    "UndefinedMetricError",
    "MetricsReport",
    "EdgeMask",
    "DEFAULT_THRESHOLD",
    "GRAD_EPS",
    "SATURATION_EPS",
    "sobel_magnitude",
    "visible_edges",
    "metric_e",
    "metric_rbar",
    "metric_sigma",
    "metric_sd",
    "metric_ag",
    "evaluate",
]

DEFAULT_THRESHOLD = 0.05
GRAD_EPS = 1e-9
SATURATION_EPS = 1.0 / (2 * 65535)

_SOBEL_DERIV = np.array([-1.0, 0.0, 1.0])
_SOBEL_SMOOTH = np.array([1.0, 2.0, 1.0])


class UndefinedMetricError(ValueError):
    """A rate has an empty denominator (no visible edges to compare against)."""


class EdgeMask(NamedTuple):
    mask: np.ndarray
    count: int


def sobel_magnitude(img) -> np.ndarray:
    img = as_gray(img)
    gx = ndimage.correlate1d(img, _SOBEL_DERIV, axis=1, mode="nearest")
    gx = ndimage.correlate1d(gx, _SOBEL_SMOOTH, axis=0, mode="nearest")
    gy = ndimage.correlate1d(img, _SOBEL_DERIV, axis=0, mode="nearest")
    gy = ndimage.correlate1d(gy, _SOBEL_SMOOTH, axis=1, mode="nearest")
    return np.hypot(gx, gy) / 8.0


def _edges_from_gradient(grad: np.ndarray, dyn_range: float, threshold: float) -> EdgeMask:
    mask = (grad >= threshold * dyn_range) & (grad > 0)
    return EdgeMask(mask, int(np.count_nonzero(mask)))


def visible_edges(img, threshold: float = DEFAULT_THRESHOLD) -> EdgeMask:
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    img = as_gray(img)
    return _edges_from_gradient(sobel_magnitude(img), float(img.max() - img.min()), threshold)


def _pair(original, restored):
    original = as_gray(original, "original")
    restored = as_gray(restored, "restored")
    if original.shape != restored.shape:
        raise ValueError(f"original {original.shape} and restored {restored.shape} differ in shape")
    return original, restored


def metric_e(original, restored, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Relative gain in visible-edge count, ``(n_r - n_o) / n_o``."""
    original, restored = _pair(original, restored)
    n_o = visible_edges(original, threshold).count
    n_r = visible_edges(restored, threshold).count
    if n_o == 0:
        raise UndefinedMetricError("original image has no visible edges")
    return (n_r - n_o) / n_o


class _RbarParts(NamedTuple):
    value: float
    used: int
    excluded: int


def _rbar(grad_o, grad_r, edges_r: np.ndarray) -> _RbarParts:
    usable = edges_r & (grad_o >= GRAD_EPS)
    used = int(np.count_nonzero(usable))
    excluded = int(np.count_nonzero(edges_r)) - used
    if used == 0:
        raise UndefinedMetricError("restored image has no visible edges with a usable original gradient")
    log_ratio = np.log(grad_r[usable]) - np.log(grad_o[usable])
    return _RbarParts(float(np.exp(log_ratio.mean())), used, excluded)


def metric_rbar(original, restored, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Geometric mean of restored/original gradient ratio over restored visible edges.

    Edge pixels whose original gradient is below ``GRAD_EPS`` are left out.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    original, restored = _pair(original, restored)
    grad_r = sobel_magnitude(restored)
    edges = _edges_from_gradient(grad_r, float(restored.max() - restored.min()), threshold)
    return _rbar(sobel_magnitude(original), grad_r, edges.mask).value


def _saturated(img: np.ndarray) -> np.ndarray:
    return (img <= SATURATION_EPS) | (img >= 1.0 - SATURATION_EPS)


def _newly_saturated(original, restored) -> int:
    return int(np.count_nonzero(_saturated(restored) & ~_saturated(original)))


def metric_sigma(original, restored) -> float:
    """Fraction of pixels saturated in ``restored`` but interior in ``original``."""
    original, restored = _pair(original, restored)
    return _newly_saturated(original, restored) / restored.size


def metric_sd(img) -> float:
    """Population standard deviation on the 8-bit scale."""
    return float(as_gray(img).std() * 255.0)


def metric_ag(img) -> float:
    """Average gradient ``mean(sqrt((dx^2 + dy^2) / 2))`` on the 8-bit scale."""
    img = as_gray(img)
    if img.shape[0] < 2 or img.shape[1] < 2:
        return 0.0
    dx = img[:-1, 1:] - img[:-1, :-1]
    dy = img[1:, :-1] - img[:-1, :-1]
    return float(np.sqrt((dx * dx + dy * dy) / 2.0).mean() * 255.0)


@dataclass
class MetricsReport:
    e: float
    r_bar: float
    sigma: float
    sd: float
    ag: float
    n_o: int
    n_r: int
    n_s: int
    threshold: float
    excluded: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(original, restored, threshold: float = DEFAULT_THRESHOLD) -> MetricsReport:
    """Compute every metric in one pass over the gradients.

    ``e`` or ``r_bar`` come back as NaN when undefined; the counts are always set.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    original, restored = _pair(original, restored)
    grad_o = sobel_magnitude(original)
    grad_r = sobel_magnitude(restored)
    edges_o = _edges_from_gradient(grad_o, float(original.max() - original.min()), threshold)
    edges_r = _edges_from_gradient(grad_r, float(restored.max() - restored.min()), threshold)
    e = (edges_r.count - edges_o.count) / edges_o.count if edges_o.count else float("nan")
    try:
        parts = _rbar(grad_o, grad_r, edges_r.mask)
        r_bar, excluded = parts.value, parts.excluded
    except UndefinedMetricError:
        r_bar, excluded = float("nan"), edges_r.count
    n_s = _newly_saturated(original, restored)
    return MetricsReport(
        e=e,
        r_bar=r_bar,
        sigma=n_s / restored.size,
        sd=metric_sd(restored),
        ag=metric_ag(restored),
        n_o=edges_o.count,
        n_r=edges_r.count,
        n_s=n_s,
        threshold=threshold,
        excluded=excluded,
    )
