"""Single-scattering haze model: synthesis and exact inversion.

The forward model attenuates scene radiance by ``t = exp(-beta * z)`` and adds
airlight ``A = a_inf * (1 - t)``. Inverting with a known airlight map gives
the scene back, which the test suite uses as a ground-truth oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import as_gray

__all__ = [
    "ScatterParams",
    "HazeResult",
    "InversionResult",
    "TRANSMITTANCE_FLOOR",
    "transmittance",
    "synth_haze",
    "invert_haze",
    "invert_haze_with_report",
    "depth_ramp",
    "depth_step",
]

TRANSMITTANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class ScatterParams:
    beta: float
    a_inf: float
    depth: np.ndarray

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not 0 < self.a_inf <= 1:
            raise ValueError(f"a_inf must lie in (0, 1], got {self.a_inf}")
        depth = as_gray(self.depth, "depth")
        if np.any(depth < 0):
            raise ValueError("depth must be non-negative")
        object.__setattr__(self, "depth", depth)


class HazeResult(NamedTuple):
    hazy: np.ndarray
    airlight: np.ndarray


class InversionResult(NamedTuple):
    scene: np.ndarray
    invalid: int  # pixels where A >= a_inf (transmittance below the floor)


def transmittance(beta: float, depth) -> np.ndarray:
    return np.exp(-beta * np.asarray(depth, dtype=np.float64))


def synth_haze(scene, params: ScatterParams) -> HazeResult:
    scene = as_gray(scene, "scene")
    if scene.shape != params.depth.shape:
        raise ValueError(f"scene {scene.shape} and depth {params.depth.shape} differ in shape")
    t = transmittance(params.beta, params.depth)
    airlight = params.a_inf * (1.0 - t)
    return HazeResult(hazy=scene * t + airlight, airlight=airlight)


def invert_haze_with_report(hazy, airlight, a_inf: float) -> InversionResult:
    if not a_inf > 0:
        raise ValueError(f"a_inf must be > 0, got {a_inf}")
    hazy = as_gray(hazy, "hazy")
    airlight = as_gray(airlight, "airlight")
    if hazy.shape != airlight.shape:
        raise ValueError(f"hazy {hazy.shape} and airlight {airlight.shape} differ in shape")
    t = 1.0 - airlight / a_inf
    ok = t > TRANSMITTANCE_FLOOR
    scene = hazy.copy()
    np.divide(hazy - airlight, t, out=scene, where=ok)
    return InversionResult(scene=scene, invalid=int(ok.size - np.count_nonzero(ok)))


def invert_haze(hazy, airlight, a_inf: float) -> np.ndarray:
    """Recover scene radiance as ``(I - A) / (1 - A / a_inf)``.

    Pixels whose implied transmittance is at or below ``TRANSMITTANCE_FLOOR``
    are passed through unchanged; use :func:`invert_haze_with_report` to count them.
    """
    return invert_haze_with_report(hazy, airlight, a_inf).scene


def depth_ramp(rows: int, cols: int, near: float = 0.0, far: float = 1.0, axis: int = 0) -> np.ndarray:
    """Depth increasing linearly from ``near`` to ``far`` along ``axis``."""
    n = rows if axis == 0 else cols
    line = np.linspace(near, far, n)
    return np.ascontiguousarray(np.broadcast_to(line[:, None] if axis == 0 else line[None, :], (rows, cols)))


def depth_step(rows: int, cols: int, near: float = 0.0, far: float = 1.0, split: float = 0.5) -> np.ndarray:
    """Two depth planes split at column ``split * cols``."""
    depth = np.full((rows, cols), float(near))
    depth[:, int(round(split * cols)):] = far
    return depth
