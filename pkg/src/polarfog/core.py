"""Image and volume containers, resampling, padding and 3-D FFT plumbing.

A gray image is a plain 2-D ``float64`` ndarray. Volumes carry a little more
state (time spacing, frequency grids), so they get small frozen dataclasses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from ._backend import kernels

__all__ = [
    "ImageStack",
    "Spectrum3D",
    "as_gray",
    "resample",
    "pad_replicate_3d",
    "crop_3d",
    "spatial_freq2",
    "temporal_freq",
    "fft3",
    "ifft3",
]


def as_gray(img, name="image") -> np.ndarray:
    """Return ``img`` as a C-contiguous 2-D float64 array, rejecting bad input."""
    arr = np.ascontiguousarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


@dataclass(frozen=True)
class ImageStack:
    """Time-ordered volume, shape ``(layers, rows, cols)``."""

    data: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"stack data must be 3-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.size == 0:
            raise ValueError("stack must have at least one non-empty layer")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "data", data)

    @property
    def layers(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __getitem__(self, index) -> np.ndarray:
        return self.data[index]


@dataclass(frozen=True)
class Spectrum3D:
    """Unnormalized 3-D DFT of a stack together with its frequency grids.

    ``xi2`` has shape ``(rows, cols)`` and holds the squared angular spatial
    frequency in rad^2/px^2; ``omega`` has shape ``(layers,)`` in rad/step.
    """

    data: np.ndarray
    xi2: np.ndarray
    omega: np.ndarray
    dt: float = 1.0

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def spatial_freq2(rows: int, cols: int) -> np.ndarray:
    """Squared angular frequency magnitude for every 2-D DFT bin."""
    xr = 2.0 * np.pi * np.fft.fftfreq(rows)
    xc = 2.0 * np.pi * np.fft.fftfreq(cols)
    return xr[:, None] ** 2 + xc[None, :] ** 2


def temporal_freq(layers: int, dt: float = 1.0) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(layers, d=dt)


def fft3(stack: ImageStack, workers: int | None = None) -> Spectrum3D:
    """Forward 3-D DFT (no normalization) over time, rows and cols."""
    spec = scipy.fft.fftn(stack.data, workers=workers)
    return Spectrum3D(
        data=spec,
        xi2=spatial_freq2(stack.rows, stack.cols),
        omega=temporal_freq(stack.layers, stack.dt),
        dt=stack.dt,
    )


def ifft3(spec: Spectrum3D, workers: int | None = None, real: bool = True) -> ImageStack:
    """Inverse 3-D DFT carrying the 1/N factor.

    With ``real=True`` the imaginary residue is discarded; callers that need to
    check it should use ``scipy.fft.ifftn`` on ``spec.data`` directly.
    """
    vol = scipy.fft.ifftn(spec.data, workers=workers)
    if real:
        vol = vol.real
    return ImageStack(np.ascontiguousarray(vol), dt=spec.dt)


def resample(img, new_rows: int, new_cols: int, method: str = "bilinear") -> np.ndarray:
    """Resize to exactly ``(new_rows, new_cols)``.

    Sample positions are corner-aligned (output pixel ``j`` reads source
    coordinate ``j * (n_in - 1) / (n_out - 1)``), clamped at the edges.
    """
    if new_rows < 1 or new_cols < 1:
        raise ValueError(f"target dimensions must be >= 1, got {(new_rows, new_cols)}")
    img = as_gray(img)
    if method == "bilinear":
        return kernels.resample_bilinear(img, int(new_rows), int(new_cols))
    if method == "nearest":
        rows, cols = img.shape
        ri = _nearest_index(rows, new_rows)
        ci = _nearest_index(cols, new_cols)
        return np.ascontiguousarray(img[ri][:, ci])
    raise ValueError(f"unknown resample method {method!r}")


def _nearest_index(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1:
        return np.zeros(1, dtype=np.intp)
    src = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    return np.minimum(np.floor(src + 0.5).astype(np.intp), n_in - 1)


def pad_replicate_3d(stack: ImageStack, pad_t: int, pad_r: int, pad_c: int) -> ImageStack:
    if min(pad_t, pad_r, pad_c) < 0:
        raise ValueError("pad widths must be non-negative")
    data = np.pad(stack.data, ((pad_t, pad_t), (pad_r, pad_r), (pad_c, pad_c)), mode="edge")
    return ImageStack(data, dt=stack.dt)


def crop_3d(stack: ImageStack, pad_t: int, pad_r: int, pad_c: int) -> ImageStack:
    """Remove ``pad`` samples from both ends of each axis (inverse of padding)."""
    layers, rows, cols = stack.shape
    if 2 * pad_t >= layers or 2 * pad_r >= rows or 2 * pad_c >= cols:
        raise ValueError(f"crop {(pad_t, pad_r, pad_c)} too large for stack {stack.shape}")
    data = stack.data[pad_t:layers - pad_t, pad_r:rows - pad_r, pad_c:cols - pad_c]
    return ImageStack(data.copy(), dt=stack.dt)
