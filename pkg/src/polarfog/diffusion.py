"""Simulated fog diffusion and its spatiotemporal deconvolution.

The input image is blurred with a growing Gaussian to imitate fog spreading
over time. The blur increments form a volume (time x rows x cols) whose 3-D
spectrum is multiplied by ``sqrt(xi^2 + i*omega/K)``, the reciprocal of the
diffusion transfer function. The restored frames are averaged and inverted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np
import scipy.fft

from ._backend import kernels
from .core import (
    ImageStack,
    as_gray,
    crop_3d,
    pad_replicate_3d,
    spatial_freq2,
    temporal_freq,
)

__all__ = [
    "DehazeParams",
    "DiffusionKernel",
    "DehazeResult",
    "DC_POLICIES",
    "gaussian_weights",
    "gaussian_blur",
    "sigma_schedule",
    "build_diffusion_stack",
    "moving_average_time",
    "blur_increments",
    "psf_spectrum",
    "deconvolution_kernel",
    "apply_deconvolution",
    "deconvolve_volume",
    "pair_average",
    "normalize",
    "dehaze",
    "analytic_diffusion",
]

DC_POLICIES = ("zero", "unit")


@dataclass(frozen=True)
class DehazeParams:
    layers: int = 100
    outputs: int = 51
    k_diff: float = 1.0
    sigma_max: float = 5.0
    t_downsample: int = 2
    s_downsample: int = 2
    pad_t: int = 8
    pad_s: int = 16
    smooth_window: int = 3
    t_extend_factor: int = 2
    dc_policy: str = "zero"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.layers < 2:
            problems.append(f"layers must be >= 2 (got {self.layers})")
        if self.outputs < 1:
            problems.append(f"outputs must be >= 1 (got {self.outputs})")
        if not self.k_diff > 0:
            problems.append(f"k_diff must be > 0 (got {self.k_diff})")
        if not self.sigma_max > 0:
            problems.append(f"sigma_max must be > 0 (got {self.sigma_max})")
        if self.t_downsample < 1 or self.s_downsample < 1:
            problems.append("downsample factors must be >= 1")
        if self.pad_t < 0 or self.pad_s < 0:
            problems.append("pad widths must be >= 0")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            problems.append(f"smooth_window must be a positive odd integer (got {self.smooth_window})")
        if self.t_extend_factor < 1:
            problems.append(f"t_extend_factor must be >= 1 (got {self.t_extend_factor})")
        if self.dc_policy not in DC_POLICIES:
            problems.append(f"dc_policy must be one of {DC_POLICIES} (got {self.dc_policy!r})")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


# -- forward simulation -------------------------------------------------------


def gaussian_weights(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian truncated at ``ceil(3*sigma)`` on each side."""
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_blur(img, sigma: float) -> np.ndarray:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    img = as_gray(img)
    if sigma == 0:
        return img.copy()
    return kernels.blur_separable(img, gaussian_weights(sigma))


def sigma_schedule(p: DehazeParams) -> np.ndarray:
    return p.sigma_max * np.arange(p.layers) / (p.layers - 1)


def build_diffusion_stack(img, p: DehazeParams = DehazeParams()) -> ImageStack:
    """Layer ``j`` is the input blurred with ``sigma_max * j / (layers - 1)``."""
    img = as_gray(img)
    data = np.empty((p.layers,) + img.shape)
    for j, sigma in enumerate(sigma_schedule(p)):
        data[j] = gaussian_blur(img, float(sigma))
    return ImageStack(data)


def moving_average_time(stack: ImageStack, window: int) -> ImageStack:
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if window == 1:
        return stack
    return ImageStack(kernels.moving_average_axis0(stack.data, int(window)), dt=stack.dt)


def blur_increments(stack: ImageStack, original, p: DehazeParams = DehazeParams()) -> ImageStack:
    """Blurred-minus-original, smoothed in time, then every ``t_downsample``-th layer kept."""
    original = as_gray(original, "original")
    if stack.data.shape[1:] != original.shape:
        raise ValueError(f"stack layers {stack.data.shape[1:]} do not match original {original.shape}")
    inc = ImageStack(stack.data - original[None], dt=stack.dt)
    inc = moving_average_time(inc, p.smooth_window)
    return ImageStack(inc.data[::p.t_downsample], dt=stack.dt)


# -- frequency domain ---------------------------------------------------------


def psf_spectrum(xi2, omega, k_diff: float = 1.0) -> np.ndarray:
    """Diffusion transfer function ``1 / sqrt(xi^2 + i*omega/K)``; inf at DC."""
    z = np.sqrt(np.asarray(xi2)[None, :, :] + 1j * np.asarray(omega)[:, None, None] / k_diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / z


class DiffusionKernel(NamedTuple):
    values: np.ndarray  # complex, shape (layers, rows, cols)
    dc_policy: str


def deconvolution_kernel(shape, xi2=None, omega=None, k_diff: float = 1.0,
                         dc_policy: str = "zero") -> DiffusionKernel:
    """Per-bin ``sqrt(xi^2 + i*omega/K)`` on the principal branch.

    Grids default to the standard layout for ``shape``. At DC the square root
    is 0; ``dc_policy="unit"`` passes the mean through instead.
    """
    if not k_diff > 0:
        raise ValueError(f"k_diff must be > 0, got {k_diff}")
    if dc_policy not in DC_POLICIES:
        raise ValueError(f"unknown dc_policy {dc_policy!r}")
    layers, rows, cols = shape
    xi2 = spatial_freq2(rows, cols) if xi2 is None else np.asarray(xi2, dtype=np.float64)
    omega = temporal_freq(layers) if omega is None else np.asarray(omega, dtype=np.float64)
    values = np.sqrt(xi2[None, :, :] + 1j * (omega / k_diff)[:, None, None])
    values[0, 0, 0] = 1.0 if dc_policy == "unit" else 0.0
    return DiffusionKernel(values, dc_policy)


def deconvolve_volume(stack: ImageStack, k_diff: float = 1.0, dc_policy: str = "zero",
                      workers=None) -> tuple[ImageStack, float]:
    """Multiply the 3-D spectrum by the deconvolution kernel and transform back.

    Returns the real part and the largest absolute imaginary residue.
    """
    spec = scipy.fft.fftn(stack.data, workers=workers)
    xi2 = spatial_freq2(stack.rows, stack.cols)
    omega = temporal_freq(stack.layers, stack.dt)
    spec *= deconvolution_kernel(stack.shape, xi2, omega, k_diff, dc_policy).values
    vol = scipy.fft.ifftn(spec, workers=workers, overwrite_x=True)
    residue = float(np.abs(vol.imag).max())
    return ImageStack(np.ascontiguousarray(vol.real), dt=stack.dt), residue


def _extended_length(layers: int, factor: int) -> int:
    # odd length: no self-conjugate Nyquist bin on the time axis
    n = layers * factor
    return n + 1 if n % 2 == 0 else n


def _spatial_geometry(rows: int, pad: int, factor: int) -> tuple[int, int]:
    """Downsampled size of a padded axis and the pad width at that scale."""
    padded = rows + 2 * pad
    down = max(1, -(-padded // factor))
    if padded == 1 or down == 1:
        return down, 0
    crop = int(round(pad * (down - 1) / (padded - 1)))
    return down, crop


def apply_deconvolution(stack: ImageStack, p: DehazeParams = DehazeParams(), workers=None,
                        return_residue: bool = False):
    """Deconvolve an increment volume; output is at the downsampled spatial scale.

    Stages: replicate-pad, spatial bilinear downsample, temporal smoothing,
    time-axis extension by replicating the last layer, 3-D FFT, kernel
    multiply, inverse FFT, crop, and per-frame mean restoration.
    """
    padded = pad_replicate_3d(stack, p.pad_t, p.pad_s, p.pad_s)
    layers, prow, pcol = padded.shape
    down_r, crop_r = _spatial_geometry(stack.rows, p.pad_s, p.s_downsample)
    down_c, crop_c = _spatial_geometry(stack.cols, p.pad_s, p.s_downsample)
    if (down_r, down_c) == (prow, pcol):
        small = padded.data
    else:
        small = np.empty((layers, down_r, down_c))
        for j in range(layers):
            small[j] = kernels.resample_bilinear(padded.data[j], down_r, down_c)
    vol = moving_average_time(ImageStack(small, dt=stack.dt), p.smooth_window)

    n_ext = _extended_length(layers, p.t_extend_factor)
    ext = np.concatenate([vol.data, np.repeat(vol.data[-1:], n_ext - layers, axis=0)], axis=0)
    restored, residue = deconvolve_volume(ImageStack(ext, dt=stack.dt), p.k_diff, p.dc_policy, workers)

    restored = crop_3d(ImageStack(restored.data[:layers], dt=stack.dt), p.pad_t, crop_r, crop_c)
    reference = crop_3d(vol, p.pad_t, crop_r, crop_c)
    out = restored.data
    out += (reference.data.mean(axis=(1, 2)) - out.mean(axis=(1, 2)))[:, None, None]
    result = ImageStack(out, dt=stack.dt)
    if return_residue:
        return result, residue
    return result


# -- assembly -----------------------------------------------------------------


def pair_average(stack: ImageStack, outputs: int) -> ImageStack:
    """Average each frame with its successor, yielding exactly ``outputs`` frames.

    The sequence is first cut or extended (by repeating its last frame) to
    ``outputs`` frames; the final frame pairs with itself.
    """
    data = stack.data
    n = data.shape[0]
    if n < outputs:
        data = np.concatenate([data, np.repeat(data[-1:], outputs - n, axis=0)], axis=0)
    else:
        data = data[:outputs]
    nxt = np.concatenate([data[1:], data[-1:]], axis=0)
    return ImageStack(0.5 * (data + nxt), dt=stack.dt)


def normalize(img) -> np.ndarray:
    """Map ``[min, max]`` onto ``[0, 1]``; a constant image maps to zeros."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


class DehazeResult(NamedTuple):
    final: np.ndarray
    sequence: ImageStack


def dehaze(img, p: DehazeParams = DehazeParams(), workers=None) -> DehazeResult:
    """Full pipeline. ``sequence`` holds the ``p.outputs`` frames before inversion."""
    img = as_gray(img)
    rows, cols = img.shape
    stack = build_diffusion_stack(img, p)
    inc = blur_increments(stack, img, p)
    del stack
    restored = apply_deconvolution(inc, p, workers=workers)
    frames = pair_average(restored, p.outputs)
    seq = np.empty((p.outputs, rows, cols))
    for j in range(p.outputs):
        seq[j] = kernels.resample_bilinear(frames.data[j], rows, cols)
    final = 1.0 - normalize(seq.mean(axis=0))
    return DehazeResult(final=final, sequence=ImageStack(seq, dt=frames.dt))


# -- closed form --------------------------------------------------------------


def analytic_diffusion(grid, t: float, k_diff: float = 1.0, x0=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Point-source solution of the 3-D diffusion equation.

    ``grid`` is a triple of arrays (e.g. from ``np.meshgrid``) broadcastable
    against each other.
    """
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    if not k_diff > 0:
        raise ValueError(f"k_diff must be > 0, got {k_diff}")
    x, y, z = (np.asarray(g, dtype=np.float64) for g in grid)
    r2 = (x - x0[0]) ** 2 + (y - x0[1]) ** 2 + (z - x0[2]) ** 2
    four_kt = 4.0 * k_diff * t
    return (math.pi * four_kt) ** -1.5 * np.exp(-r2 / four_kt)
