"""Polarization image dehazing by simulated fog diffusion and deconvolution."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .core import ImageStack, Spectrum3D, fft3, ifft3, pad_replicate_3d, resample
from .diffusion import DehazeParams, DehazeResult, dehaze
from .histmatch import match_histogram
from .imageio import load_image, save_image
from .metrics import MetricsReport, evaluate
from .mosaic import MosaicLayout, PolarFrame, aolp, demosaic, dolp, stokes
from .scatter import ScatterParams, invert_haze, synth_haze

__all__ = [
    "BACKEND",
    "DehazeParams",
    "DehazeResult",
    "ImageStack",
    "MetricsReport",
    "MosaicLayout",
    "PolarFrame",
    "ScatterParams",
    "Spectrum3D",
    "aolp",
    "dehaze",
    "demosaic",
    "dolp",
    "evaluate",
    "fft3",
    "ifft3",
    "invert_haze",
    "load_image",
    "match_histogram",
    "pad_replicate_3d",
    "resample",
    "save_image",
    "stokes",
    "synth_haze",
]
