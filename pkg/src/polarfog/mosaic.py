"""Division-of-focal-plane polarization mosaics and Stokes products."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .core import as_gray

__all__ = [
    "MosaicLayout",
    "PolarFrame",
    "DolpReport",
    "DEFAULT_LAYOUT",
    "demosaic",
    "remosaic",
    "stokes",
    "dolp",
    "dolp_with_report",
    "aolp",
    "polar_products",
    "DOLP_EPS",
]

DOLP_EPS = 1e-6
ANGLES = (0, 45, 90, 135)


@dataclass(frozen=True)
class MosaicLayout:
    """Polarizer angle (degrees) at each position of a 2x2 superpixel."""

    top_left: int = 90
    top_right: int = 45
    bottom_left: int = 135
    bottom_right: int = 0

    def __post_init__(self):
        if sorted(self.angles()) != list(ANGLES):
            raise ValueError(f"layout angles must be a permutation of {ANGLES}, got {self.angles()}")

    def angles(self) -> tuple[int, int, int, int]:
        return (self.top_left, self.top_right, self.bottom_left, self.bottom_right)

    def offsets(self) -> dict[int, tuple[int, int]]:
        """Map angle -> (row, col) offset inside the superpixel."""
        pos = ((0, 0), (0, 1), (1, 0), (1, 1))
        return dict(zip(self.angles(), pos))

    @classmethod
    def parse(cls, text: str) -> "MosaicLayout":
        """Parse ``"TL,TR,BL,BR"`` angle lists such as ``"90,45,135,0"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"layout needs four comma-separated angles, got {text!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise ValueError(f"bad layout {text!r}: {exc}") from None

    def __str__(self) -> str:
        return ",".join(str(a) for a in self.angles())


DEFAULT_LAYOUT = MosaicLayout()


@dataclass(frozen=True)
class PolarFrame:
    i0: np.ndarray
    i45: np.ndarray
    i90: np.ndarray
    i135: np.ndarray
    s0: Optional[np.ndarray] = None
    s1: Optional[np.ndarray] = None
    s2: Optional[np.ndarray] = None
    dolp: Optional[np.ndarray] = field(default=None)
    aolp: Optional[np.ndarray] = field(default=None)

    PLANES = ("i0", "i45", "i90", "i135", "s0", "s1", "s2", "dolp", "aolp")

    def planes(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.PLANES if getattr(self, name) is not None}


class DolpReport(NamedTuple):
    degenerate: int  # pixels with S0 <= eps, set to 0
    clamped: int  # pixels whose raw ratio exceeded 1


def demosaic(raw, layout: MosaicLayout = DEFAULT_LAYOUT) -> PolarFrame:
    """Split a raw mosaic into its four angle planes, without interpolation."""
    raw = as_gray(raw, "mosaic")
    rows, cols = raw.shape
    if rows % 2 or cols % 2:
        raise ValueError(f"mosaic dimensions must be even, got {raw.shape}")
    planes = {
        angle: np.ascontiguousarray(raw[dr::2, dc::2])
        for angle, (dr, dc) in layout.offsets().items()
    }
    return PolarFrame(i0=planes[0], i45=planes[45], i90=planes[90], i135=planes[135])


def remosaic(frame: PolarFrame, layout: MosaicLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Inverse of :func:`demosaic`."""
    by_angle = {0: frame.i0, 45: frame.i45, 90: frame.i90, 135: frame.i135}
    rows, cols = frame.i0.shape
    raw = np.empty((2 * rows, 2 * cols), dtype=np.float64)
    for angle, (dr, dc) in layout.offsets().items():
        raw[dr::2, dc::2] = by_angle[angle]
    return raw


def stokes(frame: PolarFrame) -> PolarFrame:
    shapes = {p.shape for p in (frame.i0, frame.i45, frame.i90, frame.i135)}
    if len(shapes) != 1:
        raise ValueError(f"angle planes differ in shape: {sorted(shapes)}")
    return replace(
        frame,
        s0=frame.i0 + frame.i90,
        s1=frame.i0 - frame.i90,
        s2=frame.i45 - frame.i135,
    )


def _require_stokes(frame: PolarFrame) -> PolarFrame:
    return frame if frame.s0 is not None else stokes(frame)


def dolp_with_report(frame: PolarFrame, eps: float = DOLP_EPS) -> tuple[np.ndarray, DolpReport]:
    frame = _require_stokes(frame)
    s0 = frame.s0
    ok = s0 > eps
    mag = np.hypot(frame.s1, frame.s2)
    ratio = np.zeros_like(s0)
    np.divide(mag, s0, out=ratio, where=ok)
    clamped = int(np.count_nonzero(ratio > 1.0))
    np.clip(ratio, 0.0, 1.0, out=ratio)
    return ratio, DolpReport(degenerate=int(ok.size - np.count_nonzero(ok)), clamped=clamped)


def dolp(frame: PolarFrame, eps: float = DOLP_EPS) -> np.ndarray:
    """Degree of linear polarization, 0 where ``S0 <= eps``, clamped to [0, 1]."""
    return dolp_with_report(frame, eps)[0]


def aolp(frame: PolarFrame) -> np.ndarray:
    """Angle of linear polarization in radians, range (-pi/2, pi/2].

    Uses the two-argument arctangent so the quadrant of (S1, S2) is respected.
    """
    frame = _require_stokes(frame)
    angle = 0.5 * np.arctan2(frame.s2, frame.s1)
    # atan2(-0.0, x<0) lands on -pi; fold it onto the open end of the range
    angle[angle <= -np.pi / 2] = np.pi / 2
    return angle


def polar_products(raw, layout: MosaicLayout = DEFAULT_LAYOUT, eps: float = DOLP_EPS):
    """Full product set from a raw mosaic: returns ``(frame, dolp_report)``."""
    frame = stokes(demosaic(raw, layout))
    d, report = dolp_with_report(frame, eps)
    return replace(frame, dolp=d, aolp=aolp(frame)), report
