"""Reading and writing gray images and debug volumes.

PNG goes through Pillow. Binary PGM (P5) is simple enough to handle here,
which keeps 16-bit round trips exact.
"""
from __future__ import annotations

import io
import os
import re
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImageStack

__all__ = [
    "ImageFormatError",
    "load_image",
    "save_image",
    "save_stack",
    "load_stack",
    "atomic_write_bytes",
    "atomic_write_text",
]

SUPPORTED_SUFFIXES = (".png", ".pgm")


class ImageFormatError(ValueError):
    """The file is unreadable, empty, or stored in an unsupported layout."""


def load_image(path, normalize: bool = True) -> np.ndarray:
    """Load a gray image as float64.

    Color PNGs are averaged over R, G and B. With ``normalize`` the samples are
    divided by the format's maximum value (255, 65535, or the PGM maxval).
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        data, maxval = _read_pgm(path)
    elif suffix == ".png":
        data, maxval = _read_png(path)
    else:
        raise ImageFormatError(f"{path}: unsupported format {suffix!r}")
    if data.size == 0:
        raise ImageFormatError(f"{path}: zero-sized image")
    data = data.astype(np.float64)
    if normalize:
        data /= maxval
    return np.ascontiguousarray(data)


def _read_png(path: Path):
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "P", "RGB", "RGBA", "LA"):
                if mode == "P":
                    im = im.convert("RGB")
                    mode = "RGB"
                arr = np.asarray(im)
                maxval = 255.0
            elif mode.startswith("I;16"):
                arr = np.asarray(im)
                maxval = 65535.0
            elif mode == "I":
                # Pillow reports some 16-bit gray PNGs as 32-bit "I"
                arr = np.asarray(im)
                if arr.size and (arr.min() < 0 or arr.max() > 65535):
                    raise ImageFormatError(f"{path}: unsupported 32-bit integer samples")
                maxval = 65535.0
            else:
                raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r}")
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: cannot read PNG ({exc})") from exc
    if arr.ndim == 3:
        channels = arr[..., :3] if arr.shape[2] >= 3 else arr[..., :1]
        arr = channels.astype(np.float64).mean(axis=2)
    return arr, maxval


_PGM_HEADER = re.compile(rb"P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def _read_pgm(path: Path):
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"{path}: cannot read ({exc})") from exc
    m = _PGM_HEADER.match(raw)
    if m is None:
        raise ImageFormatError(f"{path}: not a binary (P5) PGM file")
    cols, rows, maxval = (int(g) for g in m.groups())
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = rows * cols
    body = raw[m.end():]
    if len(body) < count * dtype.itemsize:
        raise ImageFormatError(f"{path}: truncated pixel data")
    arr = np.frombuffer(body, dtype=dtype, count=count).reshape(rows, cols)
    return arr, float(maxval)


def _quantize(img, bits: int, vmin: float, vmax: float) -> np.ndarray:
    full = (1 << bits) - 1
    img = np.asarray(img, dtype=np.float64)
    span = vmax - vmin
    scaled = (img - vmin) / span if span > 0 else np.zeros_like(img)
    q = np.rint(np.clip(scaled, 0.0, 1.0) * full)
    return q.astype(np.uint16 if bits == 16 else np.uint8)


def _encode_pgm(q: np.ndarray) -> bytes:
    rows, cols = q.shape
    maxval = 65535 if q.dtype == np.uint16 else 255
    header = f"P5\n{cols} {rows}\n{maxval}\n".encode("ascii")
    body = q.astype(">u2").tobytes() if maxval > 255 else q.tobytes()
    return header + body


def _encode_png(q: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(q).save(buf, format="PNG")
    return buf.getvalue()


def save_image(path, img, bits: int = 16, vmin: float = 0.0, vmax: float = 1.0) -> None:
    """Write ``img`` mapping ``[vmin, vmax]`` affinely onto the integer range.

    Values outside the range are clipped. The write is atomic.
    """
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    path = Path(path)
    q = _quantize(img, bits, vmin, vmax)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        payload = _encode_pgm(q)
    elif suffix == ".png":
        payload = _encode_png(q)
    else:
        raise ImageFormatError(f"{path}: unsupported output format {suffix!r}")
    atomic_write_bytes(path, payload)


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_stack(directory, stack: ImageStack) -> None:
    """Persist a volume as ``layer_0000.pgm ...`` plus ``meta.txt``.

    Layers are stored as 16-bit PGM over the volume's own [min, max], which is
    recorded in ``meta.txt`` as ``vmin``/``vmax`` so ``load_stack`` can undo it.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vmin = float(stack.data.min())
    vmax = float(stack.data.max())
    width = max(4, len(str(stack.layers - 1)))
    for j in range(stack.layers):
        save_image(directory / f"layer_{j:0{width}d}.pgm", stack.data[j], bits=16, vmin=vmin, vmax=vmax)
    meta = (
        f"layers={stack.layers}\nrows={stack.rows}\ncols={stack.cols}\n"
        f"dt={stack.dt!r}\nvmin={vmin!r}\nvmax={vmax!r}\n"
    )
    atomic_write_text(directory / "meta.txt", meta)


def load_stack(directory) -> ImageStack:
    directory = Path(directory)
    meta = {}
    for line in (directory / "meta.txt").read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    layers, rows, cols = int(meta["layers"]), int(meta["rows"]), int(meta["cols"])
    vmin = float(meta.get("vmin", 0.0))
    vmax = float(meta.get("vmax", 1.0))
    files = sorted(directory.glob("layer_*.pgm"))
    if len(files) != layers:
        raise ImageFormatError(f"{directory}: expected {layers} layers, found {len(files)}")
    data = np.empty((layers, rows, cols))
    for j, f in enumerate(files):
        data[j] = vmin + load_image(f) * (vmax - vmin)
    return ImageStack(data, dt=float(meta.get("dt", 1.0)))
