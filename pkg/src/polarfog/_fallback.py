"""NumPy versions of the compiled kernels in ``_kernels.pyx``.

Each function performs the same floating-point operations in the same order
as its compiled twin, so the two backends agree bit for bit on x86-64.
"""
import numpy as np


def blur_separable(img, weights):
    """Separable convolution with a symmetric odd-length kernel, edge-replicated."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    rows, cols = img.shape
    radius = weights.shape[0] // 2

    padded = np.pad(img, ((0, 0), (radius, radius)), mode="edge")
    tmp = np.zeros((rows, cols))
    for k, w in enumerate(weights):
        tmp += w * padded[:, k:k + cols]

    padded = np.pad(tmp, ((radius, radius), (0, 0)), mode="edge")
    out = np.zeros((rows, cols))
    for k, w in enumerate(weights):
        out += w * padded[k:k + rows, :]
    return out


def moving_average_axis0(vol, window):
    """Centered moving average along axis 0 with edge replication."""
    vol = np.ascontiguousarray(vol, dtype=np.float64)
    layers = vol.shape[0]
    half = window // 2
    padded = np.pad(vol, ((half, half), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(vol)
    for k in range(window):
        out += padded[k:k + layers]
    return out * (1.0 / window)


def resample_bilinear(img, new_rows, new_cols):
    """Corner-aligned bilinear resampling with edge clamping."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    rows, cols = img.shape

    def axis(n_in, n_out):
        ratio = (n_in - 1) / float(n_out - 1) if n_out > 1 else 0.0
        src = np.arange(n_out) * ratio
        i0 = np.minimum(np.floor(src).astype(np.intp), n_in - 1)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    r0, r1, fy = axis(rows, new_rows)
    c0, c1, fx = axis(cols, new_cols)
    fx = fx[None, :]
    top = img[r0][:, c0] + fx * (img[r0][:, c1] - img[r0][:, c0])
    bot = img[r1][:, c0] + fx * (img[r1][:, c1] - img[r1][:, c0])
    return top + fy[:, None] * (bot - top)
