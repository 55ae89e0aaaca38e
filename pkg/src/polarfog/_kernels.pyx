# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures and results match ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def blur_separable(const double[:, ::1] img, const double[::1] weights):
    """Separable convolution with a symmetric odd-length kernel, edge-replicated."""
    cdef Py_ssize_t rows = img.shape[0], cols = img.shape[1]
    cdef Py_ssize_t width = weights.shape[0], radius = width // 2
    cdef Py_ssize_t r, c, k, src
    cdef double acc
    tmp_arr = np.empty((rows, cols), dtype=np.float64)
    out_arr = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        for r in range(rows):
            for c in range(cols):
                acc = 0.0
                for k in range(width):
                    src = c + k - radius
                    if src < 0:
                        src = 0
                    elif src >= cols:
                        src = cols - 1
                    acc = acc + weights[k] * img[r, src]
                tmp[r, c] = acc
        for r in range(rows):
            for c in range(cols):
                out[r, c] = 0.0
            for k in range(width):
                src = r + k - radius
                if src < 0:
                    src = 0
                elif src >= rows:
                    src = rows - 1
                for c in range(cols):
                    out[r, c] = out[r, c] + weights[k] * tmp[src, c]
    return out_arr


def moving_average_axis0(const double[:, :, ::1] vol, Py_ssize_t window):
    """Centered moving average along axis 0 with edge replication."""
    cdef Py_ssize_t layers = vol.shape[0], rows = vol.shape[1], cols = vol.shape[2]
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t t, k, src, r, c
    cdef double scale = 1.0 / window
    out_arr = np.zeros((layers, rows, cols), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for t in range(layers):
            for k in range(-half, half + 1):
                src = t + k
                if src < 0:
                    src = 0
                elif src >= layers:
                    src = layers - 1
                for r in range(rows):
                    for c in range(cols):
                        out[t, r, c] = out[t, r, c] + vol[src, r, c]
            for r in range(rows):
                for c in range(cols):
                    out[t, r, c] = out[t, r, c] * scale
    return out_arr


def resample_bilinear(const double[:, ::1] img, Py_ssize_t new_rows, Py_ssize_t new_cols):
    """Corner-aligned bilinear resampling with edge clamping."""
    cdef Py_ssize_t rows = img.shape[0], cols = img.shape[1]
    cdef Py_ssize_t i, j, r0, r1, c0, c1
    cdef double sy, sx, fy, fx, top, bot
    cdef double ry = (rows - 1) / <double>(new_rows - 1) if new_rows > 1 else 0.0
    cdef double rx = (cols - 1) / <double>(new_cols - 1) if new_cols > 1 else 0.0
    out_arr = np.empty((new_rows, new_cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(new_rows):
            sy = i * ry
            r0 = <Py_ssize_t>floor(sy)
            if r0 > rows - 1:
                r0 = rows - 1
            r1 = r0 + 1 if r0 + 1 < rows else rows - 1
            fy = sy - r0
            for j in range(new_cols):
                sx = j * rx
                c0 = <Py_ssize_t>floor(sx)
                if c0 > cols - 1:
                    c0 = cols - 1
                c1 = c0 + 1 if c0 + 1 < cols else cols - 1
                fx = sx - c0
                top = img[r0, c0] + fx * (img[r0, c1] - img[r0, c0])
                bot = img[r1, c0] + fx * (img[r1, c1] - img[r1, c0])
                out[i, j] = top + fy * (bot - top)
    return out_arr
