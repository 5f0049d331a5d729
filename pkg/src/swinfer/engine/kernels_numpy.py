"""Pure-numpy kernels: the fallback path when numba is disabled or unavailable.

Semantically identical to the numba kernels (cross-correlation, float32),
implemented with strided window views so the fallback stays usable on
real model sizes.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    c, h, wd = x.shape
    n, _, kh, kw = w.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    sc, sh, sw = x.strides
    win = as_strided(
        x,
        shape=(c, oh, ow, kh, kw),
        strides=(sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )
    out = np.einsum("cyxuv,ncuv->nyx", win, w, optimize=True)
    out += b[:, None, None]
    return np.ascontiguousarray(out, dtype=np.float32)


def maxpool2d(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    c, h, wd = x.shape
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    sc, sh, sw = x.strides
    win = as_strided(
        x,
        shape=(c, oh, ow, kh, kw),
        strides=(sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )
    return np.ascontiguousarray(win.max(axis=(3, 4)), dtype=np.float32)
