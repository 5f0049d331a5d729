"""Numba-compiled hot kernels for the forward pass.

Convolution and pooling dominate per-layer profiling time, so they get
@njit nested-loop implementations. Compilation happens on first call;
profiling always does a warmup pass, which absorbs the JIT cost.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv2d(x, w, b, stride, pad):
    c, h, wd = x.shape
    n = w.shape[0]
    kh = w.shape[2]
    kw = w.shape[3]
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    if pad > 0:
        xp = np.zeros((c, h + 2 * pad, wd + 2 * pad), dtype=np.float32)
        xp[:, pad : pad + h, pad : pad + wd] = x
    else:
        xp = x
    out = np.empty((n, oh, ow), dtype=np.float32)
    # unit-stride inner loops over output rows so LLVM can vectorize them;
    # per output element the (ci, ky, kx) accumulation order matches the
    # naive reference
    for f in range(n):
        out_f = out[f]
        bias = b[f]
        for oy in range(oh):
            row = out_f[oy]
            for ox in range(ow):
                row[ox] = bias
        for ci in range(c):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[f, ci, ky, kx]
                    for oy in range(oh):
                        xrow = xp[ci, oy * stride + ky]
                        orow = out_f[oy]
                        if stride == 1:
                            for ox in range(ow):
                                orow[ox] += wv * xrow[ox + kx]
                        else:
                            for ox in range(ow):
                                orow[ox] += wv * xrow[ox * stride + kx]
    return out


@njit(cache=True)
def maxpool2d(x, kh, kw, stride):
    c, h, wd = x.shape
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    out = np.empty((c, oh, ow), dtype=np.float32)
    for ci in range(c):
        for oy in range(oh):
            for ox in range(ow):
                best = x[ci, oy * stride, ox * stride]
                for ky in range(kh):
                    for kx in range(kw):
                        v = x[ci, oy * stride + ky, ox * stride + kx]
                        if v > best:
                            best = v
                out[ci, oy, ox] = best
    return out
