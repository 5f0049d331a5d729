"""Forward inference ops for sequential CNNs.

Tensors are plain numpy float32 arrays, row-major, outermost extent
first: feature maps are (channels, height, width), vectors are 1-D.
All ops are pure functions of their inputs; convolution is
cross-correlation (no kernel flip), the convention of modern DNN stacks.
"""

import numpy as np

from ..errors import InvalidShapeError, NumericError
from . import backend


def as_f32(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float32)


def conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int
) -> np.ndarray:
    """Cross-correlate x[c,h,w] with w[n,c,kh,kw] plus per-channel bias b[n]."""
    if x.ndim != 3 or w.ndim != 4 or b.ndim != 1:
        raise InvalidShapeError(
            f"conv2d expects x[c,h,w], w[n,c,kh,kw], b[n]; got {x.shape}, {w.shape}, {b.shape}"
        )
    c, h, wd = x.shape
    n, cw, kh, kw = w.shape
    if cw != c:
        raise InvalidShapeError(f"conv2d input has {c} channels, weights expect {cw}")
    if b.shape[0] != n:
        raise InvalidShapeError(f"conv2d has {n} filters but {b.shape[0]} biases")
    if stride < 1:
        raise InvalidShapeError(f"conv2d stride must be >= 1, got {stride}")
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise InvalidShapeError(
            f"conv2d kernel {kh}x{kw} stride {stride} pad {pad} does not fit input {h}x{wd}"
        )
    if not np.isfinite(x).all():
        raise NumericError("conv2d input contains non-finite values")
    return backend.conv2d(as_f32(x), as_f32(w), as_f32(b), stride, pad)


def maxpool2d_forward(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Per-window maximum over x[c,h,w]; no padding."""
    if x.ndim != 3:
        raise InvalidShapeError(f"maxpool expects x[c,h,w], got {x.shape}")
    _, h, wd = x.shape
    if kh > h or kw > wd:
        raise InvalidShapeError(f"pool window {kh}x{kw} larger than input {h}x{wd}")
    if stride < 1:
        raise InvalidShapeError(f"pool stride must be >= 1, got {stride}")
    return backend.maxpool2d(as_f32(x), kh, kw, stride)


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = W @ x + b with W[out,in]."""
    if x.ndim != 1 or w.ndim != 2 or b.ndim != 1:
        raise InvalidShapeError(
            f"linear expects x[in], w[out,in], b[out]; got {x.shape}, {w.shape}, {b.shape}"
        )
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise InvalidShapeError(f"linear shapes do not chain: x{x.shape} w{w.shape} b{b.shape}")
    return as_f32(as_f32(w) @ as_f32(x) + as_f32(b))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(as_f32(x), np.float32(0.0))


def softmax(x: np.ndarray) -> np.ndarray:
    if x.ndim != 1:
        raise InvalidShapeError(f"softmax expects a vector, got {x.shape}")
    z = as_f32(x)
    z = np.exp(z - z.max())
    return as_f32(z / z.sum())


def flatten(x: np.ndarray) -> np.ndarray:
    # C-order ravel preserves the documented row-major layout.
    return as_f32(x).reshape(-1)
