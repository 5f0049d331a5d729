from .backend import active_backend
from .mlp import MlpGrads, MlpNet, mlp_backward, mlp_forward, mlp_init, sgd_step
from .ops import (
    as_f32,
    conv2d_forward,
    flatten,
    linear_forward,
    maxpool2d_forward,
    relu,
    softmax,
)

__all__ = [
    "active_backend",
    "as_f32",
    "conv2d_forward",
    "maxpool2d_forward",
    "linear_forward",
    "relu",
    "softmax",
    "flatten",
    "MlpNet",
    "MlpGrads",
    "mlp_init",
    "mlp_forward",
    "mlp_backward",
    "sgd_step",
]
