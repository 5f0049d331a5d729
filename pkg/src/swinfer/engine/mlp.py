"""Small trainable MLP (forward + backward + SGD) used by the search agent.

Hidden layers are rectified; the output activation is configurable
(sigmoid for policies bounded in (0,1), identity for value heads).
Training math runs in float64 so gradient checks against finite
differences are meaningful; only the CNN inference path is float32.

Forward/backward accept a single vector or a batch (rows = samples).
Backward returns gradients summed over the batch, plus the gradient
with respect to the input (needed to chain a policy through a critic).
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidShapeError

SIGMOID = "sigmoid"
IDENTITY = "identity"


@dataclass
class MlpNet:
    layer_dims: list[int]
    weights: list[np.ndarray]  # per layer, [out, in]
    biases: list[np.ndarray]  # per layer, [out]
    output_activation: str = SIGMOID

    def copy(self) -> "MlpNet":
        return MlpNet(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
        )

    def params(self):
        return self.weights + self.biases


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    x: np.ndarray = field(default=None)  # dLoss/dinput, batch-shaped

    def scaled(self, s: float) -> "MlpGrads":
        return MlpGrads([w * s for w in self.weights], [b * s for b in self.biases], self.x)


def mlp_init(layer_dims, output_activation=SIGMOID, rng=None) -> MlpNet:
    """Uniform +-1/sqrt(fan_in) init, the classic torch default."""
    if len(layer_dims) < 2:
        raise InvalidShapeError("an MLP needs at least input and output dims")
    if output_activation not in (SIGMOID, IDENTITY):
        raise InvalidShapeError(f"unknown output activation {output_activation!r}")
    rng = rng or np.random.default_rng()
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpNet(list(layer_dims), weights, biases, output_activation)


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise InvalidShapeError(f"MLP input must be 1-D or 2-D, got shape {x.shape}")


def mlp_forward(net: MlpNet, x):
    """Returns (y, cache); feed the cache back into mlp_backward."""
    xb, single = _as_batch(x)
    if xb.shape[1] != net.layer_dims[0]:
        raise InvalidShapeError(f"MLP expects {net.layer_dims[0]} inputs, got {xb.shape[1]}")
    acts = [xb]
    pre = []
    a = xb
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
        elif net.output_activation == SIGMOID:
            a = 1.0 / (1.0 + np.exp(-z))
        else:
            a = z
        acts.append(a)
    y = acts[-1][0] if single else acts[-1]
    return y, (acts, pre, single)


def mlp_backward(net: MlpNet, cache, dy) -> MlpGrads:
    """Backprop dLoss/dy through the cached forward pass.

    Parameter gradients are summed over batch rows; `grads.x` carries
    dLoss/dinput with the same leading shape as the forward input.
    """
    acts, pre, single = cache
    dyb = np.asarray(dy, dtype=np.float64)
    if single:
        dyb = dyb[None, :]
    if dyb.shape != acts[-1].shape:
        raise InvalidShapeError(f"dLoss/dy shape {dyb.shape} != output shape {acts[-1].shape}")

    if net.output_activation == SIGMOID:
        y = acts[-1]
        dz = dyb * y * (1.0 - y)
    else:
        dz = dyb

    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        gw[i] = dz.T @ acts[i]
        gb[i] = dz.sum(axis=0)
        da = dz @ net.weights[i]
        if i > 0:
            dz = da * (pre[i - 1] > 0.0)
    dx = da[0] if single else da
    return MlpGrads(gw, gb, dx)


def sgd_step(net: MlpNet, grads: MlpGrads, lr: float) -> MlpNet:
    """One plain gradient-descent step; returns a new net."""
    if len(grads.weights) != len(net.weights):
        raise InvalidShapeError("gradient does not match network layout")
    return MlpNet(
        list(net.layer_dims),
        [w - lr * g for w, g in zip(net.weights, grads.weights)],
        [b - lr * g for b, g in zip(net.biases, grads.biases)],
        net.output_activation,
    )
