"""Standalone writers/readers for the SWMF weight and SWDS dataset formats.

This is a deliberately independent implementation of the documented
byte layouts (little-endian, float32 payloads); the inference toolkit
must be able to load anything written here, and that round trip is the
central format-compatibility check in CI.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

KIND_CONV = 0
KIND_POOL = 1
KIND_RELU = 2
KIND_LINEAR = 3
KIND_FLATTEN = 4
KIND_SOFTMAX = 5


@dataclass
class Layer:
    name: str
    kind: int
    params: tuple = ()  # conv: (n,c,kh,kw,stride,pad); pool: (kh,kw,stride); linear: (n,c)
    weight: np.ndarray = None
    bias: np.ndarray = None


@dataclass
class Model:
    layers: list = field(default_factory=list)

    def conv(self, name, w, b, stride=1, pad=1):
        n, c, kh, kw = w.shape
        self.layers.append(Layer(name, KIND_CONV, (n, c, kh, kw, stride, pad), w, b))
        return self

    def pool(self, name, kh=2, kw=2, stride=2):
        self.layers.append(Layer(name, KIND_POOL, (kh, kw, stride)))
        return self

    def relu(self, name):
        self.layers.append(Layer(name, KIND_RELU))
        return self

    def flatten(self, name="flatten"):
        self.layers.append(Layer(name, KIND_FLATTEN))
        return self

    def linear(self, name, w, b):
        n, c = w.shape
        self.layers.append(Layer(name, KIND_LINEAR, (n, c), w, b))
        return self

    def softmax(self, name="softmax"):
        self.layers.append(Layer(name, KIND_SOFTMAX))
        return self


def write_swmf(model: Model, path):
    out = bytearray(b"SWMF")
    out += struct.pack("<HH", 1, len(model.layers))
    for layer in model.layers:
        name = layer.name.encode("utf-8")
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<B", layer.kind)
        if layer.params:
            out += struct.pack(f"<{len(layer.params)}I", *layer.params)
        if layer.kind in (KIND_CONV, KIND_LINEAR):
            out += np.ascontiguousarray(layer.weight, dtype="<f4").tobytes()
            out += np.ascontiguousarray(layer.bias, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def read_swmf(path) -> Model:
    data = open(path, "rb").read()
    if data[:4] != b"SWMF":
        raise ValueError("not an SWMF file")
    version, count = struct.unpack_from("<HH", data, 4)
    if version != 1:
        raise ValueError(f"unsupported SWMF version {version}")
    pos = 8
    model = Model()
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + nlen].decode("utf-8")
        pos += nlen
        kind = data[pos]
        pos += 1
        nparams = {KIND_CONV: 6, KIND_POOL: 3, KIND_LINEAR: 2}.get(kind, 0)
        params = struct.unpack_from(f"<{nparams}I", data, pos) if nparams else ()
        pos += 4 * nparams
        weight = bias = None
        if kind == KIND_CONV:
            n, c, kh, kw, _, _ = params
            weight = np.frombuffer(data, "<f4", n * c * kh * kw, pos).reshape(n, c, kh, kw).copy()
            pos += 4 * n * c * kh * kw
            bias = np.frombuffer(data, "<f4", n, pos).copy()
            pos += 4 * n
        elif kind == KIND_LINEAR:
            n, c = params
            weight = np.frombuffer(data, "<f4", n * c, pos).reshape(n, c).copy()
            pos += 4 * n * c
            bias = np.frombuffer(data, "<f4", n, pos).copy()
            pos += 4 * n
        model.layers.append(Layer(name, kind, params, weight, bias))
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes")
    return model


def write_swds(inputs: np.ndarray, labels, class_count: int, path):
    s, c, h, w = inputs.shape
    out = bytearray(b"SWDS")
    out += struct.pack("<HIHHHH", 1, s, c, h, w, class_count)
    for i in range(s):
        out += struct.pack("<H", int(labels[i]))
        out += np.ascontiguousarray(inputs[i], dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def write_input_bin(x: np.ndarray, path):
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(x, dtype="<f4").tobytes())
