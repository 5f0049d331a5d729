"""Model description, FLOPs/output-size accounting, and the binary formats.

A model is a sequential chain of layers (conv2d, maxpool, relu, linear,
flatten, softmax). Weights live in the SWMF binary format; validation
sets in SWDS. Both formats are little-endian and bit-stable; the wire
and the file hash depend on them byte for byte.

FLOPs convention: one multiply-accumulate counts as 2 FLOPs, bias adds
are excluded, and activation/pool/flatten/softmax layers count 0.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import ops
from .errors import (
    FileTruncatedError,
    FormatError,
    InvalidArgumentError,
    InvalidModelError,
    InvalidShapeError,
)

CONV = "conv2d"
MAXPOOL = "maxpool"
RELU = "relu"
LINEAR = "linear"
FLATTEN = "flatten"
SOFTMAX = "softmax"

KIND_CODES = {CONV: 0, MAXPOOL: 1, RELU: 2, LINEAR: 3, FLATTEN: 4, SOFTMAX: 5}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

SWMF_MAGIC = b"SWMF"
SWDS_MAGIC = b"SWDS"
SWMF_VERSION = 1
SWDS_VERSION = 1

# Largest square input size considered when solving the input resolution
# from the flatten->linear constraint of a weight file.
_MAX_SOLVE_HW = 1024


@dataclass
class LayerSpec:
    """One layer of a sequential chain; shapes are filled in by resolve()."""

    index: int  # 1-based position in the chain
    name: str
    kind: str
    n: int = 0  # output channels / features (conv, linear)
    c: int = 0  # input channels / features (conv, linear)
    kh: int = 0
    kw: int = 0
    stride: int = 1
    pad: int = 0
    input_shape: tuple = None
    output_shape: tuple = None

    @property
    def has_weights(self) -> bool:
        return self.kind in (CONV, LINEAR)


@dataclass
class ModelGraph:
    """Ordered layer chain plus weights for the parametric layers."""

    layers: list
    weights: dict = field(default_factory=dict)  # layer index -> (W, b) float32
    input_shape: tuple = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def prunable_indices(self) -> list:
        return [l.index for l in self.layers if l.kind == CONV]

    @property
    def has_weights(self) -> bool:
        return all(l.index in self.weights for l in self.layers if l.has_weights)

    def layer(self, index: int) -> LayerSpec:
        if not 1 <= index <= self.num_layers:
            raise InvalidArgumentError(f"layer index {index} out of range 1..{self.num_layers}")
        return self.layers[index - 1]

    def copy(self) -> "ModelGraph":
        return ModelGraph(
            [replace(l) for l in self.layers],
            {i: (w.copy(), b.copy()) for i, (w, b) in self.weights.items()},
            self.input_shape,
        )


def _out_hw(h, w, kh, kw, stride, pad):
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    return oh, ow


def resolve_shapes(graph: ModelGraph, input_shape=None) -> ModelGraph:
    """Chain shapes through the layers, validating consistency in place."""
    if input_shape is not None:
        graph.input_shape = tuple(input_shape)
    if graph.input_shape is None:
        raise InvalidModelError("model input shape unknown; cannot resolve layer shapes")
    shape = tuple(graph.input_shape)
    for l in graph.layers:
        l.input_shape = shape
        if l.kind == CONV:
            if len(shape) != 3:
                raise InvalidModelError(f"{l.name}: conv needs a (c,h,w) input, got {shape}")
            c, h, w = shape
            if c != l.c:
                raise InvalidModelError(f"{l.name}: expects {l.c} input channels, chain has {c}")
            oh, ow = _out_hw(h, w, l.kh, l.kw, l.stride, l.pad)
            if oh < 1 or ow < 1:
                raise InvalidModelError(f"{l.name}: kernel does not fit input {h}x{w}")
            shape = (l.n, oh, ow)
        elif l.kind == MAXPOOL:
            if len(shape) != 3:
                raise InvalidModelError(f"{l.name}: pool needs a (c,h,w) input, got {shape}")
            c, h, w = shape
            if l.kh > h or l.kw > w:
                raise InvalidModelError(f"{l.name}: window {l.kh}x{l.kw} exceeds input {h}x{w}")
            oh, ow = _out_hw(h, w, l.kh, l.kw, l.stride, 0)
            shape = (c, oh, ow)
        elif l.kind == FLATTEN:
            shape = (int(np.prod(shape)),)
        elif l.kind == LINEAR:
            if len(shape) != 1:
                raise InvalidModelError(f"{l.name}: linear needs a flat input, got {shape}")
            if shape[0] != l.c:
                raise InvalidModelError(f"{l.name}: expects {l.c} inputs, chain has {shape[0]}")
            shape = (l.n,)
        elif l.kind in (RELU, SOFTMAX):
            if l.kind == SOFTMAX and len(shape) != 1:
                raise InvalidModelError(f"{l.name}: softmax needs a flat input, got {shape}")
        else:
            raise InvalidModelError(f"{l.name}: unknown layer kind {l.kind!r}")
        l.output_shape = shape
    _validate_weights(graph)
    return graph


def _validate_weights(graph: ModelGraph):
    for l in graph.layers:
        if not l.has_weights or l.index not in graph.weights:
            continue
        w, b = graph.weights[l.index]
        want = (l.n, l.c, l.kh, l.kw) if l.kind == CONV else (l.n, l.c)
        if tuple(w.shape) != want or b.shape != (l.n,):
            raise InvalidModelError(
                f"{l.name}: weight shapes {w.shape}/{b.shape} do not match spec {want}"
            )


def build_graph(layer_defs, input_shape=None, weights=None) -> ModelGraph:
    """Assemble a graph from (name, kind, params) dicts; indices assigned 1..N."""
    layers = []
    for i, d in enumerate(layer_defs, start=1):
        layers.append(LayerSpec(index=i, **d))
    graph = ModelGraph(layers, weights or {}, tuple(input_shape) if input_shape else None)
    if graph.input_shape is not None:
        resolve_shapes(graph)
    return graph


# --- accounting ------------------------------------------------------------


def flops_of_layer(layer: LayerSpec) -> int:
    """MACs x 2 for parametric layers, 0 by convention for the rest."""
    if layer.kind == CONV:
        if layer.output_shape is None:
            raise InvalidModelError(f"{layer.name}: shapes not resolved")
        _, oh, ow = layer.output_shape
        return 2 * layer.n * layer.c * layer.kh * layer.kw * oh * ow
    if layer.kind == LINEAR:
        return 2 * layer.n * layer.c
    return 0


def output_bytes_of_layer(layer: LayerSpec) -> int:
    if layer.output_shape is None:
        raise InvalidModelError(f"{layer.name}: shapes not resolved")
    return int(np.prod(layer.output_shape)) * 4


def input_bytes(graph: ModelGraph) -> int:
    if graph.input_shape is None:
        raise InvalidModelError("model input shape unknown")
    return int(np.prod(graph.input_shape)) * 4


def total_flops(graph: ModelGraph) -> int:
    return sum(flops_of_layer(l) for l in graph.layers)


# --- forward execution ------------------------------------------------------


def layer_forward(graph: ModelGraph, index: int, x: np.ndarray) -> np.ndarray:
    l = graph.layer(index)
    if l.kind == CONV:
        w, b = graph.weights[l.index]
        return ops.conv2d_forward(x, w, b, l.stride, l.pad)
    if l.kind == MAXPOOL:
        return ops.maxpool2d_forward(x, l.kh, l.kw, l.stride)
    if l.kind == LINEAR:
        w, b = graph.weights[l.index]
        return ops.linear_forward(x, w, b)
    if l.kind == RELU:
        return ops.relu(x)
    if l.kind == FLATTEN:
        return ops.flatten(x)
    return ops.softmax(x)


def forward(graph: ModelGraph, x: np.ndarray, start: int = 1, stop: int = None) -> np.ndarray:
    """Run layers start..stop (inclusive, 1-based); defaults to the whole chain."""
    if not graph.has_weights:
        raise InvalidArgumentError("graph has no weights; shape-only descriptors cannot run")
    stop = graph.num_layers if stop is None else stop
    out = ops.as_f32(x)
    for i in range(start, stop + 1):
        out = layer_forward(graph, i, out)
    return out


# --- SWMF weight format ------------------------------------------------------


def dumps_model(graph: ModelGraph) -> bytes:
    if not graph.has_weights:
        raise InvalidArgumentError("cannot serialize a shape-only graph to SWMF")
    out = bytearray()
    out += SWMF_MAGIC
    out += struct.pack("<HH", SWMF_VERSION, graph.num_layers)
    for l in graph.layers:
        name = l.name.encode("utf-8")
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<B", KIND_CODES[l.kind])
        if l.kind == CONV:
            out += struct.pack("<6I", l.n, l.c, l.kh, l.kw, l.stride, l.pad)
        elif l.kind == MAXPOOL:
            out += struct.pack("<3I", l.kh, l.kw, l.stride)
        elif l.kind == LINEAR:
            out += struct.pack("<2I", l.n, l.c)
        if l.has_weights:
            w, b = graph.weights[l.index]
            out += np.ascontiguousarray(w, dtype="<f4").tobytes()
            out += np.ascontiguousarray(b, dtype="<f4").tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FileTruncatedError(
                f"file ends at byte {len(self.data)}, needed {self.pos + n}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f32(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()


def loads_model(data: bytes, input_hw=None) -> ModelGraph:
    r = _Reader(data)
    if r.take(4) != SWMF_MAGIC:
        raise FormatError("not an SWMF file (bad magic)")
    version, layer_count = r.unpack("<HH")
    if version != SWMF_VERSION:
        raise FormatError(f"unsupported SWMF version {version}")
    layers, weights = [], {}
    for i in range(1, layer_count + 1):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (code,) = r.unpack("<B")
        if code not in CODE_KINDS:
            raise FormatError(f"layer {i}: unknown kind code {code}")
        kind = CODE_KINDS[code]
        spec = LayerSpec(index=i, name=name, kind=kind)
        if kind == CONV:
            spec.n, spec.c, spec.kh, spec.kw, spec.stride, spec.pad = r.unpack("<6I")
            w = r.f32(spec.n * spec.c * spec.kh * spec.kw).reshape(spec.n, spec.c, spec.kh, spec.kw)
            weights[i] = (w, r.f32(spec.n))
        elif kind == MAXPOOL:
            spec.kh, spec.kw, spec.stride = r.unpack("<3I")
        elif kind == LINEAR:
            spec.n, spec.c = r.unpack("<2I")
            weights[i] = (r.f32(spec.n * spec.c).reshape(spec.n, spec.c), r.f32(spec.n))
        layers.append(spec)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after last layer")
    graph = ModelGraph(layers, weights)
    _resolve_loaded(graph, input_hw)
    return graph


def _resolve_loaded(graph: ModelGraph, input_hw=None):
    """SWMF carries no input resolution; recover it from the layer chain.

    Vector-first models are fully determined. Spatial models are solved
    against the flatten->linear feature-count constraint assuming square
    inputs (smallest consistent size wins); pass input_hw to override.
    Chains without a flatten layer have no such constraint: for those the
    channel chain is validated and spatial shapes stay unresolved.
    """
    if not graph.layers:
        raise InvalidModelError("model has no layers")
    first = graph.layers[0]
    if first.kind == LINEAR:
        resolve_shapes(graph, (first.c,))
        return
    if first.kind != CONV:
        raise InvalidModelError(f"cannot infer input shape behind a {first.kind} first layer")
    if input_hw is not None:
        h, w = input_hw
        resolve_shapes(graph, (first.c, h, w))
        return
    if not any(l.kind == FLATTEN for l in graph.layers):
        _validate_channel_chain(graph)
        _validate_weights(graph)
        return
    for s in range(1, _MAX_SOLVE_HW + 1):
        try:
            resolve_shapes(graph, (first.c, s, s))
            return
        except InvalidModelError:
            continue
    raise InvalidModelError("no square input size up to 1024 satisfies the layer chain")


def _validate_channel_chain(graph: ModelGraph):
    channels = graph.layers[0].c
    for l in graph.layers:
        if l.kind == CONV:
            if l.c != channels:
                raise InvalidModelError(
                    f"{l.name}: expects {l.c} input channels, chain has {channels}"
                )
            channels = l.n
        elif l.kind in (LINEAR, FLATTEN, SOFTMAX):
            raise InvalidModelError(
                f"{l.name}: {l.kind} after an unresolved spatial chain needs input_hw"
            )


def save_model(graph: ModelGraph, path):
    data = dumps_model(graph)
    with open(path, "wb") as f:
        f.write(data)


def load_model(path, input_hw=None) -> ModelGraph:
    with open(path, "rb") as f:
        return loads_model(f.read(), input_hw=input_hw)


def model_hash(data_or_graph) -> bytes:
    """SHA-256 of the SWMF bytes; the identity edge and cloud agree on."""
    if isinstance(data_or_graph, ModelGraph):
        data = dumps_model(data_or_graph)
    else:
        data = data_or_graph
    return hashlib.sha256(data).digest()


# --- SWDS validation-set format ----------------------------------------------


@dataclass
class ValidationSet:
    inputs: np.ndarray  # (samples, c, h, w) float32
    labels: np.ndarray  # (samples,) int
    class_count: int

    @property
    def sample_count(self) -> int:
        return len(self.labels)


def dumps_valset(valset: ValidationSet) -> bytes:
    s, c, h, w = valset.inputs.shape
    if valset.labels.shape != (s,):
        raise InvalidShapeError("labels do not match sample count")
    if valset.labels.min(initial=0) < 0 or (s and valset.labels.max() >= valset.class_count):
        raise InvalidArgumentError("labels must lie in [0, class_count)")
    out = bytearray()
    out += SWDS_MAGIC
    out += struct.pack("<HIHHHH", SWDS_VERSION, s, c, h, w, valset.class_count)
    for i in range(s):
        out += struct.pack("<H", int(valset.labels[i]))
        out += np.ascontiguousarray(valset.inputs[i], dtype="<f4").tobytes()
    return bytes(out)


def loads_valset(data: bytes) -> ValidationSet:
    r = _Reader(data)
    if r.take(4) != SWDS_MAGIC:
        raise FormatError("not an SWDS file (bad magic)")
    version, s, c, h, w, class_count = r.unpack("<HIHHHH")
    if version != SWDS_VERSION:
        raise FormatError(f"unsupported SWDS version {version}")
    inputs = np.empty((s, c, h, w), dtype=np.float32)
    labels = np.empty(s, dtype=np.int64)
    for i in range(s):
        (labels[i],) = r.unpack("<H")
        inputs[i] = r.f32(c * h * w).reshape(c, h, w)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after last sample")
    if s and labels.max() >= class_count:
        raise FormatError("label exceeds declared class count")
    return ValidationSet(inputs, labels, class_count)


def save_valset(valset: ValidationSet, path):
    with open(path, "wb") as f:
        f.write(dumps_valset(valset))


def load_valset(path) -> ValidationSet:
    with open(path, "rb") as f:
        return loads_valset(f.read())


# --- raw input tensors and JSON descriptors -----------------------------------


def load_input_bin(path, shape) -> np.ndarray:
    """Raw little-endian float32 tensor, shape implied by the model."""
    want = int(np.prod(shape))
    raw = open(path, "rb").read()
    if len(raw) != want * 4:
        raise FormatError(f"{path}: expected {want * 4} bytes for shape {tuple(shape)}, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def save_input_bin(x: np.ndarray, path):
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def reference_model() -> ModelGraph:
    """The bundled AlexNet-style 20-layer chain (shape-only, 38 classes)."""
    from importlib import resources

    with resources.files("swinfer.data").joinpath("alexnet_chain.json").open() as f:
        return load_model_json(json.load(f))


def load_model_json(path_or_dict) -> ModelGraph:
    """Shape-only graph from a JSON descriptor (no weights; planning only)."""
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as f:
            doc = json.load(f)
    try:
        inp = doc["input"]
        shape = (inp["c"], inp["h"], inp["w"]) if "h" in inp else (inp["c"],)
        defs = []
        feats = shape
        for d in doc["layers"]:
            kind = d["kind"]
            entry = {"name": d["name"], "kind": kind}
            if kind == CONV:
                entry.update(n=d["n"], c=feats[0], kh=d["kh"], kw=d["kw"],
                             stride=d.get("stride", 1), pad=d.get("pad", 0))
                h, w = _out_hw(feats[1], feats[2], d["kh"], d["kw"], entry["stride"], entry["pad"])
                feats = (d["n"], h, w)
            elif kind == MAXPOOL:
                entry.update(kh=d["kh"], kw=d["kw"], stride=d.get("stride", 1))
                h, w = _out_hw(feats[1], feats[2], d["kh"], d["kw"], entry["stride"], 0)
                feats = (feats[0], h, w)
            elif kind == FLATTEN:
                feats = (int(np.prod(feats)),)
            elif kind == LINEAR:
                entry.update(n=d["n"], c=feats[0])
                feats = (d["n"],)
            defs.append(entry)
    except KeyError as exc:
        raise FormatError(f"model descriptor missing field {exc}") from exc
    return build_graph(defs, input_shape=shape)
