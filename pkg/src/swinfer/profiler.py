"""Per-layer latency measurement and the additive latency model.

Total latency decomposes into device compute (layers 1..c), one
intermediate-feature transmission, and server compute (layers c+1..N).
Compute times are medians over repeated monotonic-clock measurements
(median, not mean: desk hardware jitters). Bandwidth converts with
megabit = 10^6 bits so the arithmetic in docs and tests is exact.
"""

import json
import platform
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import modelgraph as mg
from .engine import active_backend
from .errors import InvalidArgumentError


@dataclass
class LayerTiming:
    layer: int
    name: str
    kind: str
    compute_ms: float
    output_bytes: int


@dataclass
class LayerProfile:
    host: dict
    repeats: int
    input_bytes: int
    layers: list

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def compute_ms(self, index: int) -> float:
        return self.layers[index - 1].compute_ms

    def bytes_at_split(self, c: int) -> int:
        """Bytes crossing the wire when layers 1..c run on the device."""
        return self.input_bytes if c == 0 else self.layers[c - 1].output_bytes

    def to_dict(self) -> dict:
        return {
            "host": self.host,
            "repeats": self.repeats,
            "input_bytes": self.input_bytes,
            "layers": [asdict(l) for l in self.layers],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerProfile":
        return cls(
            doc["host"],
            doc["repeats"],
            doc["input_bytes"],
            [LayerTiming(**l) for l in doc["layers"]],
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path) -> "LayerProfile":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class LinkModel:
    bandwidth_mbps: float
    overhead_ms: float = 0.0

    def __post_init__(self):
        if self.bandwidth_mbps <= 0:
            raise InvalidArgumentError(f"bandwidth must be > 0, got {self.bandwidth_mbps}")

    def tx_ms(self, num_bytes: int) -> float:
        return num_bytes * 8.0 / (self.bandwidth_mbps * 1e6) * 1000.0 + self.overhead_ms


@dataclass
class LatencyBreakdown:
    split_point: int
    t_device_ms: float
    t_tx_ms: float
    t_server_ms: float
    total_ms: float = field(default=None)

    def __post_init__(self):
        # additivity holds by construction
        self.total_ms = self.t_device_ms + self.t_tx_ms + self.t_server_ms

    def as_dict(self) -> dict:
        return {
            "split_point": self.split_point,
            "t_device_ms": self.t_device_ms,
            "t_tx_ms": self.t_tx_ms,
            "t_server_ms": self.t_server_ms,
            "total_ms": self.total_ms,
        }


def host_descriptor() -> dict:
    return {
        "hostname": platform.node(),
        "machine": platform.machine(),
        "python": sys.version.split()[0],
        "kernel_backend": active_backend(),
    }


def profile_layers(graph: mg.ModelGraph, sample_input: np.ndarray, repeats: int = 10) -> LayerProfile:
    """Median per-layer compute time over `repeats` passes (1 warmup pass).

    The warmup also absorbs JIT compilation of the numba kernels, so the
    recorded medians reflect steady-state execution.
    """
    if repeats < 3:
        raise InvalidArgumentError(f"repeats must be >= 3, got {repeats}")
    if graph.input_shape is None:
        mg.resolve_shapes(graph, tuple(sample_input.shape))
    if tuple(sample_input.shape) != tuple(graph.input_shape):
        raise InvalidArgumentError(
            f"sample input {sample_input.shape} does not match model input {graph.input_shape}"
        )
    x = np.ascontiguousarray(sample_input, dtype=np.float32)
    n = graph.num_layers

    out = x
    for i in range(1, n + 1):  # warmup
        out = mg.layer_forward(graph, i, out)

    samples = [[] for _ in range(n)]
    for _ in range(repeats):
        out = x
        for i in range(1, n + 1):
            t0 = time.perf_counter_ns()
            out = mg.layer_forward(graph, i, out)
            t1 = time.perf_counter_ns()
            samples[i - 1].append((t1 - t0) / 1e6)

    layers = [
        LayerTiming(
            layer=l.index,
            name=l.name,
            kind=l.kind,
            compute_ms=float(statistics.median(samples[l.index - 1])),
            output_bytes=mg.output_bytes_of_layer(l),
        )
        for l in graph.layers
    ]
    return LayerProfile(host_descriptor(), repeats, mg.input_bytes(graph), layers)


def _check_profiles_match(device: LayerProfile, server: LayerProfile):
    if device.num_layers != server.num_layers:
        raise InvalidArgumentError(
            f"profiles cover different models: {device.num_layers} vs {server.num_layers} layers"
        )
    for d, s in zip(device.layers, server.layers):
        if (d.kind, d.output_bytes) != (s.kind, s.output_bytes):
            raise InvalidArgumentError(
                f"layer {d.layer}: profiles disagree ({d.kind}/{d.output_bytes} vs {s.kind}/{s.output_bytes})"
            )


def predict_latency(
    device: LayerProfile, server: LayerProfile, link: LinkModel, c: int
) -> LatencyBreakdown:
    """Additive model: device prefix + one feature transfer + server suffix."""
    _check_profiles_match(device, server)
    n = device.num_layers
    if not 0 <= c <= n:
        raise InvalidArgumentError(f"split point {c} outside [0, {n}]")
    t_device = sum(l.compute_ms for l in device.layers[:c])
    t_server = sum(l.compute_ms for l in server.layers[c:])
    t_tx = link.tx_ms(device.bytes_at_split(c))
    return LatencyBreakdown(c, t_device, t_tx, t_server)


def measure_end_to_end(session, sample_input: np.ndarray, c: int, runs: int) -> list:
    """Measured breakdowns over a live edge session armed at split c.

    Device time comes from local timestamps, server time from the
    in-band server-reported duration, and transmission is the round-trip
    remainder (both directions; cross-host clocks are never compared).
    """
    if runs < 1:
        raise InvalidArgumentError(f"runs must be >= 1, got {runs}")
    if session.split_point != c:
        raise InvalidArgumentError(
            f"session is armed at split {session.split_point}, requested {c}"
        )
    from .errors import TransportError

    results = []
    for run in range(runs):
        try:
            _, breakdown = session.infer(sample_input)
        except TransportError as exc:
            raise TransportError(f"run {run + 1}/{runs}: {exc}") from exc
        results.append(breakdown)
    return results
