"""Cloud daemon and edge client for split inference over TCP.

Sessions are persistent: one handshake (model hash + split point), then
any number of feature/result exchanges, one in flight per connection.
The daemon serves the split pinned by its active plan and always admits
the c = 0 server-only baseline, so benchmark comparisons do not need a
re-arm between modes. Changing the active plan affects new handshakes;
established sessions keep the split they negotiated.

Timing rules: the edge times its own layers, the server reports its
compute duration in-band, and the round-trip remainder is attributed to
transmission (both directions; the hosts' clocks are never compared).
"""

import socket
import threading
import time
from collections import deque

import numpy as np

from . import modelgraph as mg
from . import wire
from .engine import ops
from .errors import (
    HandshakeError,
    ProtocolError,
    SwinferError,
    TransportError,
    UnsupportedVersionError,
)
from .profiler import LatencyBreakdown

RECV_CHUNK = 1 << 16


class EventBus:
    """Bounded ring of live events with ids, for event-stream tailing."""

    def __init__(self, capacity: int = 256):
        self._events = deque(maxlen=capacity)
        self._cond = threading.Condition()
        self._next_id = 0

    def publish(self, event: dict):
        with self._cond:
            self._events.append((self._next_id, event))
            self._next_id += 1
            self._cond.notify_all()

    def wait_since(self, last_id: int, timeout: float = None):
        """Events with id > last_id, blocking up to timeout for the first."""
        with self._cond:
            fresh = [e for e in self._events if e[0] > last_id]
            if fresh or timeout == 0:
                return fresh
            self._cond.wait(timeout)
            return [e for e in self._events if e[0] > last_id]


class _Channel:
    """One socket plus a streaming decoder."""

    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock
        self.decoder = wire.FrameDecoder()
        self.pending = []

    def send(self, msg):
        try:
            self.sock.sendall(wire.encode_frame(msg))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def next_message(self):
        """Next decoded message, or None on orderly EOF."""
        while not self.pending:
            try:
                chunk = self.sock.recv(RECV_CHUNK)
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from exc
            if not chunk:
                if self.decoder.pending_bytes:
                    raise TransportError("connection closed mid-frame")
                return None
            self.pending.extend(self.decoder.feed(chunk))
        return self.pending.pop(0)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class CloudServer:
    """Serves the back half (layers c+1..N) of a model to edge clients."""

    def __init__(self, graph: mg.ModelGraph, split_point: int,
                 listen=("127.0.0.1", 0), profiling_lock: bool = True,
                 event_bus: EventBus = None):
        if not graph.has_weights:
            raise SwinferError("cloud daemon needs a model with weights")
        if not 0 <= split_point <= graph.num_layers:
            raise SwinferError(f"split {split_point} outside [0, {graph.num_layers}]")
        self.graph = graph
        self.model_hash = mg.model_hash(graph)
        self._split = split_point
        self._state_lock = threading.Lock()
        # profiling mode serializes inference across connections so
        # reported compute times are not polluted by co-runners
        self._infer_lock = threading.Lock() if profiling_lock else None
        self.events = event_bus or EventBus()
        self._listen_addr = listen
        self._listener = None
        self._threads = []
        self._channels = set()
        self._running = False

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        self._listener = socket.create_server(self._listen_addr)
        self._listener.settimeout(0.1)  # lets the accept loop notice stop()
        self._running = True
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)
        return self

    def stop(self):
        self._running = False
        if self._listener:
            try:
                self._listener.close()
            except OSError:
                pass
        for ch in list(self._channels):
            ch.close()
        for t in self._threads:
            t.join(timeout=2.0)

    @property
    def address(self):
        return self._listener.getsockname()

    # -- plan activation -----------------------------------------------------

    @property
    def split_point(self) -> int:
        with self._state_lock:
            return self._split

    def activate_split(self, new_split: int):
        """Atomic re-arm; new handshakes see the new split immediately."""
        if not 0 <= new_split <= self.graph.num_layers:
            raise SwinferError(f"split {new_split} outside [0, {self.graph.num_layers}]")
        with self._state_lock:
            self._split = new_split

    # -- connection handling ---------------------------------------------------

    def _accept_loop(self):
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.settimeout(None)
            t = threading.Thread(target=self._serve_connection, args=(sock,), daemon=True)
            t.start()
            self._threads.append(t)

    def _acceptable_splits(self):
        return {self.split_point, 0}

    def _serve_connection(self, sock: socket.socket):
        ch = _Channel(sock)
        self._channels.add(ch)
        try:
            self._handle(ch)
        except (TransportError, OSError):
            pass
        except ProtocolError as exc:
            self._bail(ch, wire.ERR_PROTOCOL, str(exc))
        except Exception as exc:  # never take the daemon down
            self._bail(ch, wire.ERR_INTERNAL, f"{type(exc).__name__}: {exc}")
        finally:
            self._channels.discard(ch)
            ch.close()

    def _bail(self, ch: _Channel, code: int, message: str):
        try:
            ch.send(wire.Error(code, message))
        except TransportError:
            pass

    def _handle(self, ch: _Channel):
        try:
            first = ch.next_message()
        except ProtocolError as exc:
            code = wire.ERR_VERSION if isinstance(exc, UnsupportedVersionError) else wire.ERR_PROTOCOL
            self._bail(ch, code, str(exc))
            return
        if first is None:
            return
        if not isinstance(first, wire.Hello):
            self._bail(ch, wire.ERR_PROTOCOL, "expected HELLO")
            return
        if first.model_hash != self.model_hash:
            ch.send(wire.HelloAck(wire.ACK_HASH_MISMATCH))
            return
        if first.split_point not in self._acceptable_splits():
            ch.send(wire.HelloAck(wire.ACK_BAD_SPLIT))
            return
        split = first.split_point
        ch.send(wire.HelloAck(wire.ACK_OK))
        expected = (
            tuple(self.graph.input_shape)
            if split == 0
            else tuple(self.graph.layer(split).output_shape)
        )
        while True:
            try:
                msg = ch.next_message()
            except ProtocolError as exc:
                code = wire.ERR_VERSION if isinstance(exc, UnsupportedVersionError) else wire.ERR_PROTOCOL
                self._bail(ch, code, str(exc))
                return
            if msg is None:
                return
            if isinstance(msg, wire.Ping):
                ch.send(wire.Pong())
                continue
            if not isinstance(msg, wire.Feature):
                self._bail(ch, wire.ERR_PROTOCOL, f"unexpected {type(msg).__name__} mid-session")
                return
            if tuple(msg.data.shape) != expected:
                self._bail(
                    ch, wire.ERR_SHAPE,
                    f"feature shape {tuple(msg.data.shape)} != expected {expected} for split {split}",
                )
                return
            logits, elapsed_ns = self._run_back_half(split, msg.data)
            ch.send(wire.Result(msg.request_id, logits, elapsed_ns))
            self.events.publish(
                {
                    "kind": "served",
                    "split_point": split,
                    "server_compute_ms": elapsed_ns / 1e6,
                    "feature_bytes": int(msg.data.size * 4),
                }
            )

    def _run_back_half(self, split: int, feature: np.ndarray):
        lock = self._infer_lock
        if lock:
            lock.acquire()
        try:
            t0 = time.perf_counter_ns()
            out = ops.as_f32(feature)
            if split < self.graph.num_layers:
                out = mg.forward(self.graph, out, split + 1, self.graph.num_layers)
            elapsed = time.perf_counter_ns() - t0
        finally:
            if lock:
                lock.release()
        return out.reshape(-1), elapsed


class EdgeSession:
    """Persistent connection running layers 1..c locally, c+1..N remotely."""

    def __init__(self, connect_addr, graph: mg.ModelGraph, split_point: int,
                 timeout: float = 30.0):
        if not 0 <= split_point <= graph.num_layers:
            raise SwinferError(f"split {split_point} outside [0, {graph.num_layers}]")
        self.graph = graph
        self.split_point = split_point
        try:
            sock = socket.create_connection(connect_addr, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {connect_addr}: {exc}") from exc
        sock.settimeout(timeout)
        self._ch = _Channel(sock)
        self._request_id = 0
        self._handshake()

    def _handshake(self):
        self._ch.send(wire.Hello(mg.model_hash(self.graph), self.split_point))
        msg = self._ch.next_message()
        if msg is None:
            raise TransportError("server closed during handshake")
        if isinstance(msg, wire.Error):
            raise HandshakeError(f"server error {msg.code}: {msg.message}")
        if not isinstance(msg, wire.HelloAck):
            raise ProtocolError(f"expected HELLO_ACK, got {type(msg).__name__}")
        if msg.status == wire.ACK_HASH_MISMATCH:
            raise HandshakeError("model hash mismatch: edge and cloud run different weights")
        if msg.status == wire.ACK_BAD_SPLIT:
            raise HandshakeError(
                f"split {self.split_point} rejected; re-fetch the active plan and re-handshake"
            )
        if msg.status != wire.ACK_OK:
            raise HandshakeError(f"handshake refused with status {msg.status}")

    def infer(self, x: np.ndarray):
        """One co-inference pass; returns (logits, LatencyBreakdown)."""
        c = self.split_point
        t0 = time.perf_counter_ns()
        feature = mg.forward(self.graph, x, 1, c) if c >= 1 else ops.as_f32(x)
        t_sent = time.perf_counter_ns()
        self._request_id += 1
        self._ch.send(wire.Feature(self._request_id, feature))
        msg = self._ch.next_message()
        t_recv = time.perf_counter_ns()
        if msg is None:
            raise TransportError("server closed mid-request")
        if isinstance(msg, wire.Error):
            raise ProtocolError(f"server error {msg.code}: {msg.message}")
        if not isinstance(msg, wire.Result):
            raise ProtocolError(f"expected RESULT, got {type(msg).__name__}")
        if msg.request_id != self._request_id:
            raise ProtocolError(
                f"request id mismatch: sent {self._request_id}, got {msg.request_id}"
            )
        t_device = (t_sent - t0) / 1e6
        t_server = msg.server_compute_ns / 1e6
        t_tx = max(0.0, (t_recv - t_sent) / 1e6 - t_server)
        return msg.logits, LatencyBreakdown(c, t_device, t_tx, t_server)

    def ping(self):
        self._ch.send(wire.Ping())
        msg = self._ch.next_message()
        if not isinstance(msg, wire.Pong):
            raise ProtocolError(f"expected PONG, got {type(msg).__name__}")

    def close(self):
        self._ch.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run_device_inference(graph: mg.ModelGraph, x: np.ndarray):
    """Device-only path: all layers local, no network at all."""
    t0 = time.perf_counter_ns()
    logits = mg.forward(graph, x)
    t1 = time.perf_counter_ns()
    return logits, LatencyBreakdown(graph.num_layers, (t1 - t0) / 1e6, 0.0, 0.0)


def run_edge_inference(connect_addr, graph: mg.ModelGraph, plan, x: np.ndarray,
                       mode: str = "co"):
    """One inference in the requested placement mode.

    mode "co" splits at plan.split_point, "server" forces c = 0 (raw
    input crosses the wire), "device" forces c = N and never connects.
    """
    if mode == "device":
        return run_device_inference(graph, x)
    if mode == "server":
        split = 0
    elif mode == "co":
        split = plan.split_point
    else:
        raise SwinferError(f"unknown inference mode {mode!r}")
    with EdgeSession(connect_addr, graph, split) as session:
        return session.infer(x)
