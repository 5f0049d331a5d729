"""Bit-exact TCP wire protocol for split inference.

Frame layout: magic "SWIR", version (1), msg_type (1), reserved (2, zero),
payload_len (4, big-endian), payload. Header integers are network order;
bulk tensor data is little-endian float32 so common hosts can memcpy it.

The decoder is resumable: decode_frame returns None while bytes are
missing and never raises on truncation, so a socket read loop can feed
it arbitrary chunks. Malformed input raises ProtocolError subclasses,
never anything else.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FramingError, ProtocolError, UnsupportedVersionError

MAGIC = b"SWIR"
VERSION = 1
HEADER_LEN = 12
MAX_PAYLOAD = 1 << 30  # sanity bound against hostile length fields

MSG_HELLO = 0x01
MSG_HELLO_ACK = 0x02
MSG_FEATURE = 0x03
MSG_RESULT = 0x04
MSG_PING = 0x05
MSG_PONG = 0x06
MSG_ERROR = 0x07

ACK_OK = 0
ACK_HASH_MISMATCH = 1
ACK_BAD_SPLIT = 2

ERR_PROTOCOL = 1
ERR_VERSION = 2
ERR_SHAPE = 3
ERR_INTERNAL = 4

DTYPE_F32 = 0


@dataclass
class Hello:
    model_hash: bytes  # 32-byte sha-256 of the SWMF file
    split_point: int


@dataclass
class HelloAck:
    status: int


@dataclass
class Feature:
    request_id: int
    data: np.ndarray  # float32


@dataclass
class Result:
    request_id: int
    logits: np.ndarray  # float32
    server_compute_ns: int


@dataclass
class Ping:
    pass


@dataclass
class Pong:
    pass


@dataclass
class Error:
    code: int
    message: str


def _payload(msg) -> tuple[int, bytes]:
    if isinstance(msg, Hello):
        if len(msg.model_hash) != 32:
            raise ProtocolError(f"model hash must be 32 bytes, got {len(msg.model_hash)}")
        return MSG_HELLO, msg.model_hash + struct.pack(">H", msg.split_point)
    if isinstance(msg, HelloAck):
        return MSG_HELLO_ACK, struct.pack(">B", msg.status)
    if isinstance(msg, Feature):
        data = np.ascontiguousarray(msg.data, dtype="<f4")
        dims = data.shape
        return MSG_FEATURE, (
            struct.pack(">QBB", msg.request_id, DTYPE_F32, len(dims))
            + struct.pack(f">{len(dims)}I", *dims)
            + data.tobytes()
        )
    if isinstance(msg, Result):
        logits = np.ascontiguousarray(msg.logits, dtype="<f4")
        return MSG_RESULT, (
            struct.pack(">QI", msg.request_id, logits.size)
            + logits.tobytes()
            + struct.pack(">Q", msg.server_compute_ns)
        )
    if isinstance(msg, Ping):
        return MSG_PING, b""
    if isinstance(msg, Pong):
        return MSG_PONG, b""
    if isinstance(msg, Error):
        return MSG_ERROR, struct.pack(">H", msg.code) + msg.message.encode("utf-8")
    raise ProtocolError(f"cannot encode {type(msg).__name__}")


def encode_frame(msg) -> bytes:
    msg_type, payload = _payload(msg)
    return (
        MAGIC
        + struct.pack(">BBH", VERSION, msg_type, 0)
        + struct.pack(">I", len(payload))
        + payload
    )


def _parse_hello(p: bytes) -> Hello:
    if len(p) != 34:
        raise FramingError(f"HELLO payload must be 34 bytes, got {len(p)}")
    return Hello(p[:32], struct.unpack(">H", p[32:])[0])


def _parse_ack(p: bytes) -> HelloAck:
    if len(p) != 1:
        raise FramingError(f"HELLO_ACK payload must be 1 byte, got {len(p)}")
    return HelloAck(p[0])


def _parse_feature(p: bytes) -> Feature:
    if len(p) < 10:
        raise FramingError("FEATURE payload shorter than its fixed header")
    request_id, dtype, ndim = struct.unpack(">QBB", p[:10])
    if dtype != DTYPE_F32:
        raise ProtocolError(f"unsupported tensor dtype {dtype}")
    if len(p) < 10 + 4 * ndim:
        raise FramingError("FEATURE dims truncated")
    dims = struct.unpack(f">{ndim}I", p[10 : 10 + 4 * ndim])
    count = 1
    for d in dims:
        if d == 0:
            raise FramingError("FEATURE dims contain a zero extent")
        count *= d
    body = p[10 + 4 * ndim :]
    if len(body) != 4 * count:
        raise FramingError(f"FEATURE data is {len(body)} bytes, dims need {4 * count}")
    data = np.frombuffer(body, dtype="<f4").reshape(dims).copy()
    return Feature(request_id, data)


def _parse_result(p: bytes) -> Result:
    if len(p) < 12:
        raise FramingError("RESULT payload shorter than its fixed header")
    request_id, count = struct.unpack(">QI", p[:12])
    if len(p) != 12 + 4 * count + 8:
        raise FramingError(f"RESULT payload is {len(p)} bytes, expected {12 + 4 * count + 8}")
    logits = np.frombuffer(p[12 : 12 + 4 * count], dtype="<f4").copy()
    (server_ns,) = struct.unpack(">Q", p[12 + 4 * count :])
    return Result(request_id, logits, server_ns)


def _parse_empty(cls):
    def parse(p: bytes):
        if p:
            raise FramingError(f"{cls.__name__} carries no payload, got {len(p)} bytes")
        return cls()

    return parse


def _parse_error(p: bytes) -> Error:
    if len(p) < 2:
        raise FramingError("ERROR payload shorter than its code")
    (code,) = struct.unpack(">H", p[:2])
    try:
        message = p[2:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FramingError("ERROR message is not valid UTF-8") from exc
    return Error(code, message)


_PARSERS = {
    MSG_HELLO: _parse_hello,
    MSG_HELLO_ACK: _parse_ack,
    MSG_FEATURE: _parse_feature,
    MSG_RESULT: _parse_result,
    MSG_PING: _parse_empty(Ping),
    MSG_PONG: _parse_empty(Pong),
    MSG_ERROR: _parse_error,
}


def decode_frame(buf: bytes):
    """Decode one frame from the head of buf.

    Returns (message, bytes_consumed), or None when more bytes are
    needed. Raises ProtocolError/UnsupportedVersionError/FramingError on
    malformed input that no further bytes can repair.
    """
    if len(buf) >= 4:
        if buf[:4] != MAGIC:
            raise ProtocolError(f"bad magic {bytes(buf[:4])!r}")
    elif buf != MAGIC[: len(buf)]:
        raise ProtocolError(f"bad magic prefix {bytes(buf)!r}")
    if len(buf) < HEADER_LEN:
        return None
    version, msg_type, reserved = struct.unpack(">BBH", buf[4:8])
    if version != VERSION:
        raise UnsupportedVersionError(f"frame version {version} not supported")
    if reserved != 0:
        raise ProtocolError(f"reserved header bytes must be zero, got {reserved:#x}")
    if msg_type not in _PARSERS:
        raise ProtocolError(f"unknown message type {msg_type:#x}")
    (payload_len,) = struct.unpack(">I", buf[8:12])
    if payload_len > MAX_PAYLOAD:
        raise FramingError(f"payload length {payload_len} exceeds the {MAX_PAYLOAD} cap")
    if len(buf) < HEADER_LEN + payload_len:
        return None
    payload = bytes(buf[HEADER_LEN : HEADER_LEN + payload_len])
    return _PARSERS[msg_type](payload), HEADER_LEN + payload_len


class FrameDecoder:
    """Streaming wrapper: feed arbitrary chunks, collect whole messages."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, chunk: bytes):
        self._buf.extend(chunk)
        out = []
        while True:
            got = decode_frame(self._buf)
            if got is None:
                return out
            msg, used = got
            del self._buf[:used]
            out.append(msg)

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
