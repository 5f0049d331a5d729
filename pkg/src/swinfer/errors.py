"""Exception hierarchy shared across the package."""


class SwinferError(Exception):
    """Base class for all errors raised by this package."""


class InvalidShapeError(SwinferError):
    """Tensor/layer shapes do not chain or an operand has the wrong extents."""


class NumericError(SwinferError):
    """Non-finite values where finite ones are required."""


class InvalidArgumentError(SwinferError):
    """A call-level precondition was violated."""


class FormatError(SwinferError):
    """A binary or JSON artifact does not match its documented format."""


class InvalidModelError(SwinferError):
    """A model description is internally inconsistent (broken shape chain)."""


class FileTruncatedError(SwinferError):
    """A binary artifact ended before its declared contents."""


class BudgetInfeasibleError(SwinferError):
    """The FLOPs budget cannot be met even at the minimum action."""


class ProtocolError(SwinferError):
    """Wire-level violation: bad magic, unknown message type, malformed payload."""


class UnsupportedVersionError(ProtocolError):
    """Frame version is not understood by this implementation."""


class FramingError(ProtocolError):
    """Frame header and payload disagree about lengths."""


class HandshakeError(SwinferError):
    """Edge/cloud session setup was refused (hash or split mismatch)."""


class TransportError(SwinferError):
    """The underlying connection failed mid-session."""
