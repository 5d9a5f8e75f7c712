"""Exception hierarchy shared by all lbound modules.

The CLI maps these onto stable exit codes: input/parse problems exit 2,
performance-database misses exit 3, storage failures exit 4.
"""

from __future__ import annotations


class LboundError(Exception):
    """Base class for all lbound errors."""


class ModelParseError(LboundError):
    """A model file could not be decoded.

    For binary models ``offset`` is the byte offset at which decoding
    failed; for text models it is the 1-based line number.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class GraphStructureError(LboundError):
    """The graph violates a structural invariant (cycle, dangling edge)."""


class ShapeInferenceError(LboundError):
    """Shapes conflict at a node; message names the node and both shapes."""


class ShapeStateError(LboundError):
    """An operation that requires inferred shapes ran before inference."""


class ConfigError(LboundError):
    """Invalid benchmark or analysis configuration."""


class StorageError(LboundError):
    """The performance database could not be read or written."""


class GenerationError(LboundError):
    """A benchmark source could not be emitted for a spec."""


class ProfileFormatError(LboundError):
    """An execution profile or log file violates its grammar."""


class CorrelationError(LboundError):
    """Profile entries could not be matched against the model graph."""


class DomainError(LboundError):
    """A numeric argument is outside its valid domain."""


class MissError(LboundError):
    """Requested performance-database keys are absent.

    ``keys`` holds one human-readable string per missing key.
    """

    def __init__(self, keys: list[str]):
        self.keys = list(keys)
        preview = "; ".join(self.keys[:4])
        more = f" (+{len(self.keys) - 4} more)" if len(self.keys) > 4 else ""
        super().__init__(f"{len(self.keys)} benchmark result(s) missing: {preview}{more}")
