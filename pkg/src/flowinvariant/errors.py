"""Exception types raised across the package."""

from __future__ import annotations


class FlowInvariantError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfig(FlowInvariantError, ValueError):
    """A configuration value is out of its allowed domain.

    The offending field is kept on ``field`` so the CLI can name it.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class LateralMotion(FlowInvariantError, ValueError):
    pass


class BehindCamera(FlowInvariantError, ValueError):
    pass


class DimensionMismatch(FlowInvariantError, ValueError):
    pass


class FrameTooSmall(FlowInvariantError, ValueError):
    pass


class InsufficientFlow(FlowInvariantError, ValueError):
    pass


class Degenerate(FlowInvariantError, ValueError):
    pass


class BadMagic(FlowInvariantError, ValueError):
    pass


class TruncatedFile(FlowInvariantError, ValueError):
    pass


class UnsupportedFormat(FlowInvariantError, ValueError):
    pass


class IoFailure(FlowInvariantError, OSError):
    pass
