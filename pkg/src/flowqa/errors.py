"""Exception hierarchy shared across the toolkit.

Two broad families matter for the CLI exit-code mapping: ``InputError``
covers anything wrong with bytes we read from disk (exit code 2), while
``ComputeError`` covers invalid arguments and degenerate numerics
discovered after inputs were loaded (exit code 3).
"""


class FlowqaError(Exception):
    """Base class for all toolkit errors."""


class InputError(FlowqaError):
    """A file or stream could not be understood."""


class ParseError(InputError):
    """Malformed container or header syntax."""


class TruncationError(InputError):
    """A payload ended before the declared amount of data."""


class UnsupportedFormatError(InputError):
    """Well-formed input in a variant the toolkit does not handle."""


class ValidationError(InputError):
    """Structurally valid input whose contents are inconsistent."""


class ComputeError(FlowqaError):
    """Invalid arguments or degenerate data during computation."""


class ShapeError(ComputeError):
    """Operands with incompatible dimensions."""


class SizeError(ComputeError):
    """An input too small for the requested operation."""


class DegenerateInputError(ComputeError):
    """Data without enough variation for the statistic to be defined."""


class NormalizationError(ComputeError):
    """A weight map that does not sum to one."""


class ProviderError(ComputeError):
    """A flow provider could not produce flows for a frame pair."""
