"""
Exception hierarchy for ndecon.

Every error derives from NdeconError and from the builtin it refines, so
callers that only catch ValueError or IndexError keep working. The
exit_code class attribute is what the command-line interface returns when
the error escapes a subcommand.
"""


class NdeconError(Exception):
    """Base class for all ndecon errors"""

    exit_code = 1


class ConfigError(NdeconError, ValueError):
    """Invalid solver, noise or PSF options"""

    exit_code = 2


class FormatError(NdeconError, ValueError):
    """Malformed file contents or non-finite external data"""

    exit_code = 3


class LengthMismatchError(FormatError):
    """The payload length disagrees with the header dimensions"""


class TruncatedDataError(LengthMismatchError):
    """The payload ends before the header says it should"""


class ShapeError(NdeconError, ValueError):
    """Shape, extent or dimension-count mismatch"""

    exit_code = 4


class BoundsError(NdeconError, IndexError):
    """Multi-index outside the tensor extents"""

    exit_code = 4


class DegenerateOperatorError(NdeconError, ValueError):
    """The convolution operator cannot be used (e.g. an all-zero kernel)"""

    exit_code = 5


class UndefinedMetricError(NdeconError, ValueError):
    """A metric is undefined for the given inputs"""

    exit_code = 5
