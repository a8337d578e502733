"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`SeisWarpError`. The three middle classes map onto the command-line
exit codes (usage, data, numeric).
"""


class SeisWarpError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SeisWarpError, ValueError):
    """Invalid configuration or argument combination."""

    exit_code = 1


class DataError(SeisWarpError, ValueError):
    """Input data that cannot be used as given."""

    exit_code = 2


class NumericError(SeisWarpError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""

    exit_code = 3


# signal-io
class UnreadableFileError(DataError):
    pass


class MalformedHeaderError(DataError):
    pass


class NonFiniteSampleError(DataError):
    pass


class EmptyWaveformError(DataError):
    pass


# shape / dimension problems anywhere in the pipeline
class ShapeError(DataError):
    pass


class ShapeUnderflowError(ConfigError):
    """Striding or pooling would shrink a spatial dimension below one."""


class DegenerateFilterbankError(NumericError):
    """A filter of the requested bank covers no FFT bin."""


class DegenerateModelError(NumericError):
    """Mixture densities underflowed for every component."""
