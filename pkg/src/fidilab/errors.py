"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, everything else
derived from FidilabError -> 2, failed numeric checks -> 3.
"""


class FidilabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FidilabError):
    """Invalid configuration value or malformed config file."""


class ShapeError(FidilabError):
    """Array shapes incompatible with the requested operation."""


class DataFormatError(FidilabError):
    """Malformed dataset or checkpoint file."""


class NumericError(FidilabError):
    """Non-finite value where a finite one is required."""


class SamplingError(FidilabError):
    """Batch sampling request that the dataset cannot satisfy."""


class EvalError(FidilabError):
    """Evaluation request that the inputs cannot satisfy."""
