"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI: usage errors exit 2 (argparse default),
DataError exits 3, NumericError exits 4.
"""


class DataError(ValueError):
    """Rejected input data (bad WAV format, non-finite samples, empty manifest)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation requested exactly at a pole or removable singularity."""


class ShapeError(ValueError):
    """Array shapes inconsistent with the operation's contract."""


class ConfigError(ValueError):
    """Invalid model or transform configuration."""


class StateError(RuntimeError):
    """Operation called on an object in the wrong state."""


class NumericError(ArithmeticError):
    """Numeric consistency violated (non-finite values, impossible negatives)."""
