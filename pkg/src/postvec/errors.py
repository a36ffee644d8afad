"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: usage/config errors exit 1,
data errors exit 2, numeric divergence exits 3.
"""


class PostvecError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PostvecError, ValueError):
    """Operands have incompatible dimensions."""


class NumericError(PostvecError, ArithmeticError):
    """A computation produced or received non-finite values."""


class ConfigError(PostvecError, ValueError):
    """Invalid configuration or mismatched model/data combination."""


class DataError(PostvecError, ValueError):
    """Malformed input data; carries a line number when available."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DivergenceError(PostvecError, RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch, batch_index, learning_rate):
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch_index} "
            f"(learning rate {learning_rate:g}); loss is non-finite"
        )
        self.epoch = epoch
        self.batch_index = batch_index
        self.learning_rate = learning_rate
