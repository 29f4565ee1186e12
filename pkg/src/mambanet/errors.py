"""Exception hierarchy shared by every module."""


class MambaError(Exception):
    """Base class for all package errors."""


class DimensionError(MambaError, ValueError):
    """Operand shapes do not agree."""


class DegenerateInputError(MambaError, ValueError):
    """Input is structurally valid but too small to process (empty sequence, short window)."""


class ContractError(MambaError, ValueError):
    """A caller violated a documented precondition."""


class NonFiniteError(MambaError, FloatingPointError):
    """NaN or Inf reached a tensor, loss, or gradient."""


class ParseError(MambaError, ValueError):
    """Malformed input file. ``row`` is the 1-based data row when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
