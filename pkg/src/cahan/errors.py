"""Exception hierarchy shared by every layer of the package."""


class CahanError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CahanError, ValueError):
    """Operand shapes are incompatible."""


class DegenerateInputError(CahanError, ValueError):
    """Input is empty or otherwise has nothing to compute on."""


class ContractError(CahanError, ValueError):
    """A documented precondition was violated."""


class NonFiniteError(CahanError, FloatingPointError):
    """A NaN or infinity showed up where finite values are required."""

    def __init__(self, message, name=None):
        super().__init__(message)
        self.name = name
