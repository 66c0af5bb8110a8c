"""Exception types raised across the package."""


class AgmmError(Exception):
    """Base class for all errors raised by :mod:`agmm`."""


class InvalidArgumentError(AgmmError, ValueError):
    pass


class InvalidStateError(AgmmError, RuntimeError):
    pass


class DegenerateVarianceError(AgmmError, ArithmeticError):
    pass


class SingularDesignError(AgmmError, ArithmeticError):
    """The weighted normal equations of an M-step cannot be solved."""


class InitFailureError(AgmmError, RuntimeError):
    pass


class IsolatedGridPointError(AgmmError, ArithmeticError):
    """A grid point receives zero total kernel weight from the data."""

    def __init__(self, j, message=None):
        self.j = j
        super().__init__(message or f"grid point {j} has zero kernel mass; "
                                    "increase h or use a gaussian kernel")


class NoSupportError(AgmmError, ArithmeticError):
    """A smoother prediction has no kernel support or cancels exactly."""


class OutOfRangeError(AgmmError, OverflowError):
    pass
