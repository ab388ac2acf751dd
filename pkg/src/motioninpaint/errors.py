"""Exceptions shared by the solvers and the command line."""


class DataError(ValueError):
    """Unreadable or inconsistent input data."""


class NumericalError(RuntimeError):
    """A descent produced non-finite values or diverged."""


class FlowDivergenceError(NumericalError):
    """The flow energy kept increasing; the step size is too large."""
