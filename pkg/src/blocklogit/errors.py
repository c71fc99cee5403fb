"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures to stable process exit statuses without a lookup table.
"""


class BlockLogitError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class FormulaError(BlockLogitError):
    """Malformed model formula.

    Parameters
    ----------
    message : str
        Human readable description.
    token : str, optional
        The offending token.
    position : int, optional
        Character offset of the offending token in the formula text.
    """

    exit_code = 3

    def __init__(self, message, token=None, position=None):
        self.token = token
        self.position = position
        if token is not None or position is not None:
            message = f"{message} (token {token!r} at position {position})"
        super().__init__(message)


class DataError(BlockLogitError):
    """Invalid or inconsistent long-format data."""

    exit_code = 4

    def __init__(self, message, individual=None):
        self.individual = individual
        if individual is not None:
            message = f"individual {individual}: {message}"
        super().__init__(message)


class RankError(BlockLogitError):
    """The design cannot be reduced to one with a non-singular Hessian."""

    exit_code = 5


class StructuralSingularityError(RankError):
    """Generic variables plus intercept whose Hessian is singular by construction."""


class SingularHessianError(BlockLogitError):
    """The Newton system could not be solved."""

    exit_code = 5


class LineSearchError(BlockLogitError):
    """Step halving failed to find a non-decreasing log-likelihood."""

    exit_code = 7


class NotNestedError(BlockLogitError):
    """Models passed to a likelihood test are not nested or use different data."""

    exit_code = 8
