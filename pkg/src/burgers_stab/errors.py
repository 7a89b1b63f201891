"""Exception hierarchy shared by all modules."""


class BurgersStabError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(BurgersStabError, ValueError):
    """Invalid configuration value or out-of-range parameter."""


class ArgumentError(BurgersStabError, ValueError):
    """Incompatible arguments (sizes, levels, points outside the domain)."""


class ExprSyntaxError(BurgersStabError, ValueError):
    """Malformed expression text.

    ``offset`` is the byte offset of the offending character.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(BurgersStabError, ArithmeticError):
    """Expression evaluation produced a division by zero."""


class NumericalError(BurgersStabError, ArithmeticError):
    """A dense or sparse kernel failed (singular matrix, non-PD pivot, ...)."""


class StabilizabilityError(NumericalError):
    """The stable invariant subspace of the Hamiltonian is not a graph."""


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance.

    ``history`` holds the residual (or increment) norms of every iterate.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
