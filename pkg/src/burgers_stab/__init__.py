"""Finite element feedback stabilization of a 2D viscous Burgers equation.

The package discretizes the shifted Burgers system around a steady state with
P1 elements on a uniform triangulation of the unit square, solves the
mass-weighted algebraic Riccati equation for the feedback operator, and
integrates the open and closed loops in time.
"""

from .errors import (ArgumentError, BurgersStabError, ConfigurationError,
                     ConvergenceError, EvaluationError, ExprSyntaxError,
                     NumericalError, StabilizabilityError)

__version__ = "0.1.0"

__all__ = ["ArgumentError", "BurgersStabError", "ConfigurationError",
           "ConvergenceError", "EvaluationError", "ExprSyntaxError",
           "NumericalError", "StabilizabilityError", "__version__"]
