"""Exception types raised by the numerical routines.

Invalid arguments (wrong dimensions, negative counts, ...) raise the builtin
``ValueError``; everything here signals a numerical failure.
"""


class FWBQError(Exception):
    """Base class for numerical failures."""


class ConvergenceError(FWBQError):
    """A quadrature oracle did not reach its tolerance within budget."""

    def __init__(self, message, error_estimate):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


class IllConditionedGramError(FWBQError):
    """Gram matrix could not be factorised even at maximum jitter."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class DegenerateStepError(FWBQError):
    """Line-search denominator vanished: the new atom equals the current state."""


class NumericalInconsistencyError(FWBQError):
    """A quantity that must be nonnegative came out clearly negative."""


class IllPosedError(FWBQError):
    """Regression design is rank deficient."""


class DegeneratePosteriorError(FWBQError):
    """Propagation rejected almost every draw; the posteriors are dominated by noise."""
