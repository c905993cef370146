"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`LatentStabError`.
:class:`InputError` covers bad or inconsistent inputs (CLI exit code 2),
:class:`NumericalError` covers failures of a computation on valid-looking
inputs (CLI exit code 3).
"""


class LatentStabError(Exception):
    exit_code = 1


class InputError(LatentStabError, ValueError):
    exit_code = 2


class NumericalError(LatentStabError, ArithmeticError):
    exit_code = 3


# dataspace
class ConstantColumnError(InputError):
    pass


class NonFiniteError(InputError):
    pass


class NotPositiveDefiniteError(InputError):
    pass


class ParseError(InputError):
    pass


class RaggedRowsError(ParseError):
    pass


class UnknownLabelColumnError(InputError):
    pass


# autoenc
class DivergedError(NumericalError):
    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed


class NonFiniteActivationError(NumericalError):
    pass


class DegenerateAxisError(NumericalError):
    pass


# assigncluster
class TooFewSamplesError(InputError):
    pass


class InfeasibleError(NumericalError):
    pass


class LengthMismatchError(InputError):
    pass


# hullmetrics
class TooFewPointsError(InputError):
    pass


class EmptySetError(InputError):
    pass


# stressmetrics
class ZeroDenominatorError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# anisotropy
class DegenerateError(NumericalError):
    pass


class NoConvergenceError(NumericalError):
    pass


class SingularCovarianceError(NumericalError):
    pass


class NoRegionsError(NumericalError):
    pass


class EmptyListError(InputError):
    pass


class ZeroBaselineError(NumericalError):
    pass


# report
class IndexOutOfRangeError(InputError):
    pass


class NegativeValueError(InputError):
    pass


class IoError(InputError):
    """An output location could not be written."""


class RealizationError(LatentStabError):
    """Wraps a module error raised while processing one realization."""

    def __init__(self, index, error):
        super().__init__(f"realization {index}: {error}")
        self.index = index
        self.error = error
        self.exit_code = getattr(error, "exit_code", 1)
