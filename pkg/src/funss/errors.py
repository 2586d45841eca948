"""Exception hierarchy.

Data-shaped problems derive from :class:`DataError`, numerical breakdowns
from :class:`NumericalError`; the CLI maps the two families onto distinct
exit codes.
"""


class FunssError(Exception):
    pass


class DataError(FunssError, ValueError):
    pass


class NumericalError(FunssError, ArithmeticError):
    pass


class DimensionError(DataError):
    pass


class ParameterError(DataError):
    pass


class NotCenteredError(DataError):
    pass


class FormatError(DataError):
    pass


class ConsistencyError(DataError):
    pass


class InvalidDrawError(DataError):
    pass


class DegenerateDistributionError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class PilotFailureError(RankDeficiencyError):
    pass


class EigengapError(NumericalError):
    pass
