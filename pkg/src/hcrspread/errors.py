"""Exception hierarchy.

Each top-level category maps to a CLI exit code: configuration problems exit
with 1, bad data with 2, numeric failures with 3.
"""


class HcrError(Exception):
    exit_code = 3


class ConfigError(HcrError):
    exit_code = 1


class InvalidSpecError(ConfigError, ValueError):
    pass


class DataError(HcrError, ValueError):
    exit_code = 2


class InvalidDataError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DimensionError(DataError):
    pass


class InvalidQuoteError(DataError):
    pass


class IngestError(DataError):
    pass


class NumericError(HcrError, ArithmeticError):
    exit_code = 3


class UnsupportedOrderError(NumericError, ValueError):
    pass


class SingularFitError(NumericError):
    pass


class UnderdeterminedError(NumericError):
    pass


class InvalidDensityError(NumericError, ValueError):
    pass
