"""Exception hierarchy.

Each family maps to one CLI exit code: configuration problems exit 1, data
problems exit 2, numerical failures exit 3.
"""


class NmiArmaxError(Exception):
    exit_code = 1


class ConfigError(NmiArmaxError, ValueError):
    exit_code = 1


class DataError(NmiArmaxError, ValueError):
    exit_code = 2


class DegenerateEntropyError(DataError):
    """A symbol sequence has zero entropy, so a normalized score is undefined."""


class NumericalError(NmiArmaxError, ArithmeticError):
    exit_code = 3


class RankDeficientError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message, last_stable=None):
        super().__init__(message)
        self.last_stable = last_stable
