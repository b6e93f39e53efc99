"""Exception hierarchy; the CLI maps each class onto an exit code."""


class PseudoDPError(Exception):
    exit_code = 1


class ConfigError(PseudoDPError, ValueError):
    exit_code = 2


class DataError(PseudoDPError, ValueError):
    exit_code = 3


class NumericError(PseudoDPError, ArithmeticError):
    exit_code = 4
