"""Exception types. Each maps to one CLI exit code."""


class HorizonCascadeError(Exception):
    exit_code = 1


class ConfigError(HorizonCascadeError, ValueError):
    exit_code = 2


class DataError(HorizonCascadeError, ValueError):
    exit_code = 3


class EmptyResultError(DataError):
    """An operation left a patient with no rows; callers usually skip the patient."""


class DegenerateClassError(DataError):
    """A training or evaluation set holds only one class."""

    exit_code = 4
