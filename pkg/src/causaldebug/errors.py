"""Exception hierarchy.

Data problems (bad CSV, out-of-domain cells, unknown targets) derive from
:class:`DataError` so the command line can map them to a single exit code.
"""


class CausalDebugError(Exception):
    """Base class for every error raised by this package."""


class DataError(CausalDebugError, ValueError):
    pass


class SchemaError(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"missing column: {column!r}")
        self.column = column


class UnknownColumn(DataError):
    def __init__(self, column):
        super().__init__(f"unknown column: {column!r}")
        self.column = column


class ValueOutOfDomain(DataError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: value {value!r} outside domain")
        self.row = row
        self.column = column
        self.value = value


class EmptyTable(DataError):
    pass


class TargetNotInSchema(DataError):
    pass


class DivisionByZeroFault(DataError, ZeroDivisionError):
    pass


class TooFewVariables(DataError):
    pass


class NoIntervenableOption(CausalDebugError):
    pass


class NoFaultObserved(CausalDebugError):
    pass


class EvaluatorFailure(CausalDebugError):
    def __init__(self, message, attempt=0):
        super().__init__(message)
        self.attempt = attempt


class IncompleteAssignment(DataError):
    pass


class EmptyRequest(DataError):
    pass


class UnreachableNfp(CausalDebugError):
    pass


class TooLarge(CausalDebugError):
    pass
