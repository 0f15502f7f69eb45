"""Exception hierarchy shared by every module of the package."""


class EdgeHealthError(Exception):
    """Base class for all package errors."""


class BadParameter(EdgeHealthError, ValueError):
    pass


class MissingColumn(EdgeHealthError):
    def __init__(self, column):
        super().__init__(f"missing required column: {column}")
        self.column = column


class BadValue(EdgeHealthError, ValueError):
    def __init__(self, row, column, detail=""):
        msg = f"bad value at row {row}, column {column!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.row = row
        self.column = column


class EmptyDataset(EdgeHealthError):
    pass


class EmptyInput(EdgeHealthError, ValueError):
    pass


class SchemaMismatch(EdgeHealthError):
    pass


class DegenerateLeaf(EdgeHealthError, ZeroDivisionError):
    pass


class SingleClass(EdgeHealthError):
    pass


class TooManyFeatures(EdgeHealthError):
    pass


class AlignmentMismatch(EdgeHealthError):
    pass


class BadFeatureIndex(EdgeHealthError, IndexError):
    pass


class LengthMismatch(EdgeHealthError, ValueError):
    pass


class ModelFormatError(EdgeHealthError):
    """Raised when a serialized model fails validation."""
