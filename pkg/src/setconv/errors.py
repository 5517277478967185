"""Exception hierarchy shared by every module of the package."""


class SetConvError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SetConvError, ValueError):
    """Array shapes do not line up."""


class EmptyInputError(SetConvError, ValueError):
    """An operation received an empty set, matrix or file."""


class InvalidPermutationError(SetConvError, ValueError):
    pass


class InsufficientDataError(SetConvError, ValueError):
    """A class has too few samples for the requested operation."""


class ConfigError(SetConvError, ValueError):
    pass


class UndefinedMetricError(SetConvError, ValueError):
    pass


# data ingestion

class DataError(SetConvError):
    """Base for problems with an input data file."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class RaggedRowError(DataError, ValueError):
    def __init__(self, path, line, expected, got):
        self.path, self.line, self.expected, self.got = path, line, expected, got
        super().__init__(f"{path}:{line}: expected {expected} fields, got {got}")


class NonNumericError(DataError, ValueError):
    def __init__(self, path, line, column, value):
        self.path, self.line, self.column, self.value = path, line, column, value
        super().__init__(f"{path}:{line}: non-numeric value {value!r} in column {column!r}")


class UnknownColumnError(DataError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


# model files

class ModelFormatError(SetConvError):
    """Base for problems with a serialized model."""


class MalformedModelError(ModelFormatError, ValueError):
    pass


class ModelVersionError(ModelFormatError, ValueError):
    pass


class ModelShapeError(ModelFormatError, ValueError):
    pass
