"""Exception types shared across the package.

Everything derived from ``KeysltError`` is an input/validation problem and maps
to CLI exit code 2.  ``InvariantViolation`` maps to exit code 3.
"""


class KeysltError(ValueError):
    pass


class MalformedFile(KeysltError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class LayoutMismatch(KeysltError):
    pass


class EmptyCorpus(KeysltError):
    pass


class MalformedManifest(KeysltError):
    def __init__(self, path, row, column, message):
        self.path = str(path)
        self.row = row
        self.column = column
        super().__init__(f"{self.path}: row {row}, column {column}: {message}")


class ConfigInvalid(KeysltError):
    pass


class UnknownScheme(KeysltError):
    pass


class InvalidProbability(KeysltError):
    pass


class InvalidLp(KeysltError):
    pass


class LengthMismatch(KeysltError):
    pass


class TooShort(KeysltError):
    pass


class InvalidN(KeysltError):
    pass


class ZeroVariance(KeysltError):
    pass


class ShapeMismatch(KeysltError):
    pass


class SequenceTooLong(KeysltError):
    pass


class EmptyBatch(KeysltError):
    pass


class EmptySequence(KeysltError):
    pass


class InvariantViolation(RuntimeError):
    pass
