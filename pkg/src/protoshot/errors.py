"""Exception hierarchy shared across the engine."""


class ProtoshotError(Exception):
    """Base class for all engine errors."""


class DimensionMismatch(ProtoshotError):
    pass


class NonFiniteInput(ProtoshotError):
    pass


class EmptyClass(ProtoshotError):
    pass


class EmptyQuerySet(ProtoshotError):
    pass


class InvalidArchitecture(ProtoshotError):
    pass


class ShapeMismatch(ProtoshotError):
    pass


class InsufficientClasses(ProtoshotError):
    pass


class InsufficientSamples(ProtoshotError):
    pass


class MalformedPGM(ProtoshotError):
    pass


class EmptyDataset(ProtoshotError):
    pass


class ZeroTargetSize(ProtoshotError):
    pass


class ClassTooSmall(ProtoshotError):
    pass


class BadMagic(ProtoshotError):
    pass


class UnsupportedVersion(ProtoshotError):
    pass


class TruncatedFile(ProtoshotError):
    pass


class ClassIndexOutOfRange(ProtoshotError):
    pass


class EmptyMatrix(ProtoshotError):
    pass


class ConfigParseError(ProtoshotError):
    pass


class DatasetError(ProtoshotError):
    pass


class IoError(ProtoshotError):
    pass
