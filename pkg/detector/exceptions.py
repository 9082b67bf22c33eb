"""
Errors raised by the detector library

Every error carries the exit code the management commands turn it into:
1 usage error, 2 data error, 3 runtime error.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class DetectorError(Exception):
    """Base class of all detector errors"""

    exit_code = EXIT_RUNTIME


class UsageError(DetectorError):
    exit_code = EXIT_USAGE


class DataError(DetectorError):
    """Input audio, manifest or split content is not usable"""

    exit_code = EXIT_DATA


class ModelError(DetectorError):
    """Model construction, computation or serialization failed"""

    exit_code = EXIT_RUNTIME


# ------------ audio and manifests ------------
class MalformedWav(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class EmptyAfterTrim(DataError):
    pass


class InputTooShort(DataError):
    pass


class NoBonafideDir(DataError):
    pass


class MissingClass(DataError):
    pass


class EmptySplit(DataError):
    pass


class SingleClass(DataError):
    pass


class InvalidManifest(DataError):
    """Unreadable manifest file or record breaking a manifest invariant"""


# ------------ network and weight files ------------
class ShapeMismatch(ModelError):
    pass


class DegenerateBatch(ModelError):
    pass


class OutputEmpty(ModelError):
    pass


class NoForwardRecorded(ModelError):
    pass


class CorruptContainer(ModelError):
    pass


class CountMismatch(ModelError):
    pass


class VersionUnsupported(ModelError):
    pass


# ------------ orchestration ------------
class UnknownProtocol(UsageError):
    pass


class LeakedAttack(ModelError):
    """An excluded attack tag reached the model"""
