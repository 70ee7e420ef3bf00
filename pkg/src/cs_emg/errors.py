"""Exception types raised across the pipeline."""


class CsEmgError(Exception):
    """Base class for all package errors."""


class SignalParseError(CsEmgError, ValueError):
    def __init__(self, path, line, text):
        self.path = path
        self.line = line
        super().__init__(f"{path}, line {line}: cannot parse {text!r} as a number")


class EmptySignalError(CsEmgError, ValueError):
    pass


class InvalidSignalError(CsEmgError, ValueError):
    pass


class TooShortError(CsEmgError, ValueError):
    pass


class DegenerateSignalError(CsEmgError, ValueError):
    pass


class IncompleteBundleError(CsEmgError, ValueError):
    pass


class InsufficientSubjectsError(CsEmgError, ValueError):
    pass


class UnusableSampleError(CsEmgError, ValueError):
    pass


class ShapeError(CsEmgError, ValueError):
    pass


class BatchTooSmallError(CsEmgError, ValueError):
    pass


class LabelError(CsEmgError, ValueError):
    pass


class NumericError(CsEmgError, FloatingPointError):
    pass


class MissingTraceError(CsEmgError, RuntimeError):
    pass


class UndefinedAUCError(CsEmgError, ValueError):
    pass


class ConfigError(CsEmgError, ValueError):
    pass


class ChecksumError(CsEmgError, IOError):
    pass


class VersionMismatchError(CsEmgError, ValueError):
    pass


class InputError(CsEmgError, ValueError):
    pass
