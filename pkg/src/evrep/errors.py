"""Exception types shared across the package."""


class EvrepError(Exception):
    """Base class for all errors raised by this package."""


class OutOfBoundsError(EvrepError):
    """Event coordinates fall outside the sensor plane."""


class IllegalPolarityError(EvrepError):
    """Polarity value other than -1 or +1."""


class TimeBeforeOriginError(EvrepError):
    """Timestamp precedes the window phase anchor."""


class EventOutsideWindowError(EvrepError):
    """Event timestamp does not belong to the window being accumulated."""


class RangeViolationError(EvrepError):
    """Channel values outside the declared range (or not finite)."""


class ParseError(EvrepError):
    """Malformed text input; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BadMagicError(EvrepError):
    """Binary file does not start with the expected magic bytes."""


class TruncatedFileError(EvrepError):
    """Binary file ends before the declared payload is complete."""


class CountMismatchError(EvrepError):
    """Binary file holds a different number of records than its header declares."""


class DegenerateBoxError(EvrepError):
    """Bounding box has no area after clipping to the sensor plane."""


class UnknownReferenceError(EvrepError):
    """Verdict row refers to a frame or box that is not in the manifest."""
