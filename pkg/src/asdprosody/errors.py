"""Exception hierarchy shared by every stage of the pipeline."""


class ProsodyError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ProsodyError):
    """Malformed or unsupported file content."""


class EmptyInputError(ProsodyError):
    """Input carries no samples (or nothing survives trimming)."""


class DegenerateInputError(ProsodyError):
    """Input is numerically degenerate (zero variance, silent, ...)."""


class TooShortError(ProsodyError):
    """Signal shorter than one analysis frame."""


class InsufficientVoicingError(ProsodyError):
    """Not enough voiced frames for a source measure."""


class StateError(ProsodyError):
    """Operation applied to an object in the wrong state."""


class SchemaError(ProsodyError):
    """Tabular data does not match the expected schema."""


class ParseError(ProsodyError):
    """A cell could not be parsed; carries the row and column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(ProsodyError):
    """Invalid configuration; ``key`` and ``line`` locate the problem."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class RecordingError(ProsodyError):
    """Wraps a per-recording failure with the recording id."""

    def __init__(self, recording_id, cause):
        super().__init__(f"{recording_id}: {type(cause).__name__}: {cause}")
        self.recording_id = recording_id
        self.cause = cause
