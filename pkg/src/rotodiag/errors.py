"""Exception types raised by the pipeline stages."""


class PipelineError(Exception):
    """Base class for all pipeline errors."""


# --- ingestion / codec ---

class MalformedRow(PipelineError):
    def __init__(self, row: int, reason: str = ""):
        self.row = row
        super().__init__(f"malformed row {row}" + (f": {reason}" if reason else ""))


class EmptyFile(PipelineError):
    pass


class UnsupportedRate(PipelineError):
    pass


class UnsupportedFormat(PipelineError):
    pass


# --- preprocessing ---

class SilentSignal(PipelineError):
    pass


class AllSilent(PipelineError):
    pass


class InvalidSize(PipelineError):
    pass


# --- framing / features ---

class ClipTooShort(PipelineError):
    pass


# --- dataset / splits ---

class ClassTooSmall(PipelineError):
    pass


class InvalidK(PipelineError):
    pass


# --- augmentation ---

class TooFewRows(PipelineError):
    pass


# --- training ---

class DegenerateInput(PipelineError):
    pass


# --- metrics ---

class LengthMismatch(PipelineError):
    pass


class BadClassId(PipelineError):
    pass


class EmptyMatrix(PipelineError):
    pass


# --- configuration ---

class ConfigError(PipelineError):
    pass


class StageError(PipelineError):
    """Wraps a failure with the pipeline stage and file it occurred in."""

    def __init__(self, stage: str, context: str, cause: Exception):
        self.stage = stage
        self.context = context
        self.cause = cause
        super().__init__(f"[{stage}] {context}: {cause}")
