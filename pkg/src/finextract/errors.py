"""Exception types shared across the package."""


class FinextractError(Exception):
    """Base class for all package-specific errors."""


class SpecificationError(FinextractError):
    """A generation/config spec is malformed (bad weights, unknown facet, ...)."""


class DatasetValidationError(FinextractError):
    """A dataset record violates an invariant (span mismatch, duplicate id, ...)."""


class DatasetParseError(FinextractError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class AlignmentError(FinextractError):
    """A gold span does not align with token boundaries; names the span."""


class TagDecodeError(FinextractError):
    """An ill-formed BIOES tag sequence; carries the offending index."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class ConfigError(FinextractError):
    """Model / LoRA / optimizer configuration violates a constraint."""


class DegenerateInputError(FinextractError):
    """An operation received an input it is undefined for (empty mask/store)."""


class NumericFault(FinextractError):
    """Non-finite loss or gradient during training."""

    def __init__(self, message: str, step: int, tensor: str):
        super().__init__(message)
        self.step = step
        self.tensor = tensor


class TransportError(FinextractError):
    """A remote backend exhausted its retries; carries the last status."""

    def __init__(self, message: str, last_status: int | None = None):
        super().__init__(message)
        self.last_status = last_status


class CheckpointError(FinextractError):
    """A model checkpoint is missing or unreadable."""


class DuplicateRatingError(FinextractError):
    """A (sample, annotator, system) rating was already recorded."""
