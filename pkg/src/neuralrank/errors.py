"""Exception types raised by the neuralrank toolkit.

Every failure surfaces as one of these; callers never receive a partially
populated value alongside an error.
"""


class NeuralRankError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(NeuralRankError):
    """An input value violates a documented invariant (names the field)."""


class FormatError(NeuralRankError):
    """A byte stream is not a well-formed NRNK container or manifest."""


class TruncationError(FormatError):
    """Declared payload size does not match the bytes actually present."""

    def __init__(self, message: str, expected_bytes: int | None = None,
                 actual_bytes: int | None = None):
        super().__init__(message)
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes


class ResolutionError(NeuralRankError):
    """A manifest reference (model, layer, or file path) cannot be resolved."""


class DegenerateVectorError(NeuralRankError):
    """A zero-norm vector was used where cosine distance is required."""


class EmptyReportError(NeuralRankError):
    """No model in the zoo could be scored."""
