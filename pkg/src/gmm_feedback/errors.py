"""Exception types shared across the package."""


class FeedbackError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(FeedbackError):
    """Invalid scenario, pilot, or dictionary configuration."""


class ArgumentError(FeedbackError, ValueError):
    """An operation was called with out-of-contract arguments."""


class DegenerateDataError(FeedbackError):
    """Input data cannot support the requested operation (all-zero set, collapsed component)."""


class ModelIntegrityError(FeedbackError):
    """A fitted model violates its own invariants (non-PSD covariance, bad weights)."""


class RankDeficiencyError(FeedbackError):
    """A codebook entry has too low a rank for directional extraction."""


class ValidationError(FeedbackError):
    """Experiment configuration failed validation; message names the offending fields."""
