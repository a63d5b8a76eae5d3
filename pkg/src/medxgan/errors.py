"""Exception types shared across the package, with CLI exit codes."""


class MedxganError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(MedxganError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class MissingArtifactError(MedxganError):
    """A referenced file, checkpoint, or dataset does not exist."""

    exit_code = 3


class HashMismatchError(MedxganError):
    """An artifact's content hash does not match its producing manifest."""

    exit_code = 4


class TrainingDivergenceError(MedxganError):
    """Training halted by the divergence detector."""

    exit_code = 5

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EvaluationError(MedxganError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""


class InversionError(MedxganError):
    """Latent recovery failed (non-finite loss)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
