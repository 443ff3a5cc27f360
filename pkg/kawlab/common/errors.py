"""
Exception hierarchy for kawlab.

The CLI maps these onto process exit codes (see kawlab.cli.commands).
"""

from typing import Optional


class KawlabError(Exception):
    """Base class for all kawlab errors."""


class SizeError(KawlabError, ValueError):
    """Dimension mismatch, non-power-of-two length or a size cap exceeded."""


class ArgumentError(KawlabError, ValueError):
    """A precondition or theorem hypothesis is violated."""


class ConvergenceError(KawlabError):
    """An iterative method stopped at its cap without meeting its tolerance."""

    def __init__(self, message: str, last_iterate=None, iterations: int = 0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class TrainingError(KawlabError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class ConfigError(KawlabError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class StageError(KawlabError):
    """An experiment stage failed; wraps the underlying error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class WitnessError(KawlabError):
    """A stored witness or check failed re-verification."""


class AcceptanceError(KawlabError):
    """An experiment's acceptance check failed."""

    def __init__(self, message: str, failed_checks=()):
        super().__init__(message)
        self.failed_checks = list(failed_checks)
