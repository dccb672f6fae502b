"""Exception hierarchy shared by all pipeline stages.

Exit-code mapping (see cli.py): validation/configuration problems exit 2,
stale upstream stage outputs exit 3, model-client failures exit 4.
"""

from __future__ import annotations


class ForgeError(Exception):
    exit_code = 1


class ValidationError(ForgeError):
    exit_code = 2


class ConfigurationError(ValidationError):
    """Bad or missing configuration: unknown language, absent grammar, env."""


class UndefinedInputError(ValidationError):
    """Operation called on input for which its result is not defined."""


class LinkError(ValidationError):
    """A cross-record reference does not resolve within the run's stores."""


class ScoringError(ValidationError):
    """Influence scoring could not proceed (missing trace kind, grids)."""


class StaleInputError(ForgeError):
    exit_code = 3

    def __init__(self, message: str, rerun_stage: str | None = None):
        super().__init__(message)
        self.rerun_stage = rerun_stage


class ClientError(ForgeError):
    exit_code = 4


class TransientClientError(ClientError):
    """Transport-level failure worth retrying."""


class PermanentClientError(ClientError):
    """Non-retryable client failure (e.g. HTTP 4xx)."""


class RetriesExhaustedError(ClientError):
    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class CompositionParseError(ForgeError):
    """Completion contained no parseable {"task": ...} object."""


class AnalyzerFailureError(ForgeError):
    """External analyzer exited abnormally without usable JSON output."""


class StageError(ForgeError):
    """A pipeline stage failed; carries enough context to point at the cause."""

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage
