"""
errors.py | mfkit
--------------------------------------------------------------------
Exception hierarchy and failure diagnosis for the analysis pipeline.
Every stage raises one of these so the CLI can name the failing stage
and choose an exit code.
"""

from datetime import datetime, timezone


class MfkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2

    def __init__(self, message: str, stage: str = "mfkit"):
        super().__init__(message)
        self.stage = stage


class InputError(MfkitError):
    """Bad input data, arguments or violated preconditions."""

    exit_code = 1


class UsageError(InputError):
    """Malformed command line."""


class ComputationError(MfkitError):
    """Numerical failure inside a stage (non-finite chain, empty fit, ...)."""

    exit_code = 2


# ==========================================================
# === DIAGNOSIS ============================================
# ==========================================================
def diagnose(error: Exception, context: dict = None) -> dict:
    """
    Categorize a failure into a structured diagnosis dictionary.
    """
    if isinstance(error, MfkitError):
        stage = error.stage
        exit_code = error.exit_code
    else:
        stage = (context or {}).get("stage", "internal")
        exit_code = 2
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "stage": stage,
        "error_type": type(error).__name__,
        "message": str(error),
        "exit_code": exit_code,
        "context": context or {},
    }
