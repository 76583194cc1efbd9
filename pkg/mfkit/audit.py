"""
audit.py | mfkit
--------------------------------------------------------------------
Tagged console messages plus an optional JSON-lines audit trail.
Each record is {timestamp, event, message, data}, one per line.
"""

import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

_AUDIT_PATH = None
_QUIET = False


def open_audit_log(path: str):
    """Route structured events to `path` (appending)."""
    global _AUDIT_PATH
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    _AUDIT_PATH = path


def close_audit_log():
    global _AUDIT_PATH
    _AUDIT_PATH = None


def set_quiet(quiet: bool):
    """Suppress console echo (events are still written to the audit log)."""
    global _QUIET
    _QUIET = bool(quiet)


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def log_event(event: str, message: str, data: dict = None):
    """Print a tagged line and append the event to the audit log if one is open."""
    if not _QUIET:
        print(f"[{event}] {message}", file=sys.stderr)
    if _AUDIT_PATH is None:
        return
    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "event": event,
        "message": message,
        "data": _plain(data or {}),
    }
    with open(_AUDIT_PATH, "a") as f:
        f.write(json.dumps(entry) + "\n")


def warn(stage: str, message: str, data: dict = None):
    payload = {"stage": stage}
    payload.update(data or {})
    log_event("WARN", f"{stage}: {message}", payload)
