"""
ledger.py | mfkit
--------------------------------------------------------------------
Optional SQLite history of CLI runs: command, config digest, status
and a short summary per run. Lives outside result directories.
"""

import json
import os
import sqlite3
from datetime import datetime, timezone

from .errors import InputError

STAGE = "ledger"


# ==========================================================
# === Initialization =======================================
# ==========================================================
def init_ledger(path: str):
    """Create the runs table if missing."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    try:
        conn = sqlite3.connect(path)
    except sqlite3.Error as e:
        raise InputError(f"cannot open ledger {path}: {e}", stage=STAGE)
    c = conn.cursor()
    c.execute(
        """
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            timestamp TEXT,
            command TEXT,
            config_digest TEXT,
            output TEXT,
            status TEXT,
            summary TEXT
        )
        """
    )
    conn.commit()
    conn.close()


# ==========================================================
# === Runs =================================================
# ==========================================================
def save_run(path: str, command: str, config_digest: str, status: str,
             summary: dict = None, output: str = ""):
    init_ledger(path)
    conn = sqlite3.connect(path)
    c = conn.cursor()
    timestamp = datetime.now(timezone.utc).isoformat()
    c.execute(
        "INSERT INTO runs (timestamp, command, config_digest, output, status, summary) "
        "VALUES (?, ?, ?, ?, ?, ?)",
        (timestamp, command, config_digest, output, status, json.dumps(summary or {}, default=str)),
    )
    conn.commit()
    conn.close()
    print(f"[LEDGER] {command} run recorded ({status})")


def get_recent_runs(path: str, limit: int = 10) -> list:
    """Most recent runs first."""
    if not os.path.exists(path):
        return []
    conn = sqlite3.connect(path)
    c = conn.cursor()
    try:
        c.execute(
            "SELECT id, timestamp, command, config_digest, output, status, summary "
            "FROM runs ORDER BY id DESC LIMIT ?",
            (int(limit),),
        )
        rows = c.fetchall()
    except sqlite3.Error as e:
        raise InputError(f"cannot read ledger {path}: {e}", stage=STAGE)
    finally:
        conn.close()
    return [
        {
            "id": row[0],
            "timestamp": row[1],
            "command": row[2],
            "config_digest": row[3],
            "output": row[4],
            "status": row[5],
            "summary": json.loads(row[6] or "{}"),
        }
        for row in rows
    ]
