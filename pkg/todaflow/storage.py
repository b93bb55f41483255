import json
import sqlite3
import time
from typing import Any, Dict, List, Optional

SCHEMA = """
CREATE TABLE IF NOT EXISTS events(
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    ts REAL NOT NULL,
    kind TEXT NOT NULL,
    detail TEXT
);
CREATE INDEX IF NOT EXISTS idx_events_kind ON events(kind, id);
"""


class RunLog:
    """Append-only event log of CLI runs, one sqlite file per output directory."""

    def __init__(self, path: str = "runlog.db"):
        self.path = path
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._bootstrap()

    def _bootstrap(self) -> None:
        self._conn.executescript(SCHEMA)
        self._conn.commit()

    def log(self, kind: str, detail: str) -> None:
        self._conn.execute(
            "INSERT INTO events(ts, kind, detail) VALUES (?, ?, ?)",
            (time.time(), kind, detail),
        )
        self._conn.commit()

    def log_json(self, kind: str, payload: Dict[str, Any]) -> None:
        self.log(kind, json.dumps(payload, ensure_ascii=False, sort_keys=True))

    def log_check(self, record: Dict[str, Any]) -> None:
        self.log_json("check", record)

    def log_error(self, exc: BaseException, command: Optional[str] = None) -> None:
        self.log_json("error", {"command": command, "type": type(exc).__name__, "message": str(exc)})

    def fetch(self, kind: str, limit: int = 1000) -> List[Dict[str, Any]]:
        cur = self._conn.execute(
            "SELECT ts, detail FROM events WHERE kind = ? ORDER BY id LIMIT ?",
            (kind, limit),
        )
        rows: List[Dict[str, Any]] = []
        for row in cur.fetchall():
            try:
                payload = json.loads(row["detail"]) if row["detail"] else {}
            except json.JSONDecodeError:
                payload = {"detail": row["detail"]}
            rows.append({"ts": float(row["ts"]), "payload": payload})
        return rows

    def close(self) -> None:
        try:
            self._conn.close()
        except Exception:
            pass

    def __enter__(self) -> "RunLog":
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()
