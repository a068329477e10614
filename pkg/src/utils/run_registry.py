import json
import logging
import os
import sqlite3
from datetime import datetime

RUN_COLUMNS = ("id", "name", "kind", "path", "status", "created", "finished", "summary")


class RunRegistry:
    """SQLite index of the runs, presets and sweeps under the output root."""

    def __init__(self, db_path="runs/runs.db"):
        self.logger = logging.getLogger("RunRegistry")

        directory = os.path.dirname(db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        self.db_path = db_path
        self.init_database()

    def init_database(self):
        """Create the runs table if it doesn't exist."""
        try:
            conn = self.get_connection()
            conn.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    name TEXT NOT NULL,
                    kind TEXT NOT NULL,
                    path TEXT NOT NULL,
                    status TEXT NOT NULL DEFAULT 'running',
                    created DATETIME NOT NULL,
                    finished DATETIME,
                    summary TEXT
                )
            ''')
            conn.commit()
            conn.close()

            self.logger.info(f"Run registry initialized at {self.db_path}")

        except Exception as e:
            self.logger.error(f"Error initializing run registry: {e}")

    def get_connection(self):
        try:
            return sqlite3.connect(self.db_path)
        except Exception as e:
            self.logger.error(f"Error connecting to run registry: {e}")
            raise

    def register(self, name, kind, path, created=None):
        """Record a new run.

        Args:
            name: Experiment name
            kind: 'run', 'preset', 'sweep' or 'compare'
            path: Output directory of the run
            created: Optional timestamp (defaults to now)

        Returns:
            The run id, or None if the insert failed
        """
        try:
            created = (created or datetime.now()).isoformat()
            conn = self.get_connection()
            cursor = conn.execute(
                "INSERT INTO runs (name, kind, path, created) VALUES (?, ?, ?, ?)",
                (name, kind, str(path), created),
            )
            run_id = cursor.lastrowid
            conn.commit()
            conn.close()
            return run_id

        except Exception as e:
            self.logger.error(f"Error registering run {name}: {e}")
            return None

    def update_status(self, run_id, status, summary=None):
        """Mark a run finished/failed and attach a JSON summary.

        Returns:
            bool: True if a row was updated
        """
        try:
            conn = self.get_connection()
            cursor = conn.execute(
                "UPDATE runs SET status = ?, finished = ?, summary = ? WHERE id = ?",
                (
                    status,
                    datetime.now().isoformat(),
                    json.dumps(summary) if summary is not None else None,
                    run_id,
                ),
            )
            updated = cursor.rowcount > 0
            conn.commit()
            conn.close()
            return updated

        except Exception as e:
            self.logger.error(f"Error updating run {run_id}: {e}")
            return False

    def _row_to_dict(self, row):
        record = dict(zip(RUN_COLUMNS, row))
        if record["summary"]:
            record["summary"] = json.loads(record["summary"])
        return record

    def get_run(self, run_id):
        """Return the run record as a dict, or None if not found."""
        try:
            conn = self.get_connection()
            row = conn.execute(
                f"SELECT {', '.join(RUN_COLUMNS)} FROM runs WHERE id = ?", (run_id,)
            ).fetchone()
            conn.close()
            return self._row_to_dict(row) if row else None

        except Exception as e:
            self.logger.error(f"Error retrieving run {run_id}: {e}")
            return None

    def list_runs(self, limit=None, kind=None):
        """Runs newest first, optionally filtered by kind."""
        try:
            query = f"SELECT {', '.join(RUN_COLUMNS)} FROM runs"
            params = []
            if kind:
                query += " WHERE kind = ?"
                params.append(kind)
            query += " ORDER BY id DESC"
            if limit is not None:
                query += " LIMIT ?"
                params.append(limit)

            conn = self.get_connection()
            rows = conn.execute(query, tuple(params)).fetchall()
            conn.close()
            return [self._row_to_dict(row) for row in rows]

        except Exception as e:
            self.logger.error(f"Error listing runs: {e}")
            return []

    def delete_run(self, run_id):
        try:
            conn = self.get_connection()
            conn.execute("DELETE FROM runs WHERE id = ?", (run_id,))
            conn.commit()
            conn.close()
            return True

        except Exception as e:
            self.logger.error(f"Error deleting run {run_id}: {e}")
            return False
