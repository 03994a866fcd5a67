"""
Run registry on SQLite
"""
import aiosqlite
from typing import Any, Dict, List, Optional
import config
from couette.database.base import RunStoreInterface


class RunStore(RunStoreInterface):
    """Run registry manager for SQLite"""

    def __init__(self, db_path: str = config.RUNS_DB):
        self.db_path = db_path

    async def init_db(self):
        """Initialize database with required tables"""
        async with aiosqlite.connect(self.db_path) as db:
            # Runs table
            await db.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    experiment TEXT,
                    config_json TEXT,
                    lab_version TEXT,
                    status TEXT DEFAULT 'running',
                    exit_code INTEGER,
                    wall_time REAL,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    finished_at TIMESTAMP
                )
            """)

            # Artifacts table - files written by a run
            await db.execute("""
                CREATE TABLE IF NOT EXISTS artifacts (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT,
                    name TEXT,
                    kind TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    FOREIGN KEY (run_id) REFERENCES runs(run_id)
                )
            """)

            await db.commit()

    async def create_run(self, run_id: str, experiment: str, config_json: str, lab_version: str) -> bool:
        """Register a new run"""
        async with aiosqlite.connect(self.db_path) as db:
            try:
                await db.execute(
                    """INSERT INTO runs (run_id, experiment, config_json, lab_version)
                       VALUES (?, ?, ?, ?)""",
                    (run_id, experiment, config_json, lab_version)
                )
                await db.commit()
                return True
            except aiosqlite.IntegrityError:
                return False

    async def finish_run(self, run_id: str, status: str, wall_time: float, exit_code: int) -> bool:
        """Record final status of a run"""
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute(
                """UPDATE runs SET status = ?, wall_time = ?, exit_code = ?, finished_at = CURRENT_TIMESTAMP
                   WHERE run_id = ?""",
                (status, wall_time, exit_code, run_id)
            )
            await db.commit()
            return cursor.rowcount > 0

    async def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """Get run by ID"""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            async with db.execute(
                "SELECT * FROM runs WHERE run_id = ?", (run_id,)
            ) as cursor:
                row = await cursor.fetchone()
                return dict(row) if row else None

    async def list_runs(self, experiment: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        """Most recent runs first"""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            if experiment:
                query = "SELECT * FROM runs WHERE experiment = ? ORDER BY created_at DESC, rowid DESC LIMIT ?"
                params = (experiment, limit)
            else:
                query = "SELECT * FROM runs ORDER BY created_at DESC, rowid DESC LIMIT ?"
                params = (limit,)
            async with db.execute(query, params) as cursor:
                rows = await cursor.fetchall()
                return [dict(row) for row in rows]

    async def add_artifact(self, run_id: str, name: str, kind: str) -> bool:
        """Attach an output file to a run"""
        async with aiosqlite.connect(self.db_path) as db:
            await db.execute(
                "INSERT INTO artifacts (run_id, name, kind) VALUES (?, ?, ?)",
                (run_id, name, kind)
            )
            await db.commit()
            return True

    async def get_artifacts(self, run_id: str) -> List[Dict[str, Any]]:
        """Artifacts of a run"""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            async with db.execute(
                "SELECT name, kind FROM artifacts WHERE run_id = ? ORDER BY id", (run_id,)
            ) as cursor:
                rows = await cursor.fetchall()
                return [dict(row) for row in rows]
