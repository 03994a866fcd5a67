"""
Run registry abstraction layer
Provides an interface for different storage backends (SQLite, PostgreSQL, etc.)
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional


class RunStoreInterface(ABC):
    """Abstract interface for the run registry"""

    @abstractmethod
    async def init_db(self):
        """Initialize storage with required tables"""
        pass

    @abstractmethod
    async def create_run(self, run_id: str, experiment: str, config_json: str, lab_version: str) -> bool:
        """Register a new run in status 'running'"""
        pass

    @abstractmethod
    async def finish_run(self, run_id: str, status: str, wall_time: float, exit_code: int) -> bool:
        """Record final status, wall time and exit code"""
        pass

    @abstractmethod
    async def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """Get run by ID"""
        pass

    @abstractmethod
    async def list_runs(self, experiment: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        """Most recent runs, optionally for one experiment"""
        pass

    @abstractmethod
    async def add_artifact(self, run_id: str, name: str, kind: str) -> bool:
        """Attach an output file to a run"""
        pass

    @abstractmethod
    async def get_artifacts(self, run_id: str) -> List[Dict[str, Any]]:
        """Artifacts of a run in the order they were written"""
        pass
