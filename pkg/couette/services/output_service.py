"""
Artifact writer for experiment outputs (CSV tables, JSON manifests)
"""
import asyncio
import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import aiofiles
import numpy as np

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Round-trippable text for one CSV cell; floats use %.17g"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.17g" % value
    if value is None:
        return ""
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row of length {len(row)} does not match {len(header)} columns")
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_json(payload: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


class OutputWriter:
    """
    Writes the artifacts of one run directory

    Each file has its own lock, so concurrent jobs appending to the same
    table are serialized while different files are written in parallel.
    """

    def __init__(self, directory: str):
        """
        Initialize writer

        Args:
            directory: Run output directory (created if missing)
        """
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: Dict[str, asyncio.Lock] = {}
        self.artifacts: List[str] = []
        logger.info(f"Output directory ready: {self.directory}")

    def _lock_for(self, name: str) -> asyncio.Lock:
        if name not in self._locks:
            self._locks[name] = asyncio.Lock()
        return self._locks[name]

    def path(self, name: str) -> Path:
        return self.directory / name

    def _register(self, name: str) -> None:
        if name not in self.artifacts:
            self.artifacts.append(name)

    async def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        async with self._lock_for(name):
            async with aiofiles.open(target, "w", encoding="utf-8", newline="") as f:
                await f.write(text)
        self._register(name)
        logger.info(f"Wrote {name} ({len(text)} bytes)")
        return target

    async def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        return await self.write_text(name, render_csv(header, list(rows)))

    async def append_csv(self, name: str, header: Sequence[str], row: Sequence[Any]) -> Path:
        """Append one row, writing the header first when the file is new"""
        target = self.path(name)
        async with self._lock_for(name):
            fresh = not target.exists()
            text = render_csv(header, [row])
            if not fresh:
                text = text.split("\n", 1)[1]
            async with aiofiles.open(target, "a", encoding="utf-8", newline="") as f:
                await f.write(text)
        self._register(name)
        return target

    async def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        return await self.write_text(name, render_json(payload))

    async def write_bytes(self, name: str, data: bytes) -> Path:
        target = self.path(name)
        async with self._lock_for(name):
            async with aiofiles.open(target, "wb") as f:
                await f.write(data)
        self._register(name)
        logger.info(f"Wrote {name} ({len(data)} bytes)")
        return target


async def read_csv(path: str) -> List[Dict[str, str]]:
    async with aiofiles.open(path, "r", encoding="utf-8") as f:
        content = await f.read()
    return list(csv.DictReader(io.StringIO(content)))


async def read_json(path: str) -> Dict[str, Any]:
    async with aiofiles.open(path, "r", encoding="utf-8") as f:
        return json.loads(await f.read())
