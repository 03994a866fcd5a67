"""
Job queue for parameter-grid fan-out
"""
import asyncio
import logging
from typing import Any, Callable, Iterable, List

import config

logger = logging.getLogger(__name__)


class RunQueue:
    """
    Runs CPU-bound jobs in worker threads

    - Semaphore limits concurrent jobs (default: config.THREADS)
    - Results come back in submission order
    """

    def __init__(self, max_concurrent: int = 1):
        """
        Initialize run queue

        Args:
            max_concurrent: Maximum number of jobs running simultaneously
        """
        if max_concurrent < 1:
            raise ValueError(f"max_concurrent must be >= 1, got {max_concurrent}")
        self.max_concurrent = max_concurrent
        self.semaphore = asyncio.Semaphore(max_concurrent)
        self.queue_size = 0
        self.completed = 0

        logger.info(f"Run queue initialized: max_concurrent={max_concurrent}")

    async def run(self, job: Callable[..., Any], *args, label: str = "job") -> Any:
        """
        Run one job in a worker thread once a slot is free

        Args:
            job: Callable doing the numerical work
            label: Name used in log messages

        Returns:
            Whatever the job returns
        """
        self.queue_size += 1
        position = self.queue_size
        try:
            async with self.semaphore:
                logger.info(f"Starting {label} (queue position {position})")
                result = await asyncio.to_thread(job, *args)
                self.completed += 1
                logger.info(f"Finished {label}")
                return result
        finally:
            self.queue_size -= 1

    async def map(self, job: Callable[[Any], Any], items: Iterable[Any], label: str = "job") -> List[Any]:
        """Apply job to every item; results keep the order of items"""
        items = list(items)
        tasks = [self.run(job, item, label=f"{label} {i + 1}/{len(items)}") for i, item in enumerate(items)]
        return list(await asyncio.gather(*tasks))


def make_queue(threads: int | None = None) -> RunQueue:
    """A queue bound to the running event loop"""
    return RunQueue(max_concurrent=threads or config.THREADS)
