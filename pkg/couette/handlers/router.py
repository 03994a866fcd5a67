"""
Experiment router: maps experiment names to async handlers
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Dict, List

from couette.services.output_service import OutputWriter
from couette.services.run_queue import RunQueue
from couette.services.settings_service import RunConfig
from couette.utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Everything a handler needs for one run"""

    config: RunConfig
    writer: OutputWriter
    queue: RunQueue
    run_id: str
    constants: Dict[str, float] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


Handler = Callable[[RunContext], Awaitable[None]]


class Router:
    """Collects experiment handlers; routers can be nested with include_router"""

    def __init__(self):
        self.handlers: Dict[str, Handler] = {}

    def experiment(self, name: str):
        """Register the decorated coroutine as the handler of an experiment"""

        def decorator(handler: Handler) -> Handler:
            if name in self.handlers:
                raise ConfigError(f"experiment '{name}' registered twice")
            self.handlers[name] = handler
            return handler

        return decorator

    def include_router(self, other: "Router") -> None:
        for name, handler in other.handlers.items():
            if name in self.handlers:
                raise ConfigError(f"experiment '{name}' registered twice")
            self.handlers[name] = handler

    def resolve(self, name: str) -> Handler:
        if name not in self.handlers:
            raise ConfigError(f"no handler for experiment '{name}'")
        return self.handlers[name]

    def names(self) -> List[str]:
        return sorted(self.handlers)
