"""
Base classes for mappers and reducers.

This module contains the classes user tasks inherit from, and the registry
that maps the names used in a JobSpec to those classes.
"""

import logging
from typing import Callable, Dict, Iterable, List, Tuple, Type

from mrloglab.common import UnknownMapper, UnknownReducer
from mrloglab.engine.common import JobConfig

logger = logging.getLogger(__name__)


class BaseTask:
    """Common functionality for mappers and reducers: config, counters, verbosity."""

    # Class-level verbosity setting
    verbose = False

    @classmethod
    def set_verbose(cls, verbose: bool):
        """Set the verbosity for all task instances."""
        cls.verbose = verbose

    def __init__(self):
        self.config = JobConfig()
        self.counters: Dict[str, int] = {}

    def debug_print(self, *args):
        """Log debug messages only when verbose mode is enabled."""
        if self.verbose:
            logger.debug(" ".join(str(arg) for arg in args))

    def setup(self, config: JobConfig):
        """Called once per task before any input; override to read parameters."""
        self.config = config

    def increment(self, counter: str, amount: int = 1):
        self.counters[counter] = self.counters.get(counter, 0) + amount


class BaseMapper(BaseTask):
    """
    Turns one input line into intermediate pairs.

    The engine hands `map` the line text, or the parsed LogRecord when
    `needs_records` is set. Corrupt lines never reach a record mapper.
    """

    needs_records = False
    skip_directives = True

    def map(self, key: int, value) -> Iterable[Tuple[str, str]]:
        raise NotImplementedError


class BaseReducer(BaseTask):
    """Turns one key and all of its values into output pairs."""

    def reduce(self, key: str, values: List[str]) -> Iterable[Tuple[str, str]]:
        raise NotImplementedError


MAPPERS: Dict[str, Type[BaseMapper]] = {}
REDUCERS: Dict[str, Type[BaseReducer]] = {}

_builtins_loaded = False


def register_mapper(name: str) -> Callable[[Type[BaseMapper]], Type[BaseMapper]]:
    """Class decorator adding a mapper to the registry under `name`."""
    def decorator(cls):
        MAPPERS[name] = cls
        return cls
    return decorator


def register_reducer(name: str) -> Callable[[Type[BaseReducer]], Type[BaseReducer]]:
    """Class decorator adding a reducer to the registry under `name`."""
    def decorator(cls):
        REDUCERS[name] = cls
        return cls
    return decorator


def _load_builtins():
    global _builtins_loaded
    if _builtins_loaded:
        return
    _builtins_loaded = True
    # Both modules register their tasks on import
    import mrloglab.engine.builtin  # noqa: F401
    import mrloglab.analyses  # noqa: F401


def get_mapper(name: str) -> Type[BaseMapper]:
    _load_builtins()
    try:
        return MAPPERS[name]
    except KeyError:
        raise UnknownMapper(f"no mapper registered as {name!r}") from None


def get_reducer(name: str) -> Type[BaseReducer]:
    _load_builtins()
    try:
        return REDUCERS[name]
    except KeyError:
        raise UnknownReducer(f"no reducer registered as {name!r}") from None
