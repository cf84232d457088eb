"""
Common utilities for mrloglab.

This module contains shared functionality: verbosity control, input discovery,
size parsing and the exception hierarchy used across the package.
"""

import logging
import os
from typing import List, Optional

logger = logging.getLogger(__name__)

PACKAGE_LOGGER = "mrloglab"
STORE_ENV_VAR = "MRLOGLAB_STORE"
LOG_SUFFIXES = (".log", ".txt")

_verbose = False


def set_verbose(verbose: bool):
    """
    Set the verbosity for the whole package.

    This is the single function that should be used to control verbosity
    throughout the codebase.
    """
    global _verbose
    _verbose = verbose

    package_logger = logging.getLogger(PACKAGE_LOGGER)
    package_logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    if not package_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        package_logger.addHandler(handler)

    # Mappers and reducers carry their own class-level flag; engine.base imports this module
    from mrloglab.engine.base import BaseTask
    BaseTask.set_verbose(verbose)


def is_verbose() -> bool:
    return _verbose


def debug_print(*args):
    """Log a debug message built from the arguments, like print would join them."""
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(" ".join(str(arg) for arg in args))


class MrLogLabError(Exception):
    """Base class for every error raised on purpose by mrloglab."""

    @property
    def reason(self) -> str:
        return type(self).__name__


# Log format errors
class NoFormatMatched(MrLogLabError):
    pass


class FieldCountMismatch(MrLogLabError):
    def __init__(self, expected: int, actual: int, line_number: int = 0):
        super().__init__(f"expected {expected} fields, found {actual} (line {line_number})")
        self.expected = expected
        self.actual = actual
        self.line_number = line_number


class MissingField(MrLogLabError):
    pass


class UnknownField(MrLogLabError):
    pass


# Block store errors
class InvalidClusterSpec(MrLogLabError):
    pass


class ReplicationInfeasible(InvalidClusterSpec):
    pass


class BlockUnavailable(MrLogLabError):
    def __init__(self, dataset_id: str, block_index: int):
        super().__init__(f"no live replica for block {block_index} of dataset {dataset_id}")
        self.dataset_id = dataset_id
        self.block_index = block_index


# Engine errors
class InvalidJobSpec(MrLogLabError):
    pass


class UnknownMapper(MrLogLabError):
    pass


class UnknownReducer(MrLogLabError):
    pass


class NonNumericKey(MrLogLabError):
    pass


class NoPrefix(MrLogLabError):
    pass


class BindingFailed(MrLogLabError):
    pass


class JobFailed(MrLogLabError):
    """A job could not complete; `cause` holds the underlying error."""

    def __init__(self, job_name: str, cause: Exception):
        super().__init__(f"job {job_name} failed: {type(cause).__name__}: {cause}")
        self.job_name = job_name
        self.cause = cause

    @property
    def reason(self) -> str:
        return type(self.cause).__name__


# Analysis and bench errors
class EmptyInput(MrLogLabError):
    pass


class ZeroSize(MrLogLabError):
    pass


_SIZE_SUFFIXES = {"K": 1024, "M": 1024 ** 2, "G": 1024 ** 3}


def parse_size(text: str) -> int:
    """
    Parse a byte size such as "4096", "64K" or "64M".

    Args:
        text: Size with an optional K, M or G suffix (powers of 1024)

    Returns:
        The size in bytes
    """
    value = text.strip().upper()
    if value.endswith("B"):
        value = value[:-1]
    multiplier = 1
    if value and value[-1] in _SIZE_SUFFIXES:
        multiplier = _SIZE_SUFFIXES[value[-1]]
        value = value[:-1]
    try:
        size = int(value) * multiplier
    except ValueError:
        raise ValueError(f"invalid size: {text!r}") from None
    if size <= 0:
        raise ValueError(f"size must be positive: {text!r}")
    return size


def resolve_store_root(flag_value: Optional[str]) -> Optional[str]:
    """Return the store root from the flag, else from MRLOGLAB_STORE, else None."""
    if flag_value:
        return os.path.abspath(flag_value)
    env_value = os.environ.get(STORE_ENV_VAR)
    if env_value:
        return os.path.abspath(env_value)
    return None


def find_log_files(path: str) -> List[str]:
    """
    Find log files in a directory or return the path if it's a file.

    A file given explicitly is always returned, whatever its extension.
    Inside a directory only files ending in .log or .txt are collected.

    Args:
        path: Path to a file or directory

    Returns:
        Sorted list of paths to log files
    """
    path = os.path.abspath(path)
    if os.path.isfile(path):
        return [path]
    if not os.path.isdir(path):
        debug_print(f"Path is not a file or directory: {path}")
        return []

    result = []
    for root, _, files in os.walk(path):
        for name in files:
            if name.endswith(LOG_SUFFIXES):
                result.append(os.path.join(root, name))
    debug_print(f"Found {len(result)} log files under {path}")
    return sorted(result)


def read_sample_lines(file_path: str, limit: int = 200) -> List[str]:
    """Read up to `limit` lines from the start of a file, without line endings."""
    lines = []
    with open(file_path, "r", encoding="utf-8", errors="replace") as f:
        for line in f:
            lines.append(line.rstrip("\r\n"))
            if len(lines) >= limit:
                break
    return lines
