"""
Common types and constants for the MapReduce engine.

This module contains the job descriptions and results shared by the runner,
the chain executor and the analyses.
"""

from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

# Counter names
LINES_READ = "lines_read"
CORRUPT_LINES_SKIPPED = "corrupt_lines_skipped"
DIRECTIVE_LINES_SKIPPED = "directive_lines_skipped"
MAP_TASKS = "map_tasks"
MAP_TASKS_RESCHEDULED = "map_tasks_rescheduled"
PARSE_INVOCATIONS = "parse_invocations"
MAP_OUTPUT_RECORDS = "map_output_records"
REDUCE_INPUT_GROUPS = "reduce_input_groups"
REDUCE_OUTPUT_RECORDS = "reduce_output_records"
UNROUTED_RECORDS = "unrouted_records"

SINGLE_OUTPUT = "part-00000"
PART_SUFFIX = "_part-00000"
UNROUTED_PREFIX = "unrouted"
SUCCESS_MARKER = "_SUCCESS"
COUNTERS_FILE = "_counters.tsv"
IDENTITY = "identity"


class Comparator(Enum):
    """Order of keys in the shuffle."""
    LEXICOGRAPHIC = "lexicographic"
    NUMERIC = "numeric"


class KeyValuePair(NamedTuple):
    """Intermediate unit flowing from map through shuffle to reduce."""
    key: str
    value: str


class JobConfig(NamedTuple):
    """Named text parameters visible to mappers and reducers."""
    parameters: Dict[str, str] = {}

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        return self.parameters.get(name, default)

    def require(self, name: str) -> str:
        if name not in self.parameters:
            raise KeyError(f"job parameter {name!r} is not set")
        return self.parameters[name]

    def with_parameter(self, name: str, value: str) -> "JobConfig":
        if not name:
            raise ValueError("parameter names must be non-empty")
        parameters = dict(self.parameters)
        parameters[name] = str(value)
        return JobConfig(parameters)


class PriorOutput(NamedTuple):
    """Input reference to an output file of an earlier job of the same chain."""
    job_index: int
    file_name: str = SINGLE_OUTPUT


class TextInput(NamedTuple):
    """In-memory text lines used as job input."""
    name: str
    lines: Tuple[str, ...]
    lines_per_split: int = 10000


class JobSpec(NamedTuple):
    """
    Declarative description of one job.

    `input` may be a DatasetRef, a CachedDataset, a TextInput, a PriorOutput
    (inside a chain) or None, in which case the dataset handed to run_job or
    run_chain is used.
    """
    name: str
    mapper_id: str
    reducer_id: str = IDENTITY
    config: JobConfig = JobConfig()
    multi_output: bool = False
    key_comparator: Comparator = Comparator.LEXICOGRAPHIC
    input: Any = None
    output_dir: Optional[str] = None
    descriptor: Any = None  # LogFormatDescriptor used when the mapper needs records


class Binding(NamedTuple):
    """Feed a value extracted from one job's output into a later job's config."""
    source_job: int
    extractor: str
    target_job: int
    parameter: str
    file_name: str = SINGLE_OUTPUT


class ChainSpec(NamedTuple):
    """Jobs run in order, with parameter bindings flowing forward."""
    jobs: Tuple[JobSpec, ...]
    bindings: Tuple[Binding, ...] = ()


class JobResult(NamedTuple):
    """Output files (file name -> ordered pairs) and counters of a finished job."""
    job_name: str
    outputs: Dict[str, List[Tuple[str, str]]]
    counters: Dict[str, int]
    elapsed_s: float = 0.0
    output_dir: Optional[str] = None

    def render(self, file_name: str) -> str:
        """Text of one output file as written to disk."""
        return "".join(f"{key}\t{value}\n" for key, value in self.outputs.get(file_name, []))

    def counter(self, name: str) -> int:
        return self.counters.get(name, 0)


class ChainResult(NamedTuple):
    """Results of every job of a chain, plus the parameters that were bound."""
    results: List[JobResult]
    parameters: Dict[str, str]

    @property
    def final(self) -> JobResult:
        return self.results[-1]
