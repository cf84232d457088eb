"""MapReduce engine package.

This package contains the job runner, the chain executor, the dataset cache
and the base classes mappers and reducers are written against.
"""

from .common import (
    Binding, ChainResult, ChainSpec, Comparator, JobConfig, JobResult, JobSpec,
    KeyValuePair, PriorOutput, TextInput,
)
from .base import BaseMapper, BaseReducer, register_mapper, register_reducer, get_mapper, get_reducer

# Execution
from .cache import CachedDataset, cache_dataset
from .runner import FaultInjector, route_multi_output, run_job, shuffle_sort, write_job_output
from .chain import EXTRACTORS, run_chain
