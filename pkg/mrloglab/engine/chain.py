"""
Chained jobs.

Jobs of a ChainSpec run one after the other. A job may read an earlier
job's output file (PriorOutput), and bindings copy a value extracted from an
earlier output into a later job's config before that job starts.
"""

import logging
import os
from typing import Callable, Dict, List, Optional, Tuple

from mrloglab.blockstore import Cluster
from mrloglab.common import BindingFailed, InvalidJobSpec
from mrloglab.engine.common import Binding, ChainResult, ChainSpec, JobResult, JobSpec, PriorOutput, TextInput
from mrloglab.engine.runner import FaultInjector, run_job

logger = logging.getLogger(__name__)

Extractor = Callable[[List[Tuple[str, str]]], str]


def _last_line_value(pairs: List[Tuple[str, str]]) -> str:
    return pairs[-1][1]


def _last_line_key(pairs: List[Tuple[str, str]]) -> str:
    return pairs[-1][0]


def _first_line_value(pairs: List[Tuple[str, str]]) -> str:
    return pairs[0][1]


EXTRACTORS: Dict[str, Extractor] = {
    "LAST_LINE_VALUE": _last_line_value,
    "LAST_LINE_KEY": _last_line_key,
    "FIRST_LINE_VALUE": _first_line_value,
}


def validate_chain(chain: ChainSpec):
    """Check that bindings and prior-output inputs only flow forward."""
    if not chain.jobs:
        raise InvalidJobSpec("a chain needs at least one job")
    count = len(chain.jobs)
    for binding in chain.bindings:
        if binding.extractor not in EXTRACTORS:
            raise InvalidJobSpec(f"unknown extractor {binding.extractor!r}")
        if not 0 <= binding.source_job < binding.target_job < count:
            raise InvalidJobSpec(
                f"binding {binding.parameter!r} must flow forward: job {binding.source_job} -> {binding.target_job}")
        if not binding.parameter:
            raise InvalidJobSpec("binding parameter names must be non-empty")
    for index, job in enumerate(chain.jobs):
        if isinstance(job.input, PriorOutput) and not 0 <= job.input.job_index < index:
            raise InvalidJobSpec(f"job {job.name} reads the output of job {job.input.job_index}, which has not run")


def extract_binding(binding: Binding, result: JobResult) -> str:
    """
    Apply a binding's extractor to the named output of a finished job.

    Raises:
        BindingFailed: the output file is empty or absent
    """
    pairs = result.outputs.get(binding.file_name, [])
    if not pairs:
        raise BindingFailed(
            f"cannot bind {binding.parameter!r}: output {binding.file_name} of job {result.job_name} is empty")
    return EXTRACTORS[binding.extractor](pairs)


def _resolve_input(job: JobSpec, results: List[JobResult], dataset):
    if isinstance(job.input, PriorOutput):
        prior = results[job.input.job_index]
        lines = tuple(f"{key}\t{value}" for key, value in prior.outputs.get(job.input.file_name, []))
        return TextInput(f"{prior.job_name}/{job.input.file_name}", lines)
    if job.input is None:
        return dataset
    return job.input


def run_chain(chain: ChainSpec, cluster: Optional[Cluster] = None, worker_count: int = 1, dataset=None,
              output_dir: Optional[str] = None, fault_injector: Optional[FaultInjector] = None) -> ChainResult:
    """
    Run every job of a chain in order.

    Args:
        chain: Jobs and bindings
        cluster: Cluster state for DatasetRef inputs
        worker_count: Parallel map workers per job
        dataset: Input of every job whose input is None
        output_dir: When given, job i writes to <output_dir>/<job name>
        fault_injector: Optional node failure schedule, shared by all jobs

    Returns:
        All job results, the last one being the chain's answer

    Raises:
        JobFailed: the first job failure, unchanged
        BindingFailed: an extractor found an empty output
    """
    validate_chain(chain)
    results: List[JobResult] = []
    parameters: Dict[str, str] = {}
    pending: Dict[int, Dict[str, str]] = {}

    for index, job in enumerate(chain.jobs):
        config = job.config
        for name, value in pending.pop(index, {}).items():
            config = config.with_parameter(name, value)
        if job.output_dir is None and output_dir is not None:
            job = job._replace(output_dir=os.path.join(output_dir, job.name))
        job = job._replace(config=config)

        logger.info(f"Chain step {index + 1}/{len(chain.jobs)}: {job.name}")
        result = run_job(job, _resolve_input(job, results, dataset), cluster, worker_count, fault_injector)
        results.append(result)

        for binding in chain.bindings:
            if binding.source_job != index:
                continue
            value = extract_binding(binding, result)
            logger.info(f"Bound {binding.parameter}={value!r} for job {binding.target_job}")
            pending.setdefault(binding.target_job, {})[binding.parameter] = value
            parameters[binding.parameter] = value

    return ChainResult(results, parameters)
