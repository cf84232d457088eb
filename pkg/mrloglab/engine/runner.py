"""
Job execution: parallel map tasks, a sorting shuffle and the reduce phase.

One map task runs per input split on a pool of worker threads. A task reads
its split from live replicas, maps it into a private buffer, and commits the
buffer only if every node it read from is still alive; otherwise the task
is thrown away and run again against other replicas. The shuffle waits for
every task to commit, orders the pairs by key and hands each key with its
values to the reducer. Multi-output jobs route reducer pairs into files
named after the prefix of their key.
"""

import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import groupby, islice
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from mrloglab.blockstore import Cluster, DatasetRef, SplitReader, fail_node, splits_for_map
from mrloglab.common import BlockUnavailable, JobFailed, MrLogLabError, NonNumericKey, NoPrefix
from mrloglab.engine.base import BaseMapper, get_mapper, get_reducer
from mrloglab.engine.cache import CachedDataset
from mrloglab.engine.common import (
    CORRUPT_LINES_SKIPPED, COUNTERS_FILE, DIRECTIVE_LINES_SKIPPED, LINES_READ, MAP_OUTPUT_RECORDS,
    MAP_TASKS, MAP_TASKS_RESCHEDULED, PARSE_INVOCATIONS, PART_SUFFIX, REDUCE_INPUT_GROUPS,
    REDUCE_OUTPUT_RECORDS, SINGLE_OUTPUT, SUCCESS_MARKER, UNROUTED_PREFIX, UNROUTED_RECORDS,
    Comparator, JobResult, JobSpec, KeyValuePair, TextInput,
)
from mrloglab.logformat import LogFormatDescriptor, detect_format, is_directive, parse_or_none

logger = logging.getLogger(__name__)

DETECTION_SAMPLE = 100
_INTEGER = re.compile(r"-?\d+")
_SANITIZE = str.maketrans({"\t": " ", "\n": " ", "\r": " "})


class FaultInjector:
    """
    Deterministic failure schedule for map tasks.

    `fail_during` maps a task index to nodes that die once that task has read
    its input but before it commits, which forces the task to run again if it
    read from one of them. `fail_after` maps a task index to nodes that die
    once the task has committed. Each entry fires once.
    """

    def __init__(self, fail_during: Optional[Dict[int, Sequence[int]]] = None,
                 fail_after: Optional[Dict[int, Sequence[int]]] = None):
        self._during = {task: list(nodes) for task, nodes in (fail_during or {}).items()}
        self._after = {task: list(nodes) for task, nodes in (fail_after or {}).items()}
        self._lock = threading.Lock()
        self.fired: List[Tuple[int, int]] = []  # (task index, node id)

    def _fire(self, schedule: Dict[int, List[int]], task_index: int, cluster: Cluster):
        with self._lock:
            nodes = schedule.pop(task_index, [])
        for node in nodes:
            logger.warning(f"Injecting failure of node {node} at map task {task_index}")
            fail_node(cluster, node)
            self.fired.append((task_index, node))

    def after_read(self, task_index: int, cluster: Cluster):
        self._fire(self._during, task_index, cluster)

    def after_commit(self, task_index: int, cluster: Cluster):
        self._fire(self._after, task_index, cluster)


def _sanitize(text) -> str:
    return str(text).translate(_SANITIZE)


def _sort_key(comparator: Comparator):
    if comparator is Comparator.LEXICOGRAPHIC:
        return lambda pair: pair[0]

    def numeric(pair):
        key = pair[0]
        if _INTEGER.fullmatch(key) is None:
            raise NonNumericKey(f"key {key!r} is not an integer")
        return int(key), key
    return numeric


def shuffle_sort(intermediate: Iterable[Tuple[str, str]],
                 comparator: Comparator = Comparator.LEXICOGRAPHIC) -> List[Tuple[str, List[str]]]:
    """
    Group pairs by key, keys ascending under the comparator.

    The sort is stable, so each key's values keep their arrival order
    (map task index, then emission order).

    Raises:
        NonNumericKey: a key is not an integer under the NUMERIC comparator
    """
    ordered = sorted(intermediate, key=_sort_key(comparator))
    return [
        (key, [value for _, value in group])
        for key, group in groupby(ordered, key=lambda pair: pair[0])
    ]


def route_multi_output(key: str) -> Tuple[str, str]:
    """
    Split a key at its first underscore into (file prefix, residual key).

    Raises:
        NoPrefix: the key has no underscore, or nothing before it
    """
    prefix, separator, residual = key.partition("_")
    if not separator or not prefix:
        raise NoPrefix(f"key {key!r} has no routing prefix")
    return prefix, residual


def output_file_name(prefix: str) -> str:
    return prefix + PART_SUFFIX


class _JobRun:
    """State of one job execution: task outputs, counters and the shared lock."""

    def __init__(self, job: JobSpec, source, cluster: Optional[Cluster], worker_count: int,
                 fault_injector: Optional[FaultInjector]):
        self.job = job
        self.source = source
        self.cluster = cluster
        self.worker_count = worker_count
        self.fault_injector = fault_injector
        self.mapper_class = get_mapper(job.mapper_id)
        self.reducer_class = get_reducer(job.reducer_id)
        self.descriptor: Optional[LogFormatDescriptor] = None
        self.counters: Dict[str, int] = {
            LINES_READ: 0, CORRUPT_LINES_SKIPPED: 0, DIRECTIVE_LINES_SKIPPED: 0,
            MAP_TASKS: 0, MAP_TASKS_RESCHEDULED: 0, PARSE_INVOCATIONS: 0,
        }
        self._lock = threading.Lock()
        self._committed: Dict[int, List[KeyValuePair]] = {}

    def _merge(self, counters: Dict[str, int]):
        for name, amount in counters.items():
            self.counters[name] = self.counters.get(name, 0) + amount

    # Map phase

    def _new_mapper(self) -> BaseMapper:
        mapper = self.mapper_class()
        mapper.setup(self.job.config)
        return mapper

    def _map_entries(self, entries: Iterable[Tuple[int, str, object]], parse: bool) -> Tuple[List[KeyValuePair], Dict[str, int]]:
        """
        Run a fresh mapper over (offset, line, record) entries.

        When `parse` is set the lines are parsed here; otherwise the given
        record (possibly None) is used as-is.
        """
        mapper = self._new_mapper()
        needs_records = mapper.needs_records
        counters = {LINES_READ: 0, CORRUPT_LINES_SKIPPED: 0, DIRECTIVE_LINES_SKIPPED: 0, PARSE_INVOCATIONS: 0}
        output: List[KeyValuePair] = []
        for offset, line, record in entries:
            counters[LINES_READ] += 1
            if mapper.skip_directives and is_directive(line):
                counters[DIRECTIVE_LINES_SKIPPED] += 1
                continue
            if needs_records:
                if parse and self.descriptor is None:
                    # No descriptor: the input held no record line to detect one from
                    counters[CORRUPT_LINES_SKIPPED] += 1
                    continue
                if parse:
                    counters[PARSE_INVOCATIONS] += 1
                    record = parse_or_none(line, self.descriptor, offset)
                if record is None:
                    counters[CORRUPT_LINES_SKIPPED] += 1
                    continue
                value = record
            else:
                value = line
            for key, emitted in mapper.map(offset, value):
                output.append(KeyValuePair(_sanitize(key), _sanitize(emitted)))
        counters[MAP_OUTPUT_RECORDS] = len(output)
        for name, amount in mapper.counters.items():
            counters[name] = counters.get(name, 0) + amount
        return output, counters

    def _commit(self, task_index: int, output: List[KeyValuePair], counters: Dict[str, int]):
        with self._lock:
            self._committed[task_index] = output
            self._merge(counters)
            self.counters[MAP_TASKS] += 1

    def _run_split_task(self, task_index: int, split) -> None:
        dataset: DatasetRef = self.source
        max_attempts = self.cluster.spec.node_count + 1
        for attempt in range(max_attempts):
            reader = SplitReader(dataset, self.cluster)
            lines = reader.read(split)
            if self.fault_injector is not None:
                self.fault_injector.after_read(task_index, self.cluster)
            output, counters = self._map_entries(((o, l, None) for o, l in lines), parse=True)
            with self._lock:
                lost = sorted(node for node in reader.nodes_used if not self.cluster.is_alive(node))
                if not lost:
                    self._committed[task_index] = output
                    self._merge(counters)
                    self.counters[MAP_TASKS] += 1
                else:
                    self.counters[MAP_TASKS_RESCHEDULED] += 1
            if not lost:
                break
            logger.warning(f"Map task {task_index} lost node(s) {lost}; re-scheduling (attempt {attempt + 2})")
        else:
            raise BlockUnavailable(dataset.dataset_id, split.block_index)
        if self.fault_injector is not None:
            self.fault_injector.after_commit(task_index, self.cluster)

    def _run_memory_task(self, task_index: int, entries: Sequence[Tuple[int, str, object]], parse: bool) -> None:
        output, counters = self._map_entries(entries, parse)
        self._commit(task_index, output, counters)

    def _resolve_descriptor(self, sample: List[str]):
        """Pick the parsing descriptor; `sample` holds record lines only, never directives."""
        if not self.mapper_class.needs_records:
            return
        descriptor = self.job.descriptor
        if descriptor is None and isinstance(self.source, DatasetRef):
            descriptor = self.source.format
        if descriptor is None and isinstance(self.source, CachedDataset):
            descriptor = self.source.descriptor
        if descriptor is None:
            # Nothing to parse means nothing to detect; every line is a directive
            descriptor = detect_format(sample, DETECTION_SAMPLE) if sample else None
        self.descriptor = descriptor
        if descriptor is not None:
            logger.debug(f"Job {self.job.name} parses with {descriptor}")

    def _sample_records(self, dataset: DatasetRef, splits) -> List[str]:
        """First record lines of the dataset, read split by split; a header may fill whole blocks."""
        reader = SplitReader(dataset, self.cluster)
        sample: List[str] = []
        for split in splits:
            sample.extend(line for _, line in reader.read(split) if not is_directive(line))
            if len(sample) >= DETECTION_SAMPLE:
                break
        return sample[:DETECTION_SAMPLE]

    def _map_tasks(self) -> List:
        """Build one callable per map task, resolving the descriptor on the way."""
        source = self.source
        if isinstance(source, DatasetRef):
            if self.cluster is None:
                raise ValueError("a cluster is required to read a DatasetRef")
            splits = splits_for_map(source)
            sample: List[str] = []
            if self.mapper_class.needs_records and self.job.descriptor is None and source.format is None:
                sample = self._sample_records(source, splits)
            self._resolve_descriptor(sample)
            return [lambda i=i, s=s: self._run_split_task(i, s) for i, s in enumerate(splits)]

        if isinstance(source, CachedDataset):
            if self.mapper_class.needs_records and source.descriptor is None and source.line_count:
                raise MrLogLabError(f"cached dataset {source.dataset_id} was not parsed")
            self.descriptor = source.descriptor
            partitions = [[(e.offset, e.line, e.record) for e in partition] for partition in source.partitions]
            return [lambda i=i, p=p: self._run_memory_task(i, p, parse=False) for i, p in enumerate(partitions)]

        if isinstance(source, TextInput):
            entries = [(number, line, None) for number, line in enumerate(source.lines)]
            records = (line for _, line, _ in entries if not is_directive(line))
            self._resolve_descriptor(list(islice(records, DETECTION_SAMPLE)))
            size = max(1, source.lines_per_split)
            chunks = [entries[start:start + size] for start in range(0, len(entries), size)]
            return [lambda i=i, c=c: self._run_memory_task(i, c, parse=True) for i, c in enumerate(chunks)]

        raise ValueError(f"unsupported job input: {type(source).__name__}")

    # Reduce phase

    def _reduce_partition(self, groups: List[Tuple[str, List[str]]]) -> Tuple[List[Tuple[str, str]], Dict[str, int]]:
        reducer = self.reducer_class()
        reducer.setup(self.job.config)
        output = []
        for key, values in groups:
            for out_key, out_value in reducer.reduce(key, values):
                output.append((_sanitize(out_key), _sanitize(out_value)))
        return output, reducer.counters

    def _partitions(self, groups: List[Tuple[str, List[str]]]) -> List[List[Tuple[str, List[str]]]]:
        """Consecutive runs of groups sharing a routing prefix; one run for single output."""
        if not self.job.multi_output:
            return [groups]
        partitions: List[List[Tuple[str, List[str]]]] = []
        current_prefix = None
        for key, values in groups:
            prefix = key.partition("_")[0] if "_" in key else None
            if not partitions or prefix != current_prefix:
                partitions.append([])
                current_prefix = prefix
            partitions[-1].append((key, values))
        return partitions

    def _route(self, pairs: List[Tuple[str, str]]) -> Dict[str, List[Tuple[str, str]]]:
        files: Dict[str, List[Tuple[str, str]]] = {}
        if not self.job.multi_output:
            if pairs:
                files[SINGLE_OUTPUT] = pairs
            return files
        for key, value in pairs:
            try:
                prefix, residual = route_multi_output(key)
            except NoPrefix:
                self.counters[UNROUTED_RECORDS] = self.counters.get(UNROUTED_RECORDS, 0) + 1
                prefix, residual = UNROUTED_PREFIX, key
            files.setdefault(output_file_name(prefix), []).append((residual, value))
        return dict(sorted(files.items()))

    def execute(self) -> JobResult:
        started = time.perf_counter()
        tasks = self._map_tasks()
        logger.info(f"Job {self.job.name}: {len(tasks)} map tasks on {self.worker_count} workers")

        with ThreadPoolExecutor(max_workers=self.worker_count) as pool:
            futures = [pool.submit(task) for task in tasks]
            try:
                for future in futures:
                    future.result()
            except BaseException:
                for future in futures:
                    future.cancel()
                raise

        # Shuffle barrier: every task has committed
        intermediate = [pair for index in sorted(self._committed) for pair in self._committed[index]]
        groups = shuffle_sort(intermediate, self.job.key_comparator)
        self.counters[REDUCE_INPUT_GROUPS] = len(groups)

        partitions = self._partitions(groups)
        with ThreadPoolExecutor(max_workers=self.worker_count) as pool:
            reduced = list(pool.map(self._reduce_partition, partitions))
        pairs = []
        for output, counters in reduced:
            pairs.extend(output)
            self._merge(counters)
        self.counters[REDUCE_OUTPUT_RECORDS] = len(pairs)

        outputs = self._route(pairs)
        elapsed = time.perf_counter() - started
        logger.info(f"Job {self.job.name} finished in {elapsed:.3f}s: {len(outputs)} output files")
        logger.debug(f"Counters for {self.job.name}: {self.counters}")
        return JobResult(self.job.name, outputs, dict(sorted(self.counters.items())), elapsed)


def run_job(job: JobSpec, dataset=None, cluster: Optional[Cluster] = None, worker_count: int = 1,
            fault_injector: Optional[FaultInjector] = None) -> JobResult:
    """
    Run one job and, when the job names an output directory, write its files there.

    Args:
        job: What to run
        dataset: Input overriding job.input (DatasetRef, CachedDataset or TextInput)
        cluster: Cluster state, required for DatasetRef input
        worker_count: Number of parallel map workers
        fault_injector: Optional node failure schedule

    Returns:
        Output files and counters

    Raises:
        JobFailed: a block had no live replica, a task name is not registered,
            or a key is not numeric under the NUMERIC comparator
    """
    if worker_count < 1:
        raise ValueError("worker_count must be at least 1")
    source = dataset if dataset is not None else job.input
    if source is None:
        raise ValueError(f"job {job.name} has no input")
    try:
        result = _JobRun(job, source, cluster, worker_count, fault_injector).execute()
    except MrLogLabError as e:
        if isinstance(e, JobFailed):
            raise
        logger.error(f"Job {job.name} failed: {e}")
        raise JobFailed(job.name, e) from e
    if job.output_dir:
        write_job_output(result, job.output_dir)
        result = result._replace(output_dir=job.output_dir)
    return result


def write_job_output(result: JobResult, output_dir: str):
    """
    Write part files, the counters file and the _SUCCESS marker.

    Files left by an earlier run in the same directory are removed first.
    """
    os.makedirs(output_dir, exist_ok=True)
    for name in os.listdir(output_dir):
        if name.endswith(SINGLE_OUTPUT) or name in (SUCCESS_MARKER, COUNTERS_FILE):
            os.remove(os.path.join(output_dir, name))

    for file_name in result.outputs:
        with open(os.path.join(output_dir, file_name), "w", encoding="utf-8", newline="\n") as f:
            f.write(result.render(file_name))
    with open(os.path.join(output_dir, COUNTERS_FILE), "w", encoding="utf-8", newline="\n") as f:
        for name, value in sorted(result.counters.items()):
            f.write(f"{name}\t{value}\n")
    open(os.path.join(output_dir, SUCCESS_MARKER), "w").close()
