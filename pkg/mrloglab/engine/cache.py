"""
In-memory cached datasets.

A dataset is read from the block store and parsed once; jobs run over the
cache afterwards skip both the block reads and the parsing.
"""

import logging
from itertools import islice
from typing import List, NamedTuple, Optional, Tuple

from mrloglab.blockstore import Cluster, DatasetRef, SplitReader, splits_for_map
from mrloglab.common import NoFormatMatched
from mrloglab.logformat import LogFormatDescriptor, LogRecord, detect_format, is_directive, parse_or_none

logger = logging.getLogger(__name__)

DETECTION_SAMPLE = 100


class CachedLine(NamedTuple):
    """A line kept in memory with its parse result (None for directives and corrupt lines)."""
    offset: int
    line: str
    record: Optional[LogRecord]


class CachedDataset:
    """
    Lines of a dataset held in memory, grouped as they were split on disk.

    `parse_count` counts the parses performed while filling the cache and
    never moves afterwards.
    """

    def __init__(self, dataset_id: str, descriptor: Optional[LogFormatDescriptor]):
        self.dataset_id = dataset_id
        self.descriptor = descriptor
        self.partitions: List[Tuple[CachedLine, ...]] = []
        self.parse_count = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def records(self) -> List[LogRecord]:
        return [entry.record for partition in self.partitions for entry in partition if entry.record is not None]

    @property
    def line_count(self) -> int:
        return sum(len(partition) for partition in self.partitions)

    def _add_partition(self, lines: List[Tuple[int, str]]):
        entries = []
        for offset, line in lines:
            record = None
            if self.descriptor is not None and not is_directive(line):
                self.parse_count += 1
                record = parse_or_none(line, self.descriptor, offset)
            entries.append(CachedLine(offset, line, record))
        self.partitions.append(tuple(entries))


def cache_dataset(dataset: DatasetRef, cluster: Cluster, descriptor: Optional[LogFormatDescriptor] = None) -> CachedDataset:
    """
    Read and parse a whole dataset into memory.

    Args:
        dataset: Ingested dataset
        cluster: Cluster holding its blocks
        descriptor: Dialect to parse with; defaults to the dataset's format, else detected

    Raises:
        BlockUnavailable: some block has no live replica
    """
    reader = SplitReader(dataset, cluster)
    split_lines = [reader.read(split) for split in splits_for_map(dataset)]

    descriptor = descriptor or dataset.format
    if descriptor is None:
        records = (line for lines in split_lines for _, line in lines if not is_directive(line))
        sample = list(islice(records, DETECTION_SAMPLE))
        if sample:
            try:
                descriptor = detect_format(sample, DETECTION_SAMPLE)
            except NoFormatMatched as e:
                # Raw lines are still usable by jobs that never parse
                logger.warning(f"Caching {dataset.dataset_id} unparsed: {e}")

    cached = CachedDataset(dataset.dataset_id, descriptor)
    for lines in split_lines:
        cached._add_partition(lines)
    logger.info(f"Cached {dataset.dataset_id}: {cached.line_count} lines, {cached.parse_count} parsed")
    return cached
