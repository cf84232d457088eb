"""
Ready-made log analyses.

This module contains the mappers behind the analyses and the builders that
turn them into jobs and chains:

1. field_frequency_job: one multi-output job counting days, hours, client
   addresses, pages, methods and browsers at once
2. busiest_day_pages_chain: three chained jobs answering "which pages were
   accessed on the busiest day, and how often"
3. error_detection_job: requests at or above an HTTP status floor
4. word_search_job: lines containing a word
5. busy_hour and top_n: small reports over a counted output file
"""

import logging
import os
from collections import Counter
from typing import Dict, Iterable, List, Optional, Tuple, Union

from mrloglab.common import EmptyInput, MissingField
from mrloglab.engine.base import BaseMapper, register_mapper
from mrloglab.engine.common import (
    CORRUPT_LINES_SKIPPED, Binding, ChainSpec, Comparator, JobConfig, JobSpec, PriorOutput,
)
from mrloglab.logformat import (
    FormatId, LogFormatDescriptor, LogRecord, derive_day, derive_hour, extract_role,
)

logger = logging.getLogger(__name__)

# Output prefixes of the frequency job, paired with the role (or derivation) feeding each
FREQUENCY_PREFIXES = ("day", "hour", "ip", "page", "method", "browser")
_PREFIX_ROLES = {"ip": "client_ip", "page": "page", "method": "method", "browser": "user_agent"}

ERROR_SEVERITIES = frozenset({"error", "crit", "alert", "emerg"})
DEFAULT_STATUS_FLOOR = 400
MAX_DAY = "max_day"

CountSource = Union[str, Iterable[Tuple[str, Union[str, int]]]]


def _column_value(record: LogRecord, prefix: str, task: Optional[BaseMapper] = None) -> str:
    """Value of one frequency column; columns that cannot be derived give the missing marker."""
    try:
        if prefix == "day":
            return derive_day(record)
        if prefix == "hour":
            return derive_hour(record)
    except MissingField:
        if task is not None:
            task.increment(f"underivable_{prefix}")
        return record.descriptor.missing_marker
    return extract_role(record, _PREFIX_ROLES[prefix])


@register_mapper("field-frequency")
class FieldFrequencyMapper(BaseMapper):
    """Emits (<prefix>_<value>, 1) for every frequency column of a record."""

    needs_records = True

    def map(self, key: int, value: LogRecord) -> Iterable[Tuple[str, str]]:
        for prefix in FREQUENCY_PREFIXES:
            yield f"{prefix}_{_column_value(value, prefix, self)}", "1"


@register_mapper("column")
class ColumnMapper(BaseMapper):
    """Counts a single frequency column, named by the "column" parameter."""

    needs_records = True

    def setup(self, config: JobConfig):
        super().setup(config)
        self.prefix = config.require("column")

    def map(self, key: int, value: LogRecord) -> Iterable[Tuple[str, str]]:
        yield _column_value(value, self.prefix, self), "1"


@register_mapper("day-count")
class DayCountMapper(BaseMapper):
    """EMIT(day, one)."""

    needs_records = True

    def map(self, key: int, value: LogRecord) -> Iterable[Tuple[str, str]]:
        try:
            day = derive_day(value)
        except MissingField:
            self.increment("undated_lines")
            return
        yield day, "1"


@register_mapper("day-filtered-pages")
class DayFilteredPagesMapper(BaseMapper):
    """Emits (page, one) for records of the day held in the max_day parameter."""

    needs_records = True

    def setup(self, config: JobConfig):
        super().setup(config)
        self.max_day = config.require(MAX_DAY)

    def map(self, key: int, value: LogRecord) -> Iterable[Tuple[str, str]]:
        try:
            day = derive_day(value)
        except MissingField:
            self.increment("undated_lines")
            return
        if day == self.max_day:
            yield extract_role(value, "page"), "1"


@register_mapper("error-detection")
class ErrorDetectionMapper(BaseMapper):
    """
    Emits (status_<code>, 1) and (errpage_<page>, 1) for failed requests.

    Access logs are filtered on numeric status >= status_floor; error logs on
    their severity. Lines whose status is not a number are corrupt here.
    """

    needs_records = True

    def setup(self, config: JobConfig):
        super().setup(config)
        self.status_floor = int(config.get("status_floor", str(DEFAULT_STATUS_FLOOR)))

    def map(self, key: int, value: LogRecord) -> Iterable[Tuple[str, str]]:
        status = extract_role(value, "status")
        if value.format_id is FormatId.APACHE_ERROR:
            severity = status.rpartition(":")[2]
            if severity not in ERROR_SEVERITIES:
                return
            code = severity
        elif status.isdigit():
            if int(status) < self.status_floor:
                return
            code = status
        else:
            self.increment(CORRUPT_LINES_SKIPPED)
            return
        yield f"status_{code}", "1"
        page = extract_role(value, "page")
        if page != value.descriptor.missing_marker:
            yield f"errpage_{page}", "1"


@register_mapper("word-search")
class WordSearchMapper(BaseMapper):
    """Emits (needle, 1) for every raw line containing the needle."""

    skip_directives = False

    def setup(self, config: JobConfig):
        super().setup(config)
        self.needle = config.require("needle")
        self.increment("lines_matched", 0)

    def map(self, key: int, value: str) -> Iterable[Tuple[str, str]]:
        if self.needle in value:
            self.increment("lines_matched")
            yield self.needle, "1"


def field_frequency_job(descriptor: Optional[LogFormatDescriptor] = None, output_dir: Optional[str] = None) -> JobSpec:
    """Single multi-output job writing day_, hour_, ip_, page_, method_ and browser_ files."""
    return JobSpec(
        name="frequency",
        mapper_id="field-frequency",
        reducer_id="sum",
        multi_output=True,
        output_dir=output_dir,
        descriptor=descriptor,
    )


def per_column_jobs(descriptor: Optional[LogFormatDescriptor] = None) -> List[JobSpec]:
    """One single-output job per frequency column, the alternative to field_frequency_job."""
    return [
        JobSpec(
            name=f"{prefix}-frequency",
            mapper_id="column",
            reducer_id="sum",
            config=JobConfig({"column": prefix}),
            descriptor=descriptor,
        )
        for prefix in FREQUENCY_PREFIXES
    ]


def wordcount_job() -> JobSpec:
    return JobSpec(name="wordcount", mapper_id="wordcount", reducer_id="sum")


def busiest_day_pages_chain(descriptor: Optional[LogFormatDescriptor] = None) -> ChainSpec:
    """
    Pages accessed on the busiest day, with their access counts.

    1. day-totals: (day, 1) summed into (day, total access)
    2. days-by-access: lines of 1 swapped to (total access, day), sorted
       numerically, passed through an identity reducer
    3. the last line of 2 gives max_day
    4. busiest-day-pages: (page, 1) for records of max_day, summed
    """
    jobs = (
        JobSpec(name="day-totals", mapper_id="day-count", reducer_id="sum", descriptor=descriptor),
        JobSpec(
            name="days-by-access",
            mapper_id="swap-columns",
            key_comparator=Comparator.NUMERIC,
            input=PriorOutput(0),
        ),
        JobSpec(name="busiest-day-pages", mapper_id="day-filtered-pages", reducer_id="sum", descriptor=descriptor),
    )
    bindings = (Binding(source_job=1, extractor="LAST_LINE_VALUE", target_job=2, parameter=MAX_DAY),)
    return ChainSpec(jobs, bindings)


def error_detection_job(status_floor: int = DEFAULT_STATUS_FLOOR, descriptor: Optional[LogFormatDescriptor] = None) -> JobSpec:
    return JobSpec(
        name="errors",
        mapper_id="error-detection",
        reducer_id="sum",
        config=JobConfig({"status_floor": str(status_floor)}),
        multi_output=True,
        descriptor=descriptor,
    )


def word_search_job(needle: str) -> JobSpec:
    """Count of raw lines containing `needle` as a substring."""
    if not needle:
        raise ValueError("the search word must be non-empty")
    return JobSpec(name="grep", mapper_id="word-search", reducer_id="sum", config=JobConfig({"needle": needle}))


def read_counts(path: str) -> List[Tuple[str, int]]:
    """Read a key<TAB>count output file."""
    counts = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.rpartition("\t")
            counts.append((key, int(value)))
    return counts


def _counts(source: CountSource) -> List[Tuple[str, int]]:
    if isinstance(source, (str, os.PathLike)):
        return read_counts(os.fspath(source))
    return [(key, int(value)) for key, value in source]


def busy_hour(source: CountSource) -> Tuple[str, int]:
    """
    Hour with the most requests in an hour_ output; ties go to the earliest hour.

    Args:
        source: Path of an hour_part-00000 file, or its (hour, count) pairs

    Raises:
        EmptyInput: no hours to choose from
    """
    counts = _counts(source)
    if not counts:
        raise EmptyInput("hour output is empty")
    return min(counts, key=lambda pair: (-pair[1], pair[0]))


def top_n(source: CountSource, n: int) -> List[Tuple[str, int]]:
    """The n largest counts, ties broken by ascending key."""
    if n <= 0:
        raise ValueError("n must be positive")
    return sorted(_counts(source), key=lambda pair: (-pair[1], pair[0]))[:n]


def sql_busiest_day_pages(records: Iterable[LogRecord]) -> List[Tuple[str, int]]:
    """
    Direct single-pass evaluation of the busiest-day query.

    Ties between days on the maximum count go to the greatest day, as the
    chain's ascending numeric sort leaves that day on the last line.

    Returns:
        (page, accesses) pairs in ascending page order
    """
    dated = []
    for record in records:
        try:
            dated.append((derive_day(record), record))
        except MissingField:
            continue
    if not dated:
        return []
    per_day = Counter(day for day, _ in dated)
    top = max(per_day.values())
    max_day = max(day for day, count in per_day.items() if count == top)
    pages = Counter(extract_role(record, "page") for day, record in dated if day == max_day)
    return sorted(pages.items())


def tally_frequencies(records: Iterable[LogRecord]) -> Dict[str, Dict[str, int]]:
    """Single-pass frequency tally, the reference for field_frequency_job."""
    tally: Dict[str, Counter] = {prefix: Counter() for prefix in FREQUENCY_PREFIXES}
    for record in records:
        for prefix in FREQUENCY_PREFIXES:
            tally[prefix][_column_value(record, prefix)] += 1
    return {prefix: dict(counts) for prefix, counts in tally.items() if counts}


# Analysis names offered on the command line
SINGLE_JOB_ANALYSES = ("frequency", "errors", "busy-hour")
QUERIES = ("busiest-day-pages",)
ANALYSES = SINGLE_JOB_ANALYSES + QUERIES + ("grep",)
