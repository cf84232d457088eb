"""
Web server log formats.

This module detects the dialect of a log corpus and parses its lines into
records. Formats are data: each LogFormatDescriptor lists its fields in line
order plus how they are wrapped on the line, and everything else (tokenizing,
re-serializing, detecting) is driven from that description.

Supported dialects:

1. IIS W3C extended, in two variants (the full 22 field layout and the
   13 field layout seen in IIS default configurations)
2. Apache access logs, combined and common variants
3. Apache error logs
4. Squid native access logs
"""

import logging
import re
from datetime import date, datetime, timezone
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Iterator, List, NamedTuple, Optional, Pattern, Tuple

from mrloglab.common import FieldCountMismatch, MissingField, NoFormatMatched, UnknownField

logger = logging.getLogger(__name__)

DIRECTIVE_PREFIX = "#"
MISSING = "-"

_MONTHS = {
    "Jan": 1, "Feb": 2, "Mar": 3, "Apr": 4, "May": 5, "Jun": 6,
    "Jul": 7, "Aug": 8, "Sep": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}
_SANITIZE = str.maketrans({"\t": " ", "\n": " ", "\r": " "})


class FormatId(Enum):
    """Log dialects, in detection priority order."""
    IIS_W3C = "IIS_W3C"
    APACHE_ACCESS = "APACHE_ACCESS"
    APACHE_ERROR = "APACHE_ERROR"
    SQUID = "SQUID"


class TimestampStyle(Enum):
    """How a dialect writes the moment a request happened."""
    SPLIT_ISO = "split-iso"      # separate YYYY-MM-DD and HH:MM:SS fields
    CLF = "clf"                  # 10/Oct/2000:13:55:36 -0700
    CTIME = "ctime"              # Wed Oct 11 14:32:52 2000
    EPOCH = "epoch"              # 1286536309.586


class RolePart(NamedTuple):
    """Where a format-independent role lives: a field, optionally one piece of it."""
    field: str
    separator: Optional[str] = None
    index: int = 0


class LogFormatDescriptor(NamedTuple):
    """Description of one log dialect variant."""
    format_id: FormatId
    name: str
    field_schema: Tuple[str, ...]
    timestamp_style: TimestampStyle
    date_field: str
    time_field: Optional[str] = None
    delimiter: str = " "
    missing_marker: str = MISSING
    wrapped: Dict[str, Tuple[str, str]] = {}  # field -> (opening text, closing text)
    optional: FrozenSet[str] = frozenset()    # wrapped fields that may be absent from a line
    rest_field: Optional[str] = None          # last field swallowing the rest of the line
    collapse_runs: bool = False               # runs of delimiters count as one
    roles: Dict[str, RolePart] = {}
    validators: Dict[str, str] = {}           # field -> regex its value must match during detection

    def __str__(self) -> str:
        return f"{self.format_id.value} ({self.name}, {len(self.field_schema)} fields)"


# Roles the analyses use, whatever the dialect
ROLES = ("client_ip", "page", "method", "user_agent", "status")

_ISO_DATE = r"\d{4}-\d{2}-\d{2}"
_ISO_TIME = r"\d{2}:\d{2}:\d{2}(\.\d+)?"
_CLF_TIME = r"\d{1,2}/[A-Z][a-z]{2}/\d{4}:\d{2}:\d{2}:\d{2}( [+-]\d{4})?"
_CTIME = r"[A-Z][a-z]{2} [A-Z][a-z]{2} +\d{1,2} \d{2}:\d{2}:\d{2}(\.\d+)? \d{4}"
_STATUS = r"\d{3}|-"

IIS_FULL = LogFormatDescriptor(
    format_id=FormatId.IIS_W3C,
    name="iis-w3c",
    field_schema=(
        "Date", "Time", "Client IP Address", "User Name",
        "Service Name and Instance Number", "Server Name", "Server IP Address",
        "Server Port", "Method", "URI Stem", "URI Query", "HTTP Status",
        "Win32 Status", "Bytes Sent", "Bytes Received", "Time Taken",
        "Protocol Version", "Host", "User Agent", "Cookie", "Referrer",
        "Protocol Substatus",
    ),
    timestamp_style=TimestampStyle.SPLIT_ISO,
    date_field="Date",
    time_field="Time",
    roles={
        "client_ip": RolePart("Client IP Address"),
        "page": RolePart("URI Stem"),
        "method": RolePart("Method"),
        "user_agent": RolePart("User Agent"),
        "status": RolePart("HTTP Status"),
    },
    validators={"Date": _ISO_DATE, "Time": _ISO_TIME, "HTTP Status": _STATUS},
)

IIS_SAMPLE = LogFormatDescriptor(
    format_id=FormatId.IIS_W3C,
    name="iis-w3c-sample",
    field_schema=(
        "Date", "Time", "Service Name and Instance Number", "Server IP Address",
        "Method", "URI Stem", "URI Query", "Server Port", "User Name",
        "Client IP Address", "User Agent", "Referrer", "Host",
    ),
    timestamp_style=TimestampStyle.SPLIT_ISO,
    date_field="Date",
    time_field="Time",
    roles={
        "client_ip": RolePart("Client IP Address"),
        "page": RolePart("URI Stem"),
        "method": RolePart("Method"),
        "user_agent": RolePart("User Agent"),
    },
    validators={"Date": _ISO_DATE, "Time": _ISO_TIME, "Server Port": r"\d+|-"},
)

_APACHE_WRAPPED = {
    "Timestamp": ("[", "]"),
    "Request": ('"', '"'),
    "Referrer": ('"', '"'),
    "User Agent": ('"', '"'),
}
_APACHE_ROLES = {
    "client_ip": RolePart("Remote Host"),
    "page": RolePart("Request", " ", 1),
    "method": RolePart("Request", " ", 0),
    "user_agent": RolePart("User Agent"),
    "status": RolePart("HTTP Status"),
}

APACHE_COMBINED = LogFormatDescriptor(
    format_id=FormatId.APACHE_ACCESS,
    name="apache-combined",
    field_schema=(
        "Remote Host", "Identity", "User Name", "Timestamp", "Request",
        "HTTP Status", "Bytes Sent", "Referrer", "User Agent",
    ),
    timestamp_style=TimestampStyle.CLF,
    date_field="Timestamp",
    wrapped=_APACHE_WRAPPED,
    roles=_APACHE_ROLES,
    validators={"Timestamp": _CLF_TIME, "HTTP Status": _STATUS},
)

APACHE_COMMON = LogFormatDescriptor(
    format_id=FormatId.APACHE_ACCESS,
    name="apache-common",
    field_schema=(
        "Remote Host", "Identity", "User Name", "Timestamp", "Request",
        "HTTP Status", "Bytes Sent",
    ),
    timestamp_style=TimestampStyle.CLF,
    date_field="Timestamp",
    wrapped={"Timestamp": ("[", "]"), "Request": ('"', '"')},
    roles={role: part for role, part in _APACHE_ROLES.items() if role != "user_agent"},
    validators={"Timestamp": _CLF_TIME, "HTTP Status": _STATUS},
)

APACHE_ERROR = LogFormatDescriptor(
    format_id=FormatId.APACHE_ERROR,
    name="apache-error",
    field_schema=("Timestamp", "Severity", "Client IP Address", "Message"),
    timestamp_style=TimestampStyle.CTIME,
    date_field="Timestamp",
    wrapped={
        "Timestamp": ("[", "]"),
        "Severity": ("[", "]"),
        "Client IP Address": ("[client ", "]"),
    },
    optional=frozenset({"Client IP Address"}),
    rest_field="Message",
    roles={
        "client_ip": RolePart("Client IP Address"),
        "status": RolePart("Severity"),
    },
    validators={"Timestamp": _CTIME, "Severity": r"[a-z]+"},
)

# Apache 2.4: module-qualified severity, a process field, and client port
APACHE_ERROR_24 = LogFormatDescriptor(
    format_id=FormatId.APACHE_ERROR,
    name="apache-error-24",
    field_schema=("Timestamp", "Severity", "Process", "Client IP Address", "Message"),
    timestamp_style=TimestampStyle.CTIME,
    date_field="Timestamp",
    wrapped={
        "Timestamp": ("[", "]"),
        "Severity": ("[", "]"),
        "Process": ("[pid ", "]"),
        "Client IP Address": ("[client ", "]"),
    },
    optional=frozenset({"Client IP Address"}),
    rest_field="Message",
    roles={
        "client_ip": RolePart("Client IP Address", ":", 0),
        "status": RolePart("Severity", ":", 1),
    },
    validators={"Timestamp": _CTIME, "Severity": r"[a-z_0-9]+:[a-z0-9]+", "Process": r"\d+(:tid \d+)?"},
)

SQUID = LogFormatDescriptor(
    format_id=FormatId.SQUID,
    name="squid",
    field_schema=(
        "Timestamp", "Elapsed", "Client IP Address", "Result Code", "Bytes Sent",
        "Method", "URI", "User Name", "Hierarchy", "Content Type",
    ),
    timestamp_style=TimestampStyle.EPOCH,
    date_field="Timestamp",
    collapse_runs=True,
    roles={
        "client_ip": RolePart("Client IP Address"),
        "page": RolePart("URI"),
        "method": RolePart("Method"),
        "status": RolePart("Result Code", "/", 1),
    },
    validators={"Timestamp": r"\d+(\.\d+)?", "Elapsed": r"\d+", "Result Code": r"[A-Z_]+/\d{3}"},
)

# Detection priority: IIS_W3C > APACHE_ACCESS > APACHE_ERROR > SQUID
DESCRIPTORS: Tuple[LogFormatDescriptor, ...] = (
    IIS_FULL, IIS_SAMPLE, APACHE_COMBINED, APACHE_COMMON, APACHE_ERROR, APACHE_ERROR_24, SQUID,
)
DESCRIPTORS_BY_NAME: Dict[str, LogFormatDescriptor] = {d.name: d for d in DESCRIPTORS}


class LogRecord(NamedTuple):
    """One parsed log line."""
    format_id: FormatId
    values: Dict[str, str]  # field name -> text, in schema order
    line_number: int
    descriptor: LogFormatDescriptor  # the descriptor that parsed the line

    @property
    def variant(self) -> str:
        return self.descriptor.name


def get_descriptor(name: str) -> LogFormatDescriptor:
    """
    Look up a descriptor by variant name ("apache-common") or format id ("SQUID").

    A format id resolves to its first variant.
    """
    if name in DESCRIPTORS_BY_NAME:
        return DESCRIPTORS_BY_NAME[name]
    for descriptor in DESCRIPTORS:
        if descriptor.format_id.value == name.upper():
            return descriptor
    known = ", ".join(sorted(DESCRIPTORS_BY_NAME))
    raise ValueError(f"unknown log format {name!r} (known: {known})")


def is_directive(line: str) -> bool:
    """W3C directives and blank lines carry no record."""
    return not line.strip() or line.startswith(DIRECTIVE_PREFIX)


_pattern_cache: Dict[tuple, Pattern] = {}


def _pattern_key(descriptor: LogFormatDescriptor) -> tuple:
    """Everything the line regex depends on; descriptors hold dicts and are not hashable."""
    return (
        descriptor.field_schema, descriptor.delimiter, tuple(sorted(descriptor.wrapped.items())),
        descriptor.optional, descriptor.rest_field, descriptor.collapse_runs,
    )


def _line_pattern(descriptor: LogFormatDescriptor) -> Pattern:
    """Build (once) the regex tokenizing lines of a wrapped dialect."""
    key = _pattern_key(descriptor)
    pattern = _pattern_cache.get(key)
    if pattern is not None:
        return pattern

    delimiter = re.escape(descriptor.delimiter)
    if descriptor.collapse_runs:
        delimiter += "+"
    parts = []
    for field in descriptor.field_schema:
        if field == descriptor.rest_field:
            token = "(.*)"
        elif field in descriptor.wrapped:
            opening, closing = descriptor.wrapped[field]
            if closing == '"':
                body = r'((?:[^"\\]|\\.)*)'
            else:
                body = "([^" + re.escape(closing) + "]*)"
            token = re.escape(opening) + body + re.escape(closing)
        else:
            token = r"(\S+)"
        if field in descriptor.optional:
            parts.append("(?:" + token + delimiter + ")?")
        else:
            parts.append(token + delimiter)
    # The last field is never followed by a delimiter
    source = "".join(parts)
    if source.endswith(delimiter):
        source = source[: -len(delimiter)]
    pattern = re.compile(source)
    _pattern_cache[key] = pattern
    return pattern


def _tokenize(line: str, descriptor: LogFormatDescriptor) -> Optional[List[str]]:
    """Split a line into schema-ordered values, or None if it does not fit."""
    if descriptor.wrapped or descriptor.rest_field or descriptor.collapse_runs:
        match = _line_pattern(descriptor).fullmatch(line)
        if match is None:
            return None
        return [descriptor.missing_marker if group is None else group for group in match.groups()]
    tokens = line.split(descriptor.delimiter)
    if len(tokens) != len(descriptor.field_schema):
        return None
    return tokens


def parse_line(line: str, descriptor: LogFormatDescriptor, line_number: int = 0) -> LogRecord:
    """
    Parse one log line.

    Args:
        line: A complete log line without its trailing newline
        descriptor: Dialect to parse with
        line_number: Position of the line in its source

    Returns:
        The parsed record

    Raises:
        FieldCountMismatch: the line does not have the dialect's shape
    """
    tokens = _tokenize(line, descriptor)
    if tokens is None:
        actual = len(line.split()) if descriptor.collapse_runs else len(line.split(descriptor.delimiter))
        raise FieldCountMismatch(len(descriptor.field_schema), actual, line_number)
    values = {
        field: token.translate(_SANITIZE)
        for field, token in zip(descriptor.field_schema, tokens)
    }
    return LogRecord(descriptor.format_id, values, line_number, descriptor)


def parse_or_none(line: str, descriptor: LogFormatDescriptor, line_number: int = 0) -> Optional[LogRecord]:
    """Skip-and-count wrapper around parse_line: corrupt lines give None."""
    try:
        return parse_line(line, descriptor, line_number)
    except FieldCountMismatch as e:
        logger.debug(f"Skipping corrupt line: {e}")
        return None


def iter_records(lines: Iterable[str], descriptor: LogFormatDescriptor, skipped: Optional[List[int]] = None) -> Iterator[LogRecord]:
    """
    Parse lines lazily, ignoring directives.

    Args:
        lines: Raw lines without line endings
        descriptor: Dialect to parse with
        skipped: Optional list collecting the numbers of corrupt lines

    Yields:
        One record per well-formed line
    """
    for line_number, line in enumerate(lines):
        if is_directive(line):
            continue
        record = parse_or_none(line, descriptor, line_number)
        if record is None:
            if skipped is not None:
                skipped.append(line_number)
            continue
        yield record


def format_line(record: LogRecord) -> str:
    """Write a record back in its dialect."""
    descriptor = record.descriptor
    tokens = []
    for field in descriptor.field_schema:
        value = record.values[field]
        if field in descriptor.optional and value == descriptor.missing_marker:
            continue
        if field in descriptor.wrapped:
            opening, closing = descriptor.wrapped[field]
            value = opening + value + closing
        tokens.append(value)
    return descriptor.delimiter.join(tokens)


def matches(line: str, descriptor: LogFormatDescriptor) -> bool:
    """True when the line tokenizes under the descriptor and passes its validators."""
    tokens = _tokenize(line, descriptor)
    if tokens is None:
        return False
    values = dict(zip(descriptor.field_schema, tokens))
    for field, regex in descriptor.validators.items():
        value = values[field]
        if value == descriptor.missing_marker and field not in (descriptor.date_field,):
            continue
        if re.fullmatch(regex, value) is None:
            return False
    return True


def detect_format(sample_lines: List[str], max_lines: int = 100) -> LogFormatDescriptor:
    """
    Pick the descriptor that fits the largest share of the sample.

    Args:
        sample_lines: Lines from the start of a corpus; directives are ignored
        max_lines: How many record lines to check

    Returns:
        The best descriptor; ties go to the earlier entry of DESCRIPTORS

    Raises:
        NoFormatMatched: nothing fits at least half of the checked lines
    """
    if max_lines <= 0:
        raise ValueError("max_lines must be positive")
    checked = [line for line in sample_lines if not is_directive(line)][:max_lines]
    if not checked:
        raise NoFormatMatched("no record lines to check")

    best, best_hits = None, -1
    for descriptor in DESCRIPTORS:
        hits = sum(1 for line in checked if matches(line, descriptor))
        logger.debug(f"{descriptor.name}: {hits}/{len(checked)} lines match")
        if hits > best_hits:
            best, best_hits = descriptor, hits

    if best_hits * 2 < len(checked):
        raise NoFormatMatched(f"best candidate {best.name} matched {best_hits} of {len(checked)} lines")
    return best


def extract_field(record: LogRecord, field: str) -> str:
    """Return a field value verbatim; the missing marker is returned as-is."""
    try:
        return record.values[field]
    except KeyError:
        raise UnknownField(f"{field!r} is not a field of {record.variant}") from None


def extract_role(record: LogRecord, role: str) -> str:
    """
    Return the value playing a role ("page", "status", ...) in the record's dialect.

    Roles a dialect does not carry, and pieces missing from a compound field,
    come back as the missing marker.
    """
    descriptor = record.descriptor
    part = descriptor.roles.get(role)
    if part is None:
        return descriptor.missing_marker
    value = record.values[part.field]
    if part.separator is None or value == descriptor.missing_marker:
        return value
    pieces = value.split(part.separator)
    if part.index >= len(pieces) or not pieces[part.index]:
        return descriptor.missing_marker
    return pieces[part.index]


def _date_value(record: LogRecord) -> str:
    descriptor = record.descriptor
    value = record.values.get(descriptor.date_field, descriptor.missing_marker)
    if value == descriptor.missing_marker or not value:
        raise MissingField(f"{descriptor.date_field} is missing (line {record.line_number})")
    # Tolerate timestamps handed over with their brackets
    return value.strip("[]")


def _parse_timestamp(record: LogRecord) -> Tuple[date, Optional[int]]:
    """Calendar date and hour of a record, as written in the log (no zone shifting)."""
    descriptor = record.descriptor
    value = _date_value(record)
    style = descriptor.timestamp_style
    try:
        if style is TimestampStyle.SPLIT_ISO:
            return date.fromisoformat(value), None
        if style is TimestampStyle.CLF:
            match = re.match(r"(\d{1,2})/([A-Z][a-z]{2})/(\d{4}):(\d{2})", value)
            if match:
                day, month, year, hour = match.groups()
                return date(int(year), _MONTHS[month], int(day)), int(hour)
        elif style is TimestampStyle.CTIME:
            match = re.match(r"[A-Z][a-z]{2} ([A-Z][a-z]{2}) +(\d{1,2}) (\d{2}):\d{2}:\d{2}(?:\.\d+)? (\d{4})", value)
            if match:
                month, day, hour, year = match.groups()
                return date(int(year), _MONTHS[month], int(day)), int(hour)
        elif style is TimestampStyle.EPOCH:
            moment = datetime.fromtimestamp(float(value), tz=timezone.utc)
            return moment.date(), moment.hour
    except (KeyError, ValueError, OverflowError, OSError):
        pass
    raise MissingField(f"unreadable {descriptor.date_field} {value!r} (line {record.line_number})")


def derive_day(record: LogRecord) -> str:
    """Day key of a record, as YYYY-MM-DD."""
    return _parse_timestamp(record)[0].isoformat()


def derive_hour(record: LogRecord) -> str:
    """Hour key of a record, "00" to "23"."""
    descriptor = record.descriptor
    if descriptor.timestamp_style is TimestampStyle.SPLIT_ISO:
        value = record.values.get(descriptor.time_field, descriptor.missing_marker)
        match = re.match(r"(\d{2}):\d{2}", value)
        if value == descriptor.missing_marker or match is None or int(match.group(1)) > 23:
            raise MissingField(f"{descriptor.time_field} is missing (line {record.line_number})")
        return match.group(1)
    hour = _parse_timestamp(record)[1]
    return f"{hour:02d}"
