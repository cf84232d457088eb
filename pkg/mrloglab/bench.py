"""
Synthetic corpora and the throughput benchmark.

The generator writes deterministic log files in any supported dialect and
keeps exact per-column tallies in a manifest, so analysis outputs can be
checked against it. The benchmark times analysis jobs over growing corpora
and reports seconds per 100 MB: running_time * (100 / size_mb).
"""

import calendar
import csv
import json
import logging
import os
import random
import statistics
import time
from collections import Counter
from datetime import datetime, timedelta
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from mrloglab.blockstore import Cluster, ClusterSpec, ingest_file
from mrloglab.common import ZeroSize
from mrloglab.engine import cache_dataset, run_chain, run_job
from mrloglab.engine.common import PARSE_INVOCATIONS
from mrloglab.logformat import (
    APACHE_COMBINED, APACHE_COMMON, APACHE_ERROR, APACHE_ERROR_24, IIS_FULL, IIS_SAMPLE, SQUID,
    LogFormatDescriptor,
)
from mrloglab import analyses

logger = logging.getLogger(__name__)

MB = 1024 * 1024
CSV_HEADER = ("job", "size_mb", "iteration", "running_time_s", "normalized_s_per_100mb", "workers", "cache")
GREP_WORD = "error"
ERROR_RATE = 0.03
START_DAY = datetime(2013, 4, 15)
DAY_SPAN = 7
# Log dialects always use English names, whatever the locale
MONTH_ABBR = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
DAY_ABBR = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

# Requests per hour of day, loosely shaped like a campus web server
HOUR_WEIGHTS = (2, 1, 1, 1, 1, 1, 2, 4, 8, 10, 11, 11, 9, 10, 11, 11, 10, 8, 6, 5, 5, 4, 3, 2)
METHODS = (("GET", 85), ("POST", 12), ("HEAD", 3))
OK_STATUSES = (("200", 90), ("304", 8), ("302", 2))
ERROR_STATUSES = (("404", 60), ("500", 25), ("403", 15))
AGENTS = (
    "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)",
    "Mozilla/5.0 (Windows NT 6.1; WOW64) AppleWebKit/537.31 (KHTML, like Gecko) Chrome/26.0.1410.64 Safari/537.31",
    "Mozilla/5.0 (Windows NT 6.1; rv:20.0) Gecko/20100101 Firefox/20.0",
    "Mozilla/4.0 (compatible; MSIE 8.0; Windows NT 5.1; Trident/4.0)",
    "Mozilla/5.0 (iPhone; CPU iPhone OS 6_1_3 like Mac OS X) AppleWebKit/536.26 (KHTML, like Gecko) Mobile/10B329",
    "Opera/9.80 (Windows NT 6.1) Presto/2.12.388 Version/12.15",
)
SECTIONS = ("ilahiyat", "muhendislik", "fen", "egitim", "tip", "iibf")
DOCUMENTS = ("index.htm", "duyurular.htm", "FakulteDergisi.htm", "iletisim.htm", "personel.htm",
             "style.css", "logo.png", "haberler.aspx")


class GenerationManifest(NamedTuple):
    """Exact bookkeeping of a generated corpus."""
    seed: int
    format: str
    target_mb: float
    line_count: int
    byte_count: int
    counts: Dict[str, Dict[str, int]]  # column -> value -> lines

    def to_json(self) -> str:
        return json.dumps(self._asdict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GenerationManifest":
        return cls(**json.loads(text))


class LogGenerator:
    """
    Deterministic log line generator for one dialect.

    Every line is built from a handful of chosen column values, which are
    tallied as they are chosen: day, hour, ip, page, method, browser, status.
    """

    def __init__(self, descriptor: LogFormatDescriptor, seed: int, error_rate: float = ERROR_RATE):
        self.descriptor = descriptor
        self.rng = random.Random(seed)
        self.error_rate = error_rate
        self.counts: Dict[str, Counter] = {}
        self.line_count = 0
        self.ips = [f"{self.rng.choice((10, 66, 78, 193))}.{self.rng.randrange(256)}."
                    f"{self.rng.randrange(256)}.{self.rng.randrange(1, 255)}" for _ in range(200)]
        self.pages = [f"/{section}/Tr/{document}" for section in SECTIONS for document in DOCUMENTS]

    def _weighted(self, choices) -> str:
        values, weights = zip(*choices)
        return self.rng.choices(values, weights=weights)[0]

    def _tally(self, **columns: str):
        for column, value in columns.items():
            self.counts.setdefault(column, Counter())[value] += 1

    def _moment(self) -> datetime:
        day = START_DAY + timedelta(days=self.rng.randrange(DAY_SPAN))
        hour = self.rng.choices(range(24), weights=HOUR_WEIGHTS)[0]
        return day.replace(hour=hour, minute=self.rng.randrange(60), second=self.rng.randrange(60))

    def _status(self) -> str:
        if self.rng.random() < self.error_rate:
            return self._weighted(ERROR_STATUSES)
        return self._weighted(OK_STATUSES)

    def line(self) -> str:
        """Next line, without its newline."""
        moment = self._moment()
        ip = self.rng.choice(self.ips)
        page = self.rng.choice(self.pages)
        method = self._weighted(METHODS)
        agent = self.rng.choice(AGENTS)
        status = self._status()
        size = str(self.rng.randrange(200, 60000))
        day, hour = moment.strftime("%Y-%m-%d"), moment.strftime("%H")
        builder = _BUILDERS[self.descriptor.name]
        line, columns = builder(self, moment, ip, page, method, agent, status, size)
        columns.setdefault("day", day)
        columns.setdefault("hour", hour)
        self._tally(**columns)
        self.line_count += 1
        return line

    def lines(self, count: int) -> List[str]:
        return [self.line() for _ in range(count)]

    def manifest(self, target_mb: float, byte_count: int, seed: int) -> GenerationManifest:
        counts = {column: dict(sorted(values.items())) for column, values in sorted(self.counts.items())}
        return GenerationManifest(seed, self.descriptor.name, target_mb, self.line_count, byte_count, counts)


def _iis_full(gen, moment, ip, page, method, agent, status, size):
    agent = agent.replace(" ", "+")
    line = " ".join((
        moment.strftime("%Y-%m-%d"), moment.strftime("%H:%M:%S"), ip, "-", "W3SVC1", "WEB01",
        "10.1.1.5", "80", method, page, "-", status, "0", size, str(gen.rng.randrange(200, 900)),
        str(gen.rng.randrange(1, 2000)), "HTTP/1.1", "www.firat.edu.tr", agent, "-", "-", "0",
    ))
    return line, {"ip": ip, "page": page, "method": method, "browser": agent, "status": status}


def _iis_sample(gen, moment, ip, page, method, agent, status, size):
    agent = agent.replace(" ", "+")
    line = " ".join((
        moment.strftime("%Y-%m-%d"), moment.strftime("%H:%M:%S"), "W3SVC1", "10.1.1.5", method, page,
        "-", "80", "-", ip, agent, "-", "www.firat.edu.tr",
    ))
    # This layout carries no status column
    return line, {"ip": ip, "page": page, "method": method, "browser": agent, "status": "-"}


def _clf_time(moment: datetime) -> str:
    return f"{moment.day:02d}/{MONTH_ABBR[moment.month - 1]}/{moment.year}:{moment.strftime('%H:%M:%S')} +0300"


def _apache_common(gen, moment, ip, page, method, agent, status, size):
    line = f'{ip} - - [{_clf_time(moment)}] "{method} {page} HTTP/1.1" {status} {size}'
    return line, {"ip": ip, "page": page, "method": method, "browser": "-", "status": status}


def _apache_combined(gen, moment, ip, page, method, agent, status, size):
    line = f'{ip} - - [{_clf_time(moment)}] "{method} {page} HTTP/1.1" {status} {size} "-" "{agent}"'
    return line, {"ip": ip, "page": page, "method": method, "browser": agent, "status": status}


def _apache_error(gen, moment, ip, page, method, agent, status, size):
    stamp = f"{DAY_ABBR[moment.weekday()]} {MONTH_ABBR[moment.month - 1]} {moment.day:02d} " \
            f"{moment.strftime('%H:%M:%S')} {moment.year}"
    if status.startswith(("4", "5")):
        severity, message = "error", f"File does not exist: /var/www{page}"
    else:
        severity, message = "notice", "caught SIGTERM, shutting down"
    if gen.rng.random() < 0.5:
        line = f"[{stamp}] [{severity}] [client {ip}] {message}"
    else:
        line = f"[{stamp}] [{severity}] {message}"
        ip = "-"
    return line, {"ip": ip, "page": "-", "method": "-", "browser": "-", "status": severity}


def _apache_error_24(gen, moment, ip, page, method, agent, status, size):
    stamp = f"{DAY_ABBR[moment.weekday()]} {MONTH_ABBR[moment.month - 1]} {moment.day:02d} " \
            f"{moment.strftime('%H:%M:%S')}.{gen.rng.randrange(10 ** 6):06d} {moment.year}"
    process = f"pid {gen.rng.randrange(1000, 30000)}:tid {gen.rng.randrange(10 ** 9, 10 ** 10)}"
    if status.startswith(("4", "5")):
        severity, message = "core:error", f"AH00128: File does not exist: /var/www{page}"
    else:
        severity, message = "mpm_event:notice", "AH00492: caught SIGWINCH, shutting down gracefully"
    if gen.rng.random() < 0.5:
        line = f"[{stamp}] [{severity}] [{process}] [client {ip}:{gen.rng.randrange(1024, 65536)}] {message}"
    else:
        line = f"[{stamp}] [{severity}] [{process}] {message}"
        ip = "-"
    return line, {"ip": ip, "page": "-", "method": "-", "browser": "-", "status": severity.partition(":")[2]}


def _squid(gen, moment, ip, page, method, agent, status, size):
    epoch = calendar.timegm(moment.timetuple())
    result = "TCP_MISS" if status != "304" else "TCP_IMS_HIT"
    url = f"http://www.firat.edu.tr{page}"
    line = f"{epoch}.{gen.rng.randrange(1000):03d} {gen.rng.randrange(1, 5000)} {ip} {result}/{status} " \
           f"{size} {method} {url} - DIRECT/193.255.0.1 text/html"
    return line, {"ip": ip, "page": url, "method": method, "browser": "-", "status": status}


_BUILDERS: Dict[str, Callable] = {
    IIS_FULL.name: _iis_full,
    IIS_SAMPLE.name: _iis_sample,
    APACHE_COMMON.name: _apache_common,
    APACHE_COMBINED.name: _apache_combined,
    APACHE_ERROR.name: _apache_error,
    APACHE_ERROR_24.name: _apache_error_24,
    SQUID.name: _squid,
}


def manifest_path(path: str) -> str:
    return path + ".manifest.json"


def generate_log(target_mb: float, seed: int, descriptor: LogFormatDescriptor, path: str) -> GenerationManifest:
    """
    Write lines to `path` until the file holds at least target_mb megabytes.

    The same seed, dialect and size always give the same bytes. The manifest
    is written next to the file as <path>.manifest.json.
    """
    if target_mb <= 0:
        raise ValueError("target_mb must be positive")
    target_bytes = int(target_mb * MB)
    generator = LogGenerator(descriptor, seed)
    written = 0
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        while written < target_bytes:
            data = (generator.line() + "\n").encode("utf-8")
            f.write(data)
            written += len(data)
    manifest = generator.manifest(target_mb, written, seed)
    with open(manifest_path(path), "w") as f:
        f.write(manifest.to_json())
    logger.info(f"Generated {path}: {manifest.line_count} lines, {written} bytes")
    return manifest


def load_or_generate(target_mb: float, seed: int, descriptor: LogFormatDescriptor, path: str) -> GenerationManifest:
    """Reuse a corpus whose manifest records the same seed, size and dialect."""
    try:
        with open(manifest_path(path)) as f:
            manifest = GenerationManifest.from_json(f.read())
        if (manifest.seed, manifest.format, manifest.target_mb) == (seed, descriptor.name, target_mb) \
                and os.path.getsize(path) == manifest.byte_count:
            return manifest
    except (OSError, ValueError, TypeError):
        pass
    return generate_log(target_mb, seed, descriptor, path)


def normalize_time(running_time: float, size_mb: float) -> float:
    """Seconds per 100 MB: running_time * (100 / size_mb)."""
    if size_mb <= 0:
        raise ZeroSize(f"size must be positive, got {size_mb}")
    return running_time * (100 / size_mb)


class BenchRow(NamedTuple):
    job: str
    size_mb: float
    iteration: int
    running_time_s: float
    normalized_s_per_100mb: float
    workers: int
    cache: bool
    parse_invocations: int = 0

    def csv_fields(self) -> Tuple:
        return (self.job, self.size_mb, self.iteration, repr(self.running_time_s),
                repr(self.normalized_s_per_100mb), self.workers, str(self.cache).lower())


class BenchReport(NamedTuple):
    rows: List[BenchRow]

    def normalized_series(self, iteration: int = 1) -> List[Tuple[float, float]]:
        """(size, seconds per 100 MB) points of one iteration, for plotting."""
        return [(row.size_mb, row.normalized_s_per_100mb) for row in self.rows if row.iteration == iteration]

    def is_decreasing(self, iteration: int = 1) -> bool:
        """Whether time per 100 MB falls as the input grows; reported, never asserted."""
        values = [value for _, value in self.normalized_series(iteration)]
        return all(later <= earlier for earlier, later in zip(values, values[1:]))


def read_report(path: str) -> BenchReport:
    rows = []
    with open(path, newline="") as f:
        for entry in csv.DictReader(f):
            rows.append(BenchRow(
                entry["job"], float(entry["size_mb"]), int(entry["iteration"]),
                float(entry["running_time_s"]), float(entry["normalized_s_per_100mb"]),
                int(entry["workers"]), entry["cache"] == "true",
            ))
    return BenchReport(rows)


BENCH_JOBS = ("frequency", "errors", "grep", "wordcount", "busiest-day-pages", "per-column")


def _job_runner(job_name: str, descriptor: LogFormatDescriptor) -> Callable:
    """A callable running the named job over (input, cluster, workers), returning parse invocations."""
    def single(job):
        def run(source, cluster, workers):
            return run_job(job, source, cluster, workers).counter(PARSE_INVOCATIONS)
        return run

    if job_name == "frequency":
        return single(analyses.field_frequency_job(descriptor))
    if job_name == "errors":
        return single(analyses.error_detection_job(descriptor=descriptor))
    if job_name == "grep":
        return single(analyses.word_search_job(GREP_WORD))
    if job_name == "wordcount":
        return single(analyses.wordcount_job())
    if job_name == "busiest-day-pages":
        chain = analyses.busiest_day_pages_chain(descriptor)

        def run_busiest(source, cluster, workers):
            result = run_chain(chain, cluster, workers, dataset=source)
            return sum(job.counter(PARSE_INVOCATIONS) for job in result.results)
        return run_busiest
    if job_name == "per-column":
        jobs = analyses.per_column_jobs(descriptor)

        def run_columns(source, cluster, workers):
            return sum(run_job(job, source, cluster, workers).counter(PARSE_INVOCATIONS) for job in jobs)
        return run_columns
    raise ValueError(f"unknown bench job {job_name!r} (known: {', '.join(BENCH_JOBS)})")


def _timed(run: Callable, repeats: int, clock: Callable[[], float]) -> Tuple[float, int]:
    """Median wall time over `repeats` runs, and the parse count of the last run."""
    times = []
    parses = 0
    for _ in range(repeats):
        started = clock()
        parses = run()
        times.append(clock() - started)
    return statistics.median(times), parses


def run_bench(sizes: Sequence[float], job_name: str, seed: int = 1, worker_count: int = 1,
              cache_mode: bool = False, out_csv: Optional[str] = None, work_dir: Optional[str] = None,
              repeats: int = 3, cluster_spec: ClusterSpec = ClusterSpec(),
              descriptor: LogFormatDescriptor = IIS_FULL,
              clock: Callable[[], float] = time.perf_counter) -> BenchReport:
    """
    Time a job over corpora of increasing size.

    Args:
        sizes: Corpus sizes in MB, ascending
        job_name: One of BENCH_JOBS
        seed: Generator seed
        worker_count: Map workers per job
        cache_mode: Also run a second iteration over an in-memory cache of the corpus
        out_csv: CSV path; rows are flushed as they complete
        work_dir: Where corpora are generated and reused
        repeats: Runs per point; the median is reported
        cluster_spec: Shape of the simulated cluster
        descriptor: Dialect of the generated corpora

    Returns:
        One row per (size, iteration)
    """
    if not sizes:
        raise ValueError("at least one size is required")
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    run = _job_runner(job_name, descriptor)
    work_dir = work_dir or os.path.join(os.getcwd(), ".mrloglab-bench")
    os.makedirs(work_dir, exist_ok=True)

    rows: List[BenchRow] = []
    out = open(out_csv, "w", newline="") if out_csv else None
    try:
        writer = csv.writer(out) if out else None
        if writer:
            writer.writerow(CSV_HEADER)
            out.flush()

        def record(row: BenchRow):
            rows.append(row)
            logger.info(f"{row.job} {row.size_mb} MB iteration {row.iteration}: "
                        f"{row.running_time_s:.3f}s ({row.normalized_s_per_100mb:.3f}s per 100 MB)")
            if writer:
                writer.writerow(row.csv_fields())
                out.flush()

        for size_mb in sizes:
            path = os.path.join(work_dir, f"{descriptor.name}-{size_mb}mb-seed{seed}.log")
            load_or_generate(size_mb, seed, descriptor, path)
            cluster = Cluster(cluster_spec)
            dataset = ingest_file(path, cluster).with_format(descriptor)

            if cache_mode:
                # First iteration reads and caches, later ones reuse the cache
                holder = {}

                def first():
                    holder["cache"] = cache_dataset(dataset, cluster, descriptor)
                    return holder["cache"].parse_count + run(holder["cache"], cluster, worker_count)
                elapsed, parses = _timed(first, repeats, clock)
                record(BenchRow(job_name, size_mb, 1, elapsed, normalize_time(elapsed, size_mb),
                                worker_count, True, parses))
                cached = holder["cache"]
                elapsed, parses = _timed(lambda: run(cached, cluster, worker_count), repeats, clock)
                record(BenchRow(job_name, size_mb, 2, elapsed, normalize_time(elapsed, size_mb),
                                worker_count, True, parses))
            else:
                elapsed, parses = _timed(lambda: run(dataset, cluster, worker_count), repeats, clock)
                record(BenchRow(job_name, size_mb, 1, elapsed, normalize_time(elapsed, size_mb),
                                worker_count, False, parses))
    finally:
        if out:
            out.close()

    report = BenchReport(rows)
    logger.info(f"Time per 100 MB decreasing with size: {report.is_decreasing()}")
    return report
