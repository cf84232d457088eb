"""
Command line front end for mrloglab.

Subcommands:

1. detect: print the dialect of a log file
2. ingest: split a log file into replicated blocks under a store root
3. analyze: run the frequency, errors or busy-hour analysis
4. query: run a chained query (busiest-day-pages)
5. grep: count lines containing a word
6. bench: time a job over generated corpora and write a CSV report
"""

import argparse
import io
import os
import sys
import time
from typing import List, Optional, Sequence

from mrloglab import analyses, bench
from mrloglab.blockstore import Cluster, ClusterSpec, DatasetRef, dataset_id_for, ingest, ingest_file
from mrloglab.common import (
    BindingFailed, BlockUnavailable, EmptyInput, JobFailed, MrLogLabError, NoFormatMatched,
    find_log_files, parse_size, read_sample_lines, resolve_store_root, set_verbose,
)
from mrloglab.engine import FaultInjector, cache_dataset, run_chain, run_job
from mrloglab.engine.common import (
    CORRUPT_LINES_SKIPPED, DIRECTIVE_LINES_SKIPPED, LINES_READ, MAP_TASKS_RESCHEDULED, JobResult,
)
from mrloglab.logformat import LogFormatDescriptor, detect_format, get_descriptor

EXIT_OK = 0
EXIT_JOB_FAILED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_EMPTY = 4
EXIT_OTHER = 5

DETECT_SAMPLE = 200


class UsageError(Exception):
    """Bad flag combination not caught by argparse."""


def _add_cluster_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--nodes", type=int, default=4, help="Number of simulated nodes (default 4)")
    parser.add_argument("--replication", type=int, default=2, help="Replicas per block (default 2)")
    parser.add_argument("--block-size", type=parse_size, default="64M", help="Block size, K/M suffixes allowed (default 64M)")
    parser.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1), help="Parallel map workers (default: CPU count)")
    parser.add_argument("--store", help="Store root for persistent blocks (default: $MRLOGLAB_STORE, else in memory)")


def _add_input_flags(parser: argparse.ArgumentParser, cache: bool = True):
    parser.add_argument("--input", required=True, help="Log file, or directory of .log/.txt files")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--format", help="Log format name or id; skips detection")
    if cache:
        parser.add_argument("--cache", action="store_true", help="Parse once into memory before running")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrloglab", description="MapReduce log analysis on a simulated cluster",
                                     epilog=f"Analyses: {', '.join(analyses.ANALYSES)}")
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="Enable verbose output")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    detect = subparsers.add_parser("detect", parents=[verbose], help="Print the log format of a file")
    detect.add_argument("--input", required=True, help="Log file to inspect")

    ingest_parser = subparsers.add_parser("ingest", parents=[verbose], help="Store a log file as replicated blocks")
    ingest_parser.add_argument("--input", required=True, help="Log file to ingest")
    ingest_parser.add_argument("--dataset-id", help="Dataset name in the store (default: file name)")
    _add_cluster_flags(ingest_parser)

    analyze = subparsers.add_parser("analyze", parents=[verbose], help="Run a single-job analysis")
    analyze.add_argument("analysis", choices=analyses.SINGLE_JOB_ANALYSES)
    _add_input_flags(analyze)
    _add_cluster_flags(analyze)
    analyze.add_argument("--status-floor", type=int, default=analyses.DEFAULT_STATUS_FLOOR,
                         help="Lowest HTTP status counted by the errors analysis (default 400)")
    analyze.add_argument("--top", type=int, default=0, help="Print the N largest entries of every output file")
    analyze.add_argument("--fail-node", type=int, action="append", default=[], help="Fail node K during the first map task")

    query = subparsers.add_parser("query", parents=[verbose], help="Run a chained query")
    query.add_argument("query", choices=analyses.QUERIES)
    _add_input_flags(query)
    _add_cluster_flags(query)
    query.add_argument("--fail-node", type=int, action="append", default=[], help="Fail node K during the first map task")
    query.add_argument("--verify", action="store_true", help="Check the answer against a direct scan")

    grep = subparsers.add_parser("grep", parents=[verbose], help="Count lines containing a word")
    grep.add_argument("--word", required=True, help="Word to search for")
    grep.add_argument("--input", required=True, help="Log file, or directory of .log/.txt files")
    grep.add_argument("--out", required=True, help="Output directory")
    grep.add_argument("--cache", action="store_true", help="Cache the dataset and search it twice")
    _add_cluster_flags(grep)

    bench_parser = subparsers.add_parser("bench", parents=[verbose], help="Time a job over generated corpora")
    bench_parser.add_argument("--sizes", required=True, help="Comma-separated corpus sizes in MB, ascending")
    bench_parser.add_argument("--job", required=True, choices=bench.BENCH_JOBS)
    bench_parser.add_argument("--out", required=True, help="CSV report path")
    bench_parser.add_argument("--seed", type=int, default=1)
    bench_parser.add_argument("--repeats", type=int, default=3, help="Runs per point; the median is reported")
    bench_parser.add_argument("--cache", action="store_true", help="Add a second iteration over a cached dataset")
    bench_parser.add_argument("--format", default="iis-w3c", help="Dialect of generated corpora")
    bench_parser.add_argument("--work-dir", help="Where corpora are generated and reused")
    _add_cluster_flags(bench_parser)
    return parser


def _cluster(args) -> Cluster:
    spec = ClusterSpec(args.nodes, args.replication, args.block_size)
    return Cluster(spec, resolve_store_root(args.store))


def _input_files(path: str) -> List[str]:
    files = find_log_files(path)
    if not files:
        raise FileNotFoundError(f"no log files at {path}")
    return files


def _ingest_input(path: str, cluster: Cluster) -> DatasetRef:
    """Ingest one file, or several files concatenated in name order."""
    files = _input_files(path)
    if len(files) == 1:
        return ingest_file(files[0], cluster)
    data = bytearray()
    for file_path in files:
        with open(file_path, "rb") as f:
            content = f.read()
        data += content
        if content and not content.endswith(b"\n"):
            data += b"\n"
    return ingest(io.BytesIO(bytes(data)), cluster, dataset_id_for(path))


def _format(name: str) -> LogFormatDescriptor:
    try:
        return get_descriptor(name)
    except ValueError as e:
        raise UsageError(f"--format: {e}") from None


def _descriptor(args, path: str) -> LogFormatDescriptor:
    if getattr(args, "format", None):
        return _format(args.format)
    return detect_format(read_sample_lines(_input_files(path)[0], DETECT_SAMPLE), DETECT_SAMPLE)


def _fault_injector(args) -> Optional[FaultInjector]:
    nodes = getattr(args, "fail_node", [])
    if not nodes:
        return None
    for node in nodes:
        if not 0 <= node < args.nodes:
            raise UsageError(f"--fail-node {node}: node ids run from 0 to {args.nodes - 1}")
    return FaultInjector(fail_during={0: nodes})


def _print_summary(result: JobResult, started: float):
    print(f"{result.job_name}: {result.counter(LINES_READ)} lines read, "
          f"{result.counter(CORRUPT_LINES_SKIPPED)} corrupt skipped, "
          f"{result.counter(DIRECTIVE_LINES_SKIPPED)} directives skipped, "
          f"{result.counter(MAP_TASKS_RESCHEDULED)} map tasks rescheduled")
    if result.output_dir:
        for file_name in result.outputs:
            print(f"  {os.path.join(result.output_dir, file_name)}")
    print(f"Wall time: {time.perf_counter() - started:.3f}s")


def _print_live_nodes(cluster: Cluster):
    live = [str(node.node_id) for node in cluster.nodes if node.alive]
    print(f"Live nodes: {', '.join(live) or 'none'} of {cluster.spec.node_count}")


def _cmd_detect(args) -> int:
    descriptor = _descriptor(args, args.input)
    print(descriptor.format_id.value)
    if args.verbose:
        print(f"variant: {descriptor}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    store = resolve_store_root(args.store)
    if store is None:
        raise UsageError("ingest needs --store or MRLOGLAB_STORE")
    cluster = Cluster(ClusterSpec(args.nodes, args.replication, args.block_size), store)
    dataset = ingest_file(args.input, cluster, args.dataset_id)
    print(f"Ingested {dataset.dataset_id}: {dataset.total_bytes} bytes, {len(dataset.blocks)} blocks, "
          f"replication {cluster.spec.replication} over {cluster.spec.node_count} nodes")
    print(f"  {cluster.backend.manifest_path(dataset.dataset_id)}")
    return EXIT_OK


def _job_input(args, cluster: Cluster, descriptor: Optional[LogFormatDescriptor]):
    dataset = _ingest_input(args.input, cluster).with_format(descriptor)
    if args.cache:
        return cache_dataset(dataset, cluster, descriptor)
    return dataset


def _cmd_analyze(args) -> int:
    started = time.perf_counter()
    cluster = _cluster(args)
    descriptor = _descriptor(args, args.input)
    source = _job_input(args, cluster, descriptor)
    if args.analysis == "errors":
        job = analyses.error_detection_job(args.status_floor, descriptor)
    else:
        job = analyses.field_frequency_job(descriptor)
    job = job._replace(output_dir=args.out)
    result = run_job(job, source, cluster, args.workers, _fault_injector(args))
    _print_summary(result, started)
    if args.fail_node:
        _print_live_nodes(cluster)

    if args.analysis == "busy-hour":
        hour, count = analyses.busy_hour(result.outputs.get("hour_part-00000", []))
        print(f"Busy hour: {hour} ({count} requests)")
    if args.top > 0:
        for file_name, pairs in result.outputs.items():
            print(f"Top {args.top} of {file_name}:")
            for key, count in analyses.top_n(pairs, args.top):
                print(f"  {count}\t{key}")
    return EXIT_OK


def _cmd_query(args) -> int:
    started = time.perf_counter()
    cluster = _cluster(args)
    descriptor = _descriptor(args, args.input)
    source = _job_input(args, cluster, descriptor)
    chain = analyses.busiest_day_pages_chain(descriptor)
    result = run_chain(chain, cluster, args.workers, dataset=source, output_dir=args.out,
                       fault_injector=_fault_injector(args))
    for step in result.results:
        _print_summary(step, started)
    if args.fail_node:
        _print_live_nodes(cluster)
    print(f"max_day: {result.parameters[analyses.MAX_DAY]}")

    if args.verify:
        if hasattr(source, "records"):
            records = source.records
        else:
            records = cache_dataset(source, cluster, descriptor).records
        expected = analyses.sql_busiest_day_pages(records)
        actual = [(page, int(count)) for page, count in result.final.outputs.get("part-00000", [])]
        if expected != actual:
            print("Verification FAILED: chain output differs from a direct scan", file=sys.stderr)
            return EXIT_JOB_FAILED
        print("Verified against a direct scan")
    return EXIT_OK


def _cmd_grep(args) -> int:
    started = time.perf_counter()
    cluster = _cluster(args)
    dataset = _ingest_input(args.input, cluster)
    job = analyses.word_search_job(args.word)._replace(output_dir=args.out)
    if args.cache:
        cached = cache_dataset(dataset, cluster)
        first = run_job(job, cached, cluster, args.workers)
        result = run_job(job, cached, cluster, args.workers)
        print(f"Second pass over cache: {result.counter('parse_invocations')} parses "
              f"(cache parsed {cached.parse_count} lines once), outputs identical: {first.outputs == result.outputs}")
    else:
        result = run_job(job, dataset, cluster, args.workers)
    _print_summary(result, started)
    print(f"{args.word}\t{result.counter('lines_matched')}")
    return EXIT_OK


def _parse_sizes(text: str) -> List[float]:
    try:
        sizes = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--sizes: not a comma-separated list of numbers: {text!r}") from None
    if not sizes or any(size <= 0 for size in sizes):
        raise UsageError("--sizes: sizes must be positive")
    if sizes != sorted(sizes):
        raise UsageError("--sizes: sizes must be ascending")
    return sizes


def _cmd_bench(args) -> int:
    sizes = _parse_sizes(args.sizes)
    report = bench.run_bench(
        sizes, args.job, seed=args.seed, worker_count=args.workers, cache_mode=args.cache,
        out_csv=args.out, work_dir=args.work_dir, repeats=args.repeats,
        cluster_spec=ClusterSpec(args.nodes, args.replication, args.block_size),
        descriptor=_format(args.format),
    )
    for row in report.rows:
        print(f"{row.job} {row.size_mb:g} MB iteration {row.iteration}: {row.running_time_s:.3f}s, "
              f"{row.normalized_s_per_100mb:.3f}s per 100 MB")
    print(f"Time per 100 MB decreasing with size: {'yes' if report.is_decreasing() else 'no'}")
    print(f"Report written to {args.out}")
    return EXIT_OK


COMMANDS = {
    "detect": _cmd_detect,
    "ingest": _cmd_ingest,
    "analyze": _cmd_analyze,
    "query": _cmd_query,
    "grep": _cmd_grep,
    "bench": _cmd_bench,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code; expected errors never raise."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    set_verbose(args.verbose)
    try:
        return COMMANDS[args.subcommand](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (JobFailed, BlockUnavailable) as e:
        print(f"{type(e).__name__}: {e.reason}: {e}", file=sys.stderr)
        return EXIT_JOB_FAILED
    except (NoFormatMatched, FileNotFoundError, IsADirectoryError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (BindingFailed, EmptyInput) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except (MrLogLabError, ValueError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_OTHER


def main():
    """Main entry point for the script."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
