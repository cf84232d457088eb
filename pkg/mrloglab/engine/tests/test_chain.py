"""
Test module for chained jobs.
"""

import io
import os
import random
import tempfile
import unittest
from collections import Counter

from mrloglab import analyses
from mrloglab.bench import LogGenerator
from mrloglab.blockstore import Cluster, ClusterSpec, ingest
from mrloglab.common import BindingFailed, InvalidJobSpec, JobFailed
from mrloglab.engine import Binding, ChainSpec, FaultInjector, JobSpec, PriorOutput, TextInput, run_chain, run_job
from mrloglab.engine.chain import EXTRACTORS, validate_chain
from mrloglab.logformat import DESCRIPTORS, IIS_SAMPLE, extract_role, iter_records

KB = 1024
DAY_A = "2013-04-15"
DAY_B = "2013-04-16"


def iis_line(day: str, page: str, time: str = "10:00:00") -> str:
    return f"{day} {time} W3SVC1 10.1.1.5 GET {page} - 80 - 66.249.78.66 Mozilla/5.0 - www.firat.edu.tr"


def ingest_lines(lines, block_size: int = KB):
    cluster = Cluster(ClusterSpec(4, 2, block_size))
    text = "\n".join(lines) + "\n" if lines else ""
    return cluster, ingest(io.BytesIO(text.encode()), cluster, "chain")


class TestBusiestDayChain(unittest.TestCase):
    """Test cases for the three-job busiest-day query."""

    def setUp(self):
        self.fixture = [
            iis_line(DAY_A, "/p1"), iis_line(DAY_B, "/p3"), iis_line(DAY_A, "/p1"),
            iis_line(DAY_B, "/p4"), iis_line(DAY_A, "/p2"),
        ]

    def test_fixture(self):
        cluster, dataset = ingest_lines(self.fixture)
        result = run_chain(analyses.busiest_day_pages_chain(), cluster, 2, dataset=dataset)
        day_totals, by_access, pages = result.results
        self.assertEqual(day_totals.outputs["part-00000"], [(DAY_A, "3"), (DAY_B, "2")])
        self.assertEqual(by_access.outputs["part-00000"], [("2", DAY_B), ("3", DAY_A)])
        self.assertEqual(result.parameters, {analyses.MAX_DAY: DAY_A})
        self.assertEqual(pages.outputs["part-00000"], [("/p1", "2"), ("/p2", "1")])
        self.assertIs(result.final, pages)

    def test_tie_goes_to_greatest_day(self):
        lines = self.fixture[:-1]
        cluster, dataset = ingest_lines(lines)
        result = run_chain(analyses.busiest_day_pages_chain(), cluster, dataset=dataset)
        self.assertEqual(result.parameters[analyses.MAX_DAY], DAY_B)
        self.assertEqual(result.final.outputs["part-00000"], [("/p3", "1"), ("/p4", "1")])

    def test_single_day(self):
        lines = [iis_line(DAY_A, page) for page in ("/a", "/b", "/a", "/c", "/a")]
        cluster, dataset = ingest_lines(lines)
        result = run_chain(analyses.busiest_day_pages_chain(), cluster, dataset=dataset)
        frequency = run_job(analyses.field_frequency_job(), dataset, cluster)
        self.assertEqual(result.final.outputs["part-00000"], frequency.outputs["page_part-00000"])

    def test_numeric_order_of_counts(self):
        lines = [iis_line(DAY_A, "/x")] * 9 + [iis_line(DAY_B, "/y")] * 10
        cluster, dataset = ingest_lines(lines)
        result = run_chain(analyses.busiest_day_pages_chain(), cluster, dataset=dataset)
        self.assertEqual(result.parameters[analyses.MAX_DAY], DAY_B)
        self.assertEqual(result.final.outputs["part-00000"], [("/y", "10")])

    def test_undated_lines_skipped(self):
        lines = self.fixture + [iis_line("-", "/p9")] * 4
        cluster, dataset = ingest_lines(lines)
        result = run_chain(analyses.busiest_day_pages_chain(IIS_SAMPLE), cluster, dataset=dataset)
        self.assertEqual(result.results[0].counter("undated_lines"), 4)
        self.assertEqual(result.final.outputs["part-00000"], [("/p1", "2"), ("/p2", "1")])

    def test_empty_input(self):
        cluster, dataset = ingest_lines([])
        with self.assertRaises(BindingFailed):
            run_chain(analyses.busiest_day_pages_chain(), cluster, dataset=dataset)

    def test_output_directories(self):
        with tempfile.TemporaryDirectory() as out:
            cluster, dataset = ingest_lines(self.fixture)
            result = run_chain(analyses.busiest_day_pages_chain(), cluster, dataset=dataset, output_dir=out)
            for job in ("day-totals", "days-by-access", "busiest-day-pages"):
                self.assertTrue(os.path.isfile(os.path.join(out, job, "_SUCCESS")))
            with open(os.path.join(out, "busiest-day-pages", "part-00000")) as f:
                self.assertEqual(f.read(), "/p1\t2\n/p2\t1\n")
            self.assertEqual(result.final.output_dir, os.path.join(out, "busiest-day-pages"))

    def test_node_failure_during_chain(self):
        lines = LogGenerator(IIS_SAMPLE, seed=4).lines(400)
        cluster, dataset = ingest_lines(lines, 4 * KB)
        expected = run_chain(analyses.busiest_day_pages_chain(), cluster, 2, dataset=dataset)
        cluster, dataset = ingest_lines(lines, 4 * KB)
        injector = FaultInjector(fail_during={0: [1]})
        result = run_chain(analyses.busiest_day_pages_chain(), cluster, 2, dataset=dataset, fault_injector=injector)
        self.assertEqual(result.final.outputs, expected.final.outputs)
        self.assertEqual(injector.fired, [(0, 1)])

    def test_matches_direct_scan(self):
        rng = random.Random(2024)
        for trial in range(100):
            descriptor = rng.choice(DESCRIPTORS)
            lines = LogGenerator(descriptor, seed=rng.randrange(10 ** 6)).lines(rng.randrange(1, 501))
            with self.subTest(trial=trial, descriptor=descriptor.name, lines=len(lines)):
                cluster, dataset = ingest_lines(lines, rng.choice((KB, 4 * KB, 64 * KB)))
                result = run_chain(analyses.busiest_day_pages_chain(descriptor), cluster, 2, dataset=dataset)
                actual = [(page, int(count)) for page, count in result.final.outputs.get("part-00000", [])]
                expected = analyses.sql_busiest_day_pages(iter_records(lines, descriptor))
                self.assertEqual(actual, expected)


class TestChainMechanics(unittest.TestCase):
    """Test cases for bindings, prior outputs and validation."""

    def test_single_job_chain(self):
        source = TextInput("words", ("a b", "b c"))
        job = analyses.wordcount_job()
        result = run_chain(ChainSpec((job,)), dataset=source)
        self.assertEqual(result.final.outputs, run_job(job, source).outputs)
        self.assertEqual(result.parameters, {})

    def test_extractors(self):
        pairs = [("k1", "v1"), ("k2", "v2")]
        self.assertEqual(EXTRACTORS["LAST_LINE_VALUE"](pairs), "v2")
        self.assertEqual(EXTRACTORS["LAST_LINE_KEY"](pairs), "k2")
        self.assertEqual(EXTRACTORS["FIRST_LINE_VALUE"](pairs), "v1")

    def test_binding_reaches_config(self):
        source = TextInput("words", ("x y", "y z z"))
        jobs = (
            analyses.wordcount_job(),
            JobSpec("search", "word-search", "sum", input=TextInput("text", ("z here", "none", "z again"))),
        )
        bindings = (Binding(0, "LAST_LINE_KEY", 1, "needle"),)
        result = run_chain(ChainSpec(jobs, bindings), dataset=source)
        self.assertEqual(result.parameters, {"needle": "z"})
        self.assertEqual(result.final.outputs["part-00000"], [("z", "2")])

    def test_prior_output_input(self):
        jobs = (
            analyses.wordcount_job(),
            JobSpec("swap", "swap-columns", input=PriorOutput(0)),
        )
        result = run_chain(ChainSpec(jobs), dataset=TextInput("words", ("b a b",)))
        self.assertEqual(result.final.outputs["part-00000"], [("1", "a"), ("2", "b")])

    def test_validation(self):
        job = analyses.wordcount_job()
        invalid = (
            ChainSpec(()),
            ChainSpec((job, job), (Binding(1, "LAST_LINE_VALUE", 0, "p"),)),
            ChainSpec((job, job), (Binding(0, "SECOND_LINE", 1, "p"),)),
            ChainSpec((job, job), (Binding(0, "LAST_LINE_VALUE", 1, ""),)),
            ChainSpec((job, job._replace(input=PriorOutput(1)))),
        )
        for chain in invalid:
            with self.subTest(chain=chain):
                with self.assertRaises(InvalidJobSpec):
                    validate_chain(chain)

    def test_job_failure_propagates(self):
        jobs = (analyses.wordcount_job(), JobSpec("broken", "no-such-mapper", input=PriorOutput(0)))
        with self.assertRaises(JobFailed) as context:
            run_chain(ChainSpec(jobs), dataset=TextInput("words", ("a",)))
        self.assertEqual(context.exception.job_name, "broken")

    def test_page_counts_match_oracle(self):
        lines = LogGenerator(IIS_SAMPLE, seed=8).lines(300)
        records = list(iter_records(lines, IIS_SAMPLE))
        cluster, dataset = ingest_lines(lines, 2 * KB)
        result = run_chain(analyses.busiest_day_pages_chain(), cluster, 4, dataset=dataset)
        max_day = result.parameters[analyses.MAX_DAY]
        expected = Counter(extract_role(r, "page") for r in records if r.values["Date"] == max_day)
        self.assertEqual({page: int(count) for page, count in result.final.outputs["part-00000"]}, dict(expected))


if __name__ == "__main__":
    unittest.main()
