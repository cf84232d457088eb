"""
Test module for log format detection and parsing.
"""

import unittest
from collections import Counter
from datetime import datetime, timezone

from mrloglab.bench import LogGenerator
from mrloglab.common import FieldCountMismatch, MissingField, NoFormatMatched, UnknownField
from mrloglab.logformat import (
    APACHE_COMBINED, APACHE_COMMON, APACHE_ERROR, APACHE_ERROR_24, DESCRIPTORS, IIS_FULL, IIS_SAMPLE, SQUID,
    FormatId, derive_day, derive_hour, detect_format, extract_field, extract_role, format_line,
    get_descriptor, is_directive, iter_records, matches, parse_line, parse_or_none,
)

SAMPLE_LINE = (
    "2013-04-15 00:00:07 W3SVC1 10.1.1.5 GET /ilahiyat/Tr/BilimselFaaliyetler/FakulteDergisi.htm - 80 - "
    "66.249.78.66 Mozilla/5.0+(compatible;+Googlebot/2.1;+http://www.google.com/bot.html) - www.firat.edu.tr"
)
APACHE_LINE = '127.0.0.1 - - [10/Oct/2000:13:55:36 -0700] "GET /a.html HTTP/1.0" 200 2326'
COMBINED_LINE = (
    '127.0.0.1 - frank [10/Oct/2000:13:55:36 -0700] "GET /apache_pb.gif HTTP/1.0" 200 2326 '
    '"http://www.example.com/start.html" "Mozilla/4.08 [en] (Win98; I ;Nav)"'
)
ERROR_LINE = (
    "[Wed Oct 11 14:32:52 2000] [error] [client 127.0.0.1] client denied by server configuration: "
    "/export/home/live/ap/htdocs/test"
)
ERROR_24_LINE = (
    "[Wed Oct 11 14:32:52.123456 2000] [core:error] [pid 1234:tid 140245] [client 127.0.0.1:56789] "
    "AH00128: File does not exist: /var/www/favicon.ico"
)
SQUID_LINE = (
    "1286536309.586    921 192.168.0.68 TCP_MISS/200 507 POST http://rcv.example.com/ - "
    "DIRECT/193.0.0.1 application/octet-stream"
)


class TestParseLine(unittest.TestCase):
    """Test cases for parsing single lines."""

    def test_sample_line_golden(self):
        """The IIS sample-layout line parses into the expected fields."""
        record = parse_line(SAMPLE_LINE, IIS_SAMPLE)
        self.assertEqual(record.format_id, FormatId.IIS_W3C)
        self.assertEqual(record.values["Date"], "2013-04-15")
        self.assertEqual(record.values["Time"], "00:00:07")
        self.assertEqual(record.values["Method"], "GET")
        self.assertEqual(record.values["URI Stem"], "/ilahiyat/Tr/BilimselFaaliyetler/FakulteDergisi.htm")
        self.assertEqual(extract_role(record, "client_ip"), "66.249.78.66")
        self.assertEqual(list(record.values), list(IIS_SAMPLE.field_schema))

    def test_all_missing_line(self):
        line = " ".join(["-"] * len(IIS_SAMPLE.field_schema))
        record = parse_line(line, IIS_SAMPLE)
        self.assertTrue(all(value == "-" for value in record.values.values()))

    def test_apache_common_line(self):
        record = parse_line(APACHE_LINE, APACHE_COMMON)
        self.assertEqual(record.values["HTTP Status"], "200")
        self.assertEqual(record.values["Bytes Sent"], "2326")
        self.assertEqual(record.values["Timestamp"], "10/Oct/2000:13:55:36 -0700")
        self.assertEqual(extract_role(record, "method"), "GET")
        self.assertEqual(extract_role(record, "page"), "/a.html")

    def test_apache_combined_keeps_quoted_spaces(self):
        record = parse_line(COMBINED_LINE, APACHE_COMBINED)
        self.assertEqual(record.values["User Name"], "frank")
        self.assertEqual(record.values["User Agent"], "Mozilla/4.08 [en] (Win98; I ;Nav)")
        self.assertEqual(extract_role(record, "user_agent"), "Mozilla/4.08 [en] (Win98; I ;Nav)")

    def test_apache_error_optional_client(self):
        record = parse_line(ERROR_LINE, APACHE_ERROR)
        self.assertEqual(record.values["Severity"], "error")
        self.assertEqual(record.values["Client IP Address"], "127.0.0.1")
        self.assertTrue(record.values["Message"].startswith("client denied"))

        without_client = parse_line("[Wed Oct 11 14:32:52 2000] [notice] caught SIGTERM, shutting down", APACHE_ERROR)
        self.assertEqual(without_client.values["Client IP Address"], "-")
        self.assertEqual(without_client.values["Message"], "caught SIGTERM, shutting down")

    def test_apache_error_24_layout(self):
        record = parse_line(ERROR_24_LINE, APACHE_ERROR_24)
        self.assertEqual(record.values["Severity"], "core:error")
        self.assertEqual(record.values["Process"], "1234:tid 140245")
        self.assertEqual(extract_role(record, "client_ip"), "127.0.0.1")
        self.assertEqual(extract_role(record, "status"), "error")
        self.assertEqual(derive_day(record), "2000-10-11")
        self.assertEqual(derive_hour(record), "14")

        without_client = parse_line(
            "[Wed Oct 11 14:32:52.000001 2000] [mpm_event:notice] [pid 77:tid 9] AH00492: caught SIGWINCH",
            APACHE_ERROR_24)
        self.assertEqual(extract_role(without_client, "client_ip"), "-")
        self.assertEqual(extract_role(without_client, "status"), "notice")
        self.assertEqual(without_client.values["Message"], "AH00492: caught SIGWINCH")

    def test_squid_collapses_space_runs(self):
        record = parse_line(SQUID_LINE, SQUID)
        self.assertEqual(record.values["Elapsed"], "921")
        self.assertEqual(extract_role(record, "status"), "200")
        self.assertEqual(extract_role(record, "page"), "http://rcv.example.com/")

    def test_field_count_mismatch(self):
        with self.assertRaises(FieldCountMismatch) as context:
            parse_line("2013-04-15 00:00:07 W3SVC1", IIS_SAMPLE, 7)
        self.assertEqual(context.exception.expected, 13)
        self.assertEqual(context.exception.actual, 3)
        self.assertEqual(context.exception.line_number, 7)
        self.assertIsNone(parse_or_none("2013-04-15 00:00:07 W3SVC1", IIS_SAMPLE))

    def test_tabs_are_sanitized(self):
        record = parse_line('127.0.0.1 - - [10/Oct/2000:13:55:36 -0700] "GET /a\tb HTTP/1.0" 200 5', APACHE_COMMON)
        self.assertEqual(record.values["Request"], "GET /a b HTTP/1.0")

    def test_directives(self):
        self.assertTrue(is_directive("#Fields: date time"))
        self.assertTrue(is_directive("   "))
        self.assertFalse(is_directive(SAMPLE_LINE))


class TestDerivedColumns(unittest.TestCase):
    """Test cases for day, hour, field and role extraction."""

    def test_day_and_hour_of_sample_line(self):
        record = parse_line(SAMPLE_LINE, IIS_SAMPLE)
        self.assertEqual(derive_day(record), "2013-04-15")
        self.assertEqual(derive_hour(record), "00")

    def test_hour_boundary(self):
        line = SAMPLE_LINE.replace("00:00:07", "23:59:59")
        self.assertEqual(derive_hour(parse_line(line, IIS_SAMPLE)), "23")

    def test_clf_timestamp(self):
        record = parse_line(APACHE_LINE, APACHE_COMMON)
        expected = datetime.strptime("10/Oct/2000:13:55:36 -0700", "%d/%b/%Y:%H:%M:%S %z")
        self.assertEqual(derive_day(record), expected.date().isoformat())
        self.assertEqual(derive_hour(record), "13")

    def test_ctime_timestamp(self):
        record = parse_line(ERROR_LINE, APACHE_ERROR)
        self.assertEqual(derive_day(record), "2000-10-11")
        self.assertEqual(derive_hour(record), "14")

    def test_epoch_timestamp_is_utc(self):
        record = parse_line(SQUID_LINE, SQUID)
        moment = datetime.fromtimestamp(1286536309.586, tz=timezone.utc)
        self.assertEqual(derive_day(record), moment.date().isoformat())
        self.assertEqual(derive_hour(record), f"{moment.hour:02d}")

    def test_missing_date(self):
        record = parse_line(SAMPLE_LINE.replace("2013-04-15", "-", 1), IIS_SAMPLE)
        with self.assertRaises(MissingField):
            derive_day(record)

    def test_missing_time(self):
        record = parse_line(SAMPLE_LINE.replace("00:00:07", "-"), IIS_SAMPLE)
        with self.assertRaises(MissingField):
            derive_hour(record)

    def test_extract_field(self):
        record = parse_line(SAMPLE_LINE, IIS_SAMPLE)
        self.assertEqual(extract_field(record, "Method"), "GET")
        self.assertEqual(extract_field(record, "URI Query"), "-")
        with self.assertRaises(UnknownField):
            extract_field(record, "NoSuchField")

    def test_role_absent_from_dialect(self):
        record = parse_line(SAMPLE_LINE, IIS_SAMPLE)
        self.assertEqual(extract_role(record, "status"), "-")
        record = parse_line(APACHE_LINE, APACHE_COMMON)
        self.assertEqual(extract_role(record, "user_agent"), "-")

    def test_custom_descriptor(self):
        custom = IIS_SAMPLE._replace(name="site-iis")
        record = parse_line(SAMPLE_LINE, custom)
        self.assertIs(record.descriptor, custom)
        self.assertEqual(record.variant, "site-iis")
        self.assertEqual(derive_day(record), "2013-04-15")
        self.assertEqual(derive_hour(record), "00")
        self.assertEqual(extract_role(record, "page"), "/ilahiyat/Tr/BilimselFaaliyetler/FakulteDergisi.htm")
        self.assertEqual(format_line(record), SAMPLE_LINE)

    def test_custom_shape_under_builtin_name(self):
        self.assertEqual(parse_line(ERROR_LINE, APACHE_ERROR).values["Severity"], "error")
        angled = APACHE_ERROR._replace(wrapped={**APACHE_ERROR.wrapped, "Severity": ("<", ">")})
        record = parse_line("[Wed Oct 11 14:32:52 2000] <warn> disk nearly full", angled)
        self.assertEqual(record.values["Severity"], "warn")
        self.assertEqual(record.values["Message"], "disk nearly full")
        self.assertIsNone(parse_or_none(ERROR_LINE, angled))

    def test_hour_histogram_matches_generator(self):
        generator = LogGenerator(IIS_FULL, seed=3)
        records = [parse_line(line, IIS_FULL) for line in generator.lines(1000)]
        self.assertEqual(Counter(derive_hour(record) for record in records), generator.counts["hour"])


class TestRoundTrip(unittest.TestCase):
    """Generated lines survive parse then re-serialization unchanged."""

    def test_every_dialect(self):
        for descriptor in DESCRIPTORS:
            with self.subTest(descriptor=descriptor.name):
                for line in LogGenerator(descriptor, seed=11).lines(200):
                    self.assertEqual(format_line(parse_line(line, descriptor)), line)

    def test_skipped_lines_counted(self):
        lines = LogGenerator(IIS_FULL, seed=5).lines(50)
        lines.insert(0, "#Software: Microsoft Internet Information Services 7.5")
        corrupt_at = [3, 20, 41]
        for index in corrupt_at:
            lines.insert(index, "this line is corrupt")
        skipped = []
        records = list(iter_records(lines, IIS_FULL, skipped))
        self.assertEqual(len(records), 50)
        self.assertEqual(skipped, corrupt_at)


class TestDetectFormat(unittest.TestCase):
    """Test cases for dialect detection."""

    def test_sample_line_is_iis(self):
        self.assertEqual(detect_format([SAMPLE_LINE]).format_id, FormatId.IIS_W3C)
        self.assertIs(detect_format([SAMPLE_LINE]), IIS_SAMPLE)

    def test_known_lines(self):
        self.assertIs(detect_format([APACHE_LINE]), APACHE_COMMON)
        self.assertIs(detect_format([COMBINED_LINE]), APACHE_COMBINED)
        self.assertIs(detect_format([ERROR_LINE]), APACHE_ERROR)
        self.assertIs(detect_format([ERROR_24_LINE]), APACHE_ERROR_24)
        self.assertIs(detect_format([SQUID_LINE]), SQUID)

    def test_generated_corpora(self):
        for seed in range(5):
            for descriptor in DESCRIPTORS:
                with self.subTest(descriptor=descriptor.name, seed=seed):
                    lines = LogGenerator(descriptor, seed).lines(100)
                    self.assertIs(detect_format(lines), descriptor)

    def test_directives_ignored(self):
        lines = ["#Version: 1.0", "#Fields: date time s-sitename", SAMPLE_LINE]
        self.assertIs(detect_format(lines), IIS_SAMPLE)

    def test_half_is_enough(self):
        self.assertIs(detect_format([SAMPLE_LINE, "garbage"]), IIS_SAMPLE)
        with self.assertRaises(NoFormatMatched):
            detect_format([SAMPLE_LINE, "garbage", "more garbage"])

    def test_nothing_matches(self):
        with self.assertRaises(NoFormatMatched):
            detect_format(["hello world", "foo bar baz"])
        with self.assertRaises(NoFormatMatched):
            detect_format(["#only a directive"])

    def test_missing_date_does_not_match(self):
        self.assertFalse(matches(SAMPLE_LINE.replace("2013-04-15", "-", 1), IIS_SAMPLE))

    def test_get_descriptor(self):
        self.assertIs(get_descriptor("apache-common"), APACHE_COMMON)
        self.assertIs(get_descriptor("SQUID"), SQUID)
        self.assertIs(get_descriptor("iis_w3c"), IIS_FULL)
        with self.assertRaises(ValueError):
            get_descriptor("nginx")


if __name__ == "__main__":
    unittest.main()
