"""
Test module for shared helpers and the exception hierarchy.
"""

import logging
import os
import tempfile
import unittest
from unittest.mock import patch

from mrloglab.common import (
    STORE_ENV_VAR, BlockUnavailable, JobFailed, MrLogLabError, ReplicationInfeasible, InvalidClusterSpec,
    find_log_files, is_verbose, parse_size, read_sample_lines, resolve_store_root, set_verbose,
)
from mrloglab.engine.base import BaseTask


class TestParseSize(unittest.TestCase):
    """Test cases for byte size parsing."""

    def test_suffixes(self):
        self.assertEqual(parse_size("4096"), 4096)
        self.assertEqual(parse_size("64K"), 64 * 1024)
        self.assertEqual(parse_size("64M"), 64 * 1024 * 1024)
        self.assertEqual(parse_size("1g"), 1024 ** 3)
        self.assertEqual(parse_size("32KB"), 32 * 1024)

    def test_invalid(self):
        for text in ("", "M", "abc", "-1", "0", "1.5M"):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    parse_size(text)


class TestStoreRoot(unittest.TestCase):
    """Test cases for store root resolution."""

    def test_flag_wins(self):
        with patch.dict(os.environ, {STORE_ENV_VAR: "/tmp/from-env"}):
            self.assertEqual(resolve_store_root("/tmp/from-flag"), os.path.abspath("/tmp/from-flag"))

    def test_environment(self):
        with patch.dict(os.environ, {STORE_ENV_VAR: "/tmp/from-env"}):
            self.assertEqual(resolve_store_root(None), os.path.abspath("/tmp/from-env"))

    def test_in_memory_default(self):
        with patch.dict(os.environ, {}, clear=True):
            self.assertIsNone(resolve_store_root(None))


class TestInputDiscovery(unittest.TestCase):
    """Test cases for finding and sampling log files."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = self.temp_dir.name
        os.makedirs(os.path.join(self.root, "sub"))
        for name in ("b.log", "a.txt", "notes.md", os.path.join("sub", "c.log")):
            with open(os.path.join(self.root, name), "w") as f:
                f.write("line one\r\nline two\nline three\n")

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_directory(self):
        found = [os.path.relpath(path, self.root) for path in find_log_files(self.root)]
        self.assertEqual(found, ["a.txt", "b.log", os.path.join("sub", "c.log")])

    def test_explicit_file(self):
        path = os.path.join(self.root, "notes.md")
        self.assertEqual(find_log_files(path), [path])

    def test_missing_path(self):
        self.assertEqual(find_log_files(os.path.join(self.root, "nope")), [])

    def test_sample_lines(self):
        path = os.path.join(self.root, "b.log")
        self.assertEqual(read_sample_lines(path), ["line one", "line two", "line three"])
        self.assertEqual(read_sample_lines(path, limit=2), ["line one", "line two"])


class TestVerbosity(unittest.TestCase):
    """Test cases for the package-wide verbosity switch."""

    def tearDown(self):
        set_verbose(False)
        logging.getLogger("mrloglab").setLevel(logging.ERROR)

    def test_set_verbose(self):
        set_verbose(True)
        self.assertTrue(is_verbose())
        self.assertTrue(BaseTask.verbose)
        self.assertEqual(logging.getLogger("mrloglab").level, logging.DEBUG)
        set_verbose(False)
        self.assertFalse(BaseTask.verbose)
        self.assertEqual(logging.getLogger("mrloglab").level, logging.WARNING)

    def test_single_handler(self):
        set_verbose(True)
        set_verbose(True)
        self.assertEqual(len(logging.getLogger("mrloglab").handlers), 1)


class TestErrors(unittest.TestCase):
    """Test cases for the exception hierarchy."""

    def test_reason(self):
        self.assertEqual(BlockUnavailable("ds", 3).reason, "BlockUnavailable")
        failed = JobFailed("frequency", BlockUnavailable("ds", 3))
        self.assertEqual(failed.reason, "BlockUnavailable")
        self.assertIn("frequency", str(failed))
        self.assertIsInstance(failed.cause, BlockUnavailable)

    def test_hierarchy(self):
        self.assertTrue(issubclass(ReplicationInfeasible, InvalidClusterSpec))
        self.assertTrue(issubclass(JobFailed, MrLogLabError))


if __name__ == "__main__":
    unittest.main()
