"""
Test module for the shuffle sort and multi-output routing.
"""

import random
import unittest
from collections import Counter, defaultdict

from mrloglab.common import NonNumericKey, NoPrefix
from mrloglab.engine.common import Comparator
from mrloglab.engine.runner import output_file_name, route_multi_output, shuffle_sort


class TestShuffleSort(unittest.TestCase):
    """Test cases for grouping and ordering intermediate pairs."""

    def test_groups_in_arrival_order(self):
        groups = shuffle_sort([("b", "1"), ("a", "1"), ("b", "2")], Comparator.LEXICOGRAPHIC)
        self.assertEqual(groups, [("a", ["1"]), ("b", ["1", "2"])])

    def test_numeric_order(self):
        groups = shuffle_sort([("9", "x"), ("10", "y"), ("2", "z")], Comparator.NUMERIC)
        self.assertEqual([key for key, _ in groups], ["2", "9", "10"])

    def test_lexicographic_order_of_numbers(self):
        groups = shuffle_sort([("9", "x"), ("10", "y"), ("2", "z")])
        self.assertEqual([key for key, _ in groups], ["10", "2", "9"])

    def test_negative_numbers(self):
        groups = shuffle_sort([("3", "a"), ("-12", "b"), ("0", "c")], Comparator.NUMERIC)
        self.assertEqual([key for key, _ in groups], ["-12", "0", "3"])

    def test_non_numeric_key(self):
        with self.assertRaises(NonNumericKey):
            shuffle_sort([("1", "a"), ("day", "b")], Comparator.NUMERIC)

    def test_empty(self):
        self.assertEqual(shuffle_sort([], Comparator.NUMERIC), [])

    def test_random_pairs(self):
        rng = random.Random(42)
        for comparator in Comparator:
            with self.subTest(comparator=comparator):
                if comparator is Comparator.NUMERIC:
                    pairs = [(str(rng.randrange(-500, 500)), str(i)) for i in range(10000)]
                    sort_key = int
                else:
                    pairs = [("".join(rng.choice("abcde") for _ in range(rng.randrange(1, 4))), str(i))
                             for i in range(10000)]
                    sort_key = str
                groups = shuffle_sort(pairs, comparator)

                keys = [sort_key(key) for key, _ in groups]
                self.assertTrue(all(earlier < later for earlier, later in zip(keys, keys[1:])))
                flattened = [(key, value) for key, values in groups for value in values]
                self.assertEqual(Counter(flattened), Counter(pairs))
                # Values keep arrival order within a key
                arrivals = defaultdict(list)
                for key, value in pairs:
                    arrivals[key].append(value)
                self.assertEqual(dict(groups), dict(arrivals))


class TestRouting(unittest.TestCase):
    """Test cases for splitting keys into file prefix and residual key."""

    def test_first_underscore(self):
        self.assertEqual(route_multi_output("day_2013-04-15"), ("day", "2013-04-15"))
        self.assertEqual(route_multi_output("page_index.html"), ("page", "index.html"))
        self.assertEqual(route_multi_output("browser_Mozilla/5.0+(Windows_NT_6.1)"),
                         ("browser", "Mozilla/5.0+(Windows_NT_6.1)"))

    def test_empty_residual(self):
        self.assertEqual(route_multi_output("ip_"), ("ip", ""))

    def test_no_prefix(self):
        for key in ("nounderscore", "_leading"):
            with self.subTest(key=key):
                with self.assertRaises(NoPrefix):
                    route_multi_output(key)

    def test_file_name(self):
        self.assertEqual(output_file_name("day"), "day_part-00000")


if __name__ == "__main__":
    unittest.main()
