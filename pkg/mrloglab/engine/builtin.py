"""General-purpose mappers and reducers."""

from typing import Iterable, List, Tuple

from mrloglab.engine.base import BaseMapper, BaseReducer, register_mapper, register_reducer
from mrloglab.engine.common import IDENTITY


@register_reducer(IDENTITY)
class IdentityReducer(BaseReducer):
    """Passes every pair through unchanged; only the shuffle's sort is wanted."""

    def reduce(self, key: str, values: List[str]) -> Iterable[Tuple[str, str]]:
        for value in values:
            yield key, value


@register_reducer("sum")
class SumReducer(BaseReducer):
    def reduce(self, key: str, values: List[str]) -> Iterable[Tuple[str, str]]:
        yield key, str(sum(int(value) for value in values))


@register_mapper("wordcount")
class WordCountMapper(BaseMapper):
    """Emits (word, 1) for every whitespace-separated word."""

    def map(self, key: int, value: str) -> Iterable[Tuple[str, str]]:
        for word in value.split():
            yield word, "1"


@register_mapper("swap-columns")
class SwapColumnsMapper(BaseMapper):
    """
    Reads `key<TAB>value` lines of an earlier output and emits (value, key).

    Used to re-sort a counted output by its counts.
    """

    def map(self, key: int, value: str) -> Iterable[Tuple[str, str]]:
        token1, separator, token2 = value.partition("\t")
        if not separator:
            self.increment("malformed_lines")
            return
        yield token2, token1
