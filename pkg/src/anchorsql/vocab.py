"""The closed generation vocabulary shared by the SQL toolkit, guards and decoder."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

VOCAB_VERSION = 1
EOS = "<eos>"
DIGITS = tuple(str(d) for d in range(10))


@lru_cache(maxsize=None)
def reserved_symbols() -> tuple[str, ...]:
    text = resources.files("anchorsql.data").joinpath(f"reserved_v{VOCAB_VERSION}.txt").read_text()
    symbols = tuple(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))
    assert len(symbols) == 70, len(symbols)
    return symbols


@lru_cache(maxsize=None)
def generation_vocab() -> tuple[str, ...]:
    """Reserved symbols followed by the ten digits (80 entries)."""
    return reserved_symbols() + DIGITS


@lru_cache(maxsize=None)
def reserved_set() -> frozenset[str]:
    return frozenset(reserved_symbols())


CLAUSE_KEYWORDS = ("SELECT", "FROM", "WHERE", "GROUP BY", "HAVING", "ORDER BY", "LIMIT")
SET_OPS = ("UNION", "INTERSECT", "EXCEPT")
AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
COMPARISONS = ("=", "!=", "<>", "<", ">", "<=", ">=")
ARITHMETIC = ("+", "-", "*", "/", "%")
