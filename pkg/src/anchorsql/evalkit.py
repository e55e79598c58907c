"""Exact match, exact set match and execution accuracy."""

from __future__ import annotations

import re
import sqlite3
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .schema import Schema
from .sqlkit import SqlError, lex, parse, to_exec_order
from .sqlkit.ast import AggCall, BinaryOp, BoolExpr, Column, Literal, Predicate, Query, Subquery, ValueList

_PLACEHOLDER = ("value",)


def _parse(sql, s: Schema) -> Query | None:
    if isinstance(sql, Query):
        return sql
    try:
        return parse(sql, s)
    except SqlError:
        return None


def _lexical(sql: str) -> list[tuple[str, str]] | None:
    try:
        toks = lex(sql)
    except SqlError:
        return None
    out = []
    for cat, text, _ in toks:
        if cat in ("kw", "op", "ident"):
            out.append((cat, text.upper()))
        elif cat == "str":
            out.append(("str", text[1:-1]))
        else:
            out.append((cat, text))
    return out


def exact_match(pred: str | Query, gold: str | Query, s: Schema | None = None) -> bool:
    """Identical normalized token sequences.

    With a schema both sides are parsed and compared through their canonical
    alias-free linearization; without one the comparison is lexical with
    keywords and identifiers case-folded.
    """
    if s is None:
        a, b = _lexical(pred), _lexical(gold)
        return a is not None and a == b
    p, g = _parse(pred, s), _parse(gold, s)
    if p is None or g is None:
        return False
    try:
        return to_exec_order(p, s) == to_exec_order(g, s)
    except SqlError:
        return p == g


# -- exact set match ------------------------------------------------------

def _expr(e):
    if isinstance(e, Column):
        return ("col", e.field)
    if isinstance(e, (Literal, ValueList)):
        return _PLACEHOLDER
    if isinstance(e, AggCall):
        return ("agg", e.func, e.distinct, _expr(e.arg))
    if isinstance(e, BinaryOp):
        return ("op", e.op, _expr(e.left), _expr(e.right))
    if isinstance(e, Subquery):
        return ("sub", query_signature(e.query))
    raise TypeError(f"unexpected expression {e!r}")


def _predicates(c, preds: list, conns: set) -> None:
    if isinstance(c, BoolExpr):
        conns.add(c.op)
        for item in c.items:
            _predicates(item, preds, conns)
    else:
        p: Predicate = c
        upper = _expr(p.upper) if p.upper is not None else None
        preds.append(("pred", p.op, p.negated, _expr(p.left), _expr(p.right), upper))


def _cond(c):
    if c is None:
        return None
    preds, conns = [], set()
    _predicates(c, preds, conns)
    return (tuple(sorted(preds, key=repr)), frozenset(conns))


def _multiset(items) -> tuple:
    return tuple(sorted(items, key=repr))


def query_signature(q: Query) -> tuple:
    """Clause-wise orderless structure of a query with literals replaced by a placeholder."""
    order = _multiset((_expr(o.expr), o.direction or "ASC") for o in q.order_by)
    return (
        ("select", q.select.distinct, _multiset(_expr(e) for e in q.select.items)),
        ("from", frozenset(t.table for t in q.from_.tables)),
        ("where", _cond(q.where)),
        ("group", frozenset(_expr(e) for e in q.group_by)),
        ("having", _cond(q.having)),
        ("order", order, q.limit is not None),
        ("set", q.set_op, query_signature(q.right) if q.right is not None else None),
    )


def exact_set_match(pred: str | Query, gold: str | Query, s: Schema) -> bool:
    g = _parse(gold, s)
    if g is None:
        raise SqlError(f"gold query does not parse: {gold}")
    p = _parse(pred, s)
    return p is not None and query_signature(p) == query_signature(g)


# -- execution accuracy ---------------------------------------------------

_ORDER_BY = re.compile(r"\border\s+by\b", re.I)


def _run(con: sqlite3.Connection, sql: str, budget: int) -> list[tuple]:
    steps = [0]

    def guard():
        steps[0] += 1
        return 1 if steps[0] > budget else 0

    con.set_progress_handler(guard, 1000)
    try:
        return con.execute(sql).fetchall()
    finally:
        con.set_progress_handler(None, 0)


def execution_accuracy(pred: str, gold: str, db: str | Path | None, budget: int = 100_000) -> bool | None:
    """Result equality on a SQLite file; None when no database is available.

    Rows are compared as multisets unless both queries order their output.
    ``budget`` caps the work per query (in thousands of VM steps).
    """
    if db is None or not Path(db).exists():
        return None
    con = sqlite3.connect(f"file:{Path(db).resolve()}?mode=ro", uri=True)
    try:
        try:
            gold_rows = _run(con, gold, budget)
        except sqlite3.Error as e:
            raise ValueError(f"gold query failed on {db}: {e}") from e
        try:
            pred_rows = _run(con, pred, budget)
        except sqlite3.Error:
            return False
    finally:
        con.close()
    if _ORDER_BY.search(pred) and _ORDER_BY.search(gold):
        return pred_rows == gold_rows
    return Counter(pred_rows) == Counter(gold_rows)


# -- corpus level ---------------------------------------------------------

@dataclass
class Verdict:
    em: bool
    esm: bool
    ea: bool | None = None

    def to_json(self) -> dict:
        return {"em": self.em, "esm": self.esm, "ea": self.ea}


@dataclass
class EvalResult:
    verdicts: list[Verdict] = field(default_factory=list)

    def _pct(self, name: str) -> float | None:
        vals = [getattr(v, name) for v in self.verdicts if getattr(v, name) is not None]
        return 100.0 * sum(vals) / len(vals) if vals else None

    @property
    def em(self) -> float | None:
        return self._pct("em")

    @property
    def esm(self) -> float | None:
        return self._pct("esm")

    @property
    def ea(self) -> float | None:
        return self._pct("ea")

    def summary(self) -> dict:
        return {"n": len(self.verdicts), "em": self.em, "esm": self.esm, "ea": self.ea}


def judge(pred: str, gold: str, s: Schema, db: str | Path | None = None) -> Verdict:
    em = exact_match(pred, gold, s)
    esm = em or exact_set_match(pred, gold, s)
    return Verdict(em, esm, execution_accuracy(pred, gold, db) if db is not None else None)


def evaluate(preds: Sequence[str], golds: Sequence[str], schemas: Sequence[Schema], dbs: Sequence | None = None) -> EvalResult:
    if not len(preds) == len(golds) == len(schemas):
        raise ValueError("predictions, gold queries and schemas must have equal length")
    dbs = dbs if dbs is not None else [None] * len(preds)
    return EvalResult([judge(p, g, s, d) for p, g, s, d in zip(preds, golds, schemas, dbs)])
