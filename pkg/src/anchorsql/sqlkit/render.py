"""Linearization of syntax trees into token sequences, and tokens into SQL text."""

from __future__ import annotations

from typing import Sequence

from ..schema import Schema
from .ast import (
    AggCall,
    BinaryOp,
    BoolExpr,
    Column,
    FromClause,
    Literal,
    Predicate,
    Query,
    Subquery,
    ValueList,
)
from .parser import EXEC, WRITTEN, parse
from .tokens import SqlError, SqlToken

DEFAULT_QUOTE = '"'


def R(sym: str) -> SqlToken:
    return SqlToken("reserved", sym)


class _Linearizer:
    def __init__(self, s: Schema, order: Sequence[str], keep_aliases: bool):
        self.s = s
        self.order = order
        self.keep = keep_aliases
        self.out: list[SqlToken] = []

    def emit(self, *toks: SqlToken) -> None:
        self.out.extend(toks)

    def query(self, q: Query) -> None:
        for kw in self.order:
            getattr(self, "_" + kw.replace(" ", "_").lower())(q)
        if q.set_op is not None:
            self.emit(R(q.set_op))
            self.query(q.right)

    def _select(self, q: Query) -> None:
        self.emit(R("SELECT"))
        if q.select.distinct:
            self.emit(R("DISTINCT"))
        self.exprs(q.select.items)

    def _from(self, q: Query) -> None:
        fc: FromClause = q.from_
        seen = set()
        for i, ref in enumerate(fc.tables):
            if ref.table in seen and not self.keep:
                raise SqlError(f"self-join on {self.s.tables[ref.table].name} cannot be linearized without aliases")
            seen.add(ref.table)
            if i == 0:
                self.emit(R("FROM"))
            else:
                self.emit(R("JOIN") if fc.joined else R(","))
            self.emit(SqlToken("table", self.s.tables[ref.table].name, ref.table))
            if self.keep and ref.alias:
                self.emit(R("AS"), SqlToken("table", ref.alias, ref.table, qualifier="alias"))
            if i > 0 and i - 1 < len(fc.on) and fc.on[i - 1] is not None:
                self.emit(R("ON"))
                self.cond(fc.on[i - 1])

    def _where(self, q: Query) -> None:
        if q.where is not None:
            self.emit(R("WHERE"))
            self.cond(q.where)

    def _group_by(self, q: Query) -> None:
        if q.group_by:
            self.emit(R("GROUP BY"))
            self.exprs(q.group_by)

    def _having(self, q: Query) -> None:
        if q.having is not None:
            self.emit(R("HAVING"))
            self.cond(q.having)

    def _order_by(self, q: Query) -> None:
        if q.order_by:
            self.emit(R("ORDER BY"))
            for i, item in enumerate(q.order_by):
                if i:
                    self.emit(R(","))
                self.expr(item.expr)
                if item.direction:
                    self.emit(R(item.direction))

    def _limit(self, q: Query) -> None:
        if q.limit is not None:
            self.emit(R("LIMIT"), SqlToken("number", str(q.limit)))

    def exprs(self, items) -> None:
        for i, e in enumerate(items):
            if i:
                self.emit(R(","))
            self.expr(e)

    def expr(self, e) -> None:
        if isinstance(e, Column):
            if e.field is None:
                self.emit(R("*"))
            elif self.keep and e.surface:
                self.emit(SqlToken("field", e.surface, e.field))
            else:
                self.emit(SqlToken("field", self.s.qualified_name(e.field), e.field))
        elif isinstance(e, Literal):
            self.literal(e)
        elif isinstance(e, AggCall):
            self.emit(R(e.func), R("("))
            if e.distinct:
                self.emit(R("DISTINCT"))
            self.expr(e.arg)
            self.emit(R(")"))
        elif isinstance(e, BinaryOp):
            self.expr(e.left)
            self.emit(R(e.op))
            self.expr(e.right)
        elif isinstance(e, Subquery):
            self.emit(R("("))
            self.query(e.query)
            self.emit(R(")"))
        elif isinstance(e, ValueList):
            self.emit(R("("))
            self.exprs(e.items)
            self.emit(R(")"))
        else:
            raise TypeError(f"not an expression: {e!r}")

    def literal(self, lit: Literal) -> None:
        if lit.is_number:
            if lit.text.startswith("-"):
                self.emit(R("-"), SqlToken("number", lit.text[1:]))
            else:
                self.emit(SqlToken("number", lit.text))
            return
        words = lit.text.split()
        if not words:
            # empty string literal keeps one empty value token
            words = [""]
        self.emit(*(SqlToken("value", w, quote=lit.quote) for w in words))

    def cond(self, c, parent: str | None = None) -> None:
        if isinstance(c, BoolExpr):
            wrap = parent is not None and parent != c.op
            if wrap:
                self.emit(R("("))
            for i, item in enumerate(c.items):
                if i:
                    self.emit(R(c.op))
                self.cond(item, c.op)
            if wrap:
                self.emit(R(")"))
            return
        p: Predicate = c
        self.expr(p.left)
        if p.op == "IS":
            self.emit(R("IS"))
            if p.negated:
                self.emit(R("NOT"))
            self.emit(R("NULL"))
            return
        if p.negated:
            self.emit(R("NOT"))
        self.emit(R(p.op))
        self.expr(p.right)
        if p.op == "BETWEEN":
            self.emit(R("AND"))
            self.expr(p.upper)


def linearize(q: Query, s: Schema, order: str = "exec", keep_aliases: bool = False) -> list[SqlToken]:
    """Token sequence of ``q`` with clauses in written or execution order.

    Canonical output drops aliases and qualifies every field as
    ``table.field``; ``keep_aliases`` reproduces the original spellings.
    String literals become one value token per whitespace-separated word.
    """
    seq = {"exec": EXEC, "written": WRITTEN}[order]
    lin = _Linearizer(s, seq, keep_aliases)
    lin.query(q)
    return lin.out


def to_exec_order(q: Query, s: Schema, keep_aliases: bool = False) -> list[SqlToken]:
    return linearize(q, s, "exec", keep_aliases)


def _quote(text: str, q: str) -> str:
    return q + text.replace(q, q * 2) + q


def render_tokens(tokens: Sequence[SqlToken]) -> str:
    """SQL text for a token sequence.

    Runs of adjacent value/number tokens form one literal: an all-digit run is
    concatenated, anything else is quoted and joined with spaces.
    """
    parts: list[str] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind in ("value", "number"):
            j = i
            while j < len(tokens) and tokens[j].kind in ("value", "number"):
                j += 1
            run = tokens[i:j]
            if all(t.kind == "number" for t in run):
                parts.append("".join(t.surface for t in run))
            else:
                q = next((t.quote for t in run if t.quote), DEFAULT_QUOTE)
                parts.append(_quote(" ".join(t.surface for t in run), q))
            i = j
            continue
        parts.append(tok.surface)
        i += 1
    text = ""
    prev: SqlToken | None = None
    for tok, part in _zip_parts(tokens, parts):
        if text and not _glue(prev, tok):
            text += " "
        text += part
        prev = tok
    return text


def _zip_parts(tokens, parts):
    # pair each rendered part with the first token it came from
    i = 0
    for part in parts:
        tok = tokens[i]
        yield tok, part
        if tok.kind in ("value", "number"):
            while i < len(tokens) and tokens[i].kind in ("value", "number"):
                i += 1
        else:
            i += 1


def _glue(prev: SqlToken | None, tok: SqlToken) -> bool:
    if prev is None:
        return True
    if tok.kind == "reserved" and tok.surface in (")", ","):
        return True
    if prev.kind == "reserved" and prev.surface == "(":
        return True
    if tok.kind == "reserved" and tok.surface == "(" and prev.kind == "reserved" and prev.surface.isalpha() and prev.surface in _FUNCS:
        return True
    return False


_FUNCS = {"COUNT", "SUM", "AVG", "MIN", "MAX", "LOWER", "UPPER", "LENGTH", "ABS", "ROUND", "CAST"}


def render_sql(q: Query, s: Schema, order: str = "written", keep_aliases: bool = False) -> str:
    return render_tokens(linearize(q, s, order, keep_aliases))


def to_written(sql: str | Sequence[SqlToken], s: Schema) -> str:
    """Written-order SQL text for an execution-order query (text or tokens)."""
    return render_sql(parse(sql, s, order="exec"), s, "written")


def normalize(sql: str, s: Schema) -> list[SqlToken]:
    """Parse written SQL and return its canonical execution-order tokens."""
    return to_exec_order(parse(sql, s), s)
