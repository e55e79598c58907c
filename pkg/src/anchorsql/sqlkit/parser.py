"""Recursive-descent parser for the Spider SQL subset, in written or execution clause order."""

from __future__ import annotations

from typing import Sequence

from ..schema import Schema
from ..vocab import AGGREGATES, ARITHMETIC, COMPARISONS, SET_OPS
from .ast import (
    AggCall,
    BinaryOp,
    BoolExpr,
    Column,
    Cond,
    Expr,
    FromClause,
    Literal,
    OrderItem,
    Predicate,
    Query,
    Select,
    Subquery,
    TableRef,
    ValueList,
)
from .tokens import SqlError, SqlToken, tokenize_sql

WRITTEN = ("SELECT", "FROM", "WHERE", "GROUP BY", "HAVING", "ORDER BY", "LIMIT")
EXEC = ("FROM", "WHERE", "GROUP BY", "HAVING", "SELECT", "ORDER BY", "LIMIT")
ORDERS = {"written": WRITTEN, "exec": EXEC}

Scope = tuple[tuple[int, str | None], ...]  # (table id, alias) pairs of one FROM clause


def _is(tok: SqlToken | None, *symbols: str) -> bool:
    return tok is not None and tok.kind == "reserved" and tok.surface in symbols


class Parser:
    """Parses one token sequence.

    In strict mode every resolution problem raises.  In lenient mode a field
    that exists in the schema but whose table is not in scope is resolved
    anyway and recorded in ``violations``; this is what the static checker
    needs.  ``resolved`` maps token positions of field tokens to field ids.
    """

    def __init__(self, tokens: Sequence[SqlToken], schema: Schema, order: str | None = None, strict: bool = True):
        if order is not None and order not in ORDERS:
            raise ValueError(f"order must be 'written' or 'exec', not {order!r}")
        self.toks = list(tokens)
        self.s = schema
        self.order = order
        self.strict = strict
        self.violations: list[SqlError] = []
        self.resolved: dict[int, int] = {}
        self.pos = 0
        self.end = 0

    # -- cursor helpers -------------------------------------------------
    def peek(self, k: int = 0) -> SqlToken | None:
        i = self.pos + k
        return self.toks[i] if i < self.end else None

    def advance(self) -> SqlToken:
        if self.pos >= self.end:
            raise SqlError("unexpected end of query", self.pos)
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, symbol: str) -> SqlToken:
        tok = self.peek()
        if not _is(tok, symbol):
            got = "end of query" if tok is None else repr(tok.surface)
            raise SqlError(f"expected {symbol!r}, got {got}", self.pos)
        return self.advance()

    def accept(self, symbol: str) -> bool:
        if _is(self.peek(), symbol):
            self.pos += 1
            return True
        return False

    def _closing(self, i: int, limit: int) -> int:
        depth = 0
        for j in range(i, limit):
            if _is(self.toks[j], "("):
                depth += 1
            elif _is(self.toks[j], ")"):
                depth -= 1
                if depth == 0:
                    return j
        raise SqlError("unbalanced parenthesis", i)

    def _subquery_at(self, i: int) -> bool:
        return _is(self.toks[i] if i < self.end else None, "(") and i + 1 < self.end and _is(self.toks[i + 1], "SELECT", "FROM")

    # -- entry ----------------------------------------------------------
    def parse(self) -> Query:
        end = len(self.toks)
        while end and _is(self.toks[end - 1], ";"):
            end -= 1
        if end == 0:
            raise SqlError("empty query", 0)
        return self._query(0, end, ())

    def _query(self, start: int, end: int, outer: tuple[Scope, ...]) -> Query:
        clauses: list[tuple[str, int]] = []
        split = None
        depth = 0
        for i in range(start, end):
            tok = self.toks[i]
            if _is(tok, "("):
                depth += 1
            elif _is(tok, ")"):
                depth -= 1
                if depth < 0:
                    raise SqlError("unbalanced parenthesis", i)
            elif depth == 0 and tok.kind == "reserved":
                if tok.surface in WRITTEN:
                    clauses.append((tok.surface, i))
                elif tok.surface in SET_OPS:
                    split = i
                    break
        if depth > 0:
            raise SqlError("unbalanced parenthesis", start)
        stop = split if split is not None else end
        if not clauses or clauses[0][1] != start:
            raise SqlError("query must start with SELECT or FROM", start)
        self._check_order([c for c, _ in clauses], start)

        spans = {}
        for k, (kw, i) in enumerate(clauses):
            spans[kw] = (i, clauses[k + 1][1] if k + 1 < len(clauses) else stop)
        from_, scope = self._from(*spans["FROM"], outer)
        scopes = (scope,) + outer
        q = Query(select=self._clause(spans["SELECT"], self._select_body, scopes), from_=from_)
        if "WHERE" in spans:
            q = _set(q, where=self._clause(spans["WHERE"], self._cond, scopes))
        if "GROUP BY" in spans:
            q = _set(q, group_by=self._clause(spans["GROUP BY"], self._expr_list, scopes))
        if "HAVING" in spans:
            q = _set(q, having=self._clause(spans["HAVING"], self._cond, scopes))
        if "ORDER BY" in spans:
            q = _set(q, order_by=self._clause(spans["ORDER BY"], self._order_items, scopes))
        if "LIMIT" in spans:
            q = _set(q, limit=self._clause(spans["LIMIT"], self._limit, scopes))
        if split is not None:
            if split + 1 >= end:
                raise SqlError(f"missing query after {self.toks[split].surface}", split)
            right = self._query(split + 1, end, outer)
            q = _set(q, set_op=self.toks[split].surface, right=right)
        return q

    def _check_order(self, kws: list[str], where: int) -> None:
        if self.order is None:
            self.order = "written" if kws[0] == "SELECT" else "exec"
        seq = ORDERS[self.order]
        ranks = [seq.index(k) for k in kws]
        if len(set(kws)) != len(kws):
            raise SqlError("duplicate clause", where)
        if ranks != sorted(ranks):
            raise SqlError(f"clauses out of {self.order} order: {' '.join(kws)}", where)
        if "SELECT" not in kws or "FROM" not in kws:
            raise SqlError("query needs both SELECT and FROM", where)
        if kws[0] != seq[0] and not (self.order == "exec" and kws[0] == "FROM"):
            raise SqlError(f"clauses out of {self.order} order: {' '.join(kws)}", where)

    def _clause(self, span, body, scopes):
        saved = (self.pos, self.end)
        self.pos, self.end = span[0] + 1, span[1]
        try:
            result = body(scopes)
            if self.pos != self.end:
                raise SqlError(f"unexpected token {self.toks[self.pos].surface!r}", self.pos)
        finally:
            self.pos, self.end = saved
        return result

    # -- FROM -----------------------------------------------------------
    def _from(self, start: int, end: int, outer) -> tuple[FromClause, Scope]:
        # collect the full table list first so ON conditions can see every table
        scope: list[tuple[int, str | None]] = []
        i = start + 1
        while i < end:
            tok = self.toks[i]
            if _is(tok, "("):
                if i + 1 < end and _is(self.toks[i + 1], "SELECT", "FROM"):
                    raise SqlError("sub-query in FROM is not supported", i)
                i = self._closing(i, end) + 1
                continue
            if tok.kind == "table" and tok.qualifier != "alias":
                if tok.ref is None:
                    raise SqlError(f"unknown table {tok.surface!r}", i, kind="unknown")
                alias = None
                j = i + 1
                if j < end and _is(self.toks[j], "AS"):
                    j += 1
                if j < end and self.toks[j].kind == "table" and self.toks[j].qualifier == "alias":
                    alias = self.toks[j].surface
                scope.append((tok.ref, alias))
            i += 1
        scope_t = tuple(scope)
        scopes = (scope_t,) + outer

        def body(_):
            refs, ons = [self._table_ref()], []
            joined = True
            while self.peek() is not None:
                if self.accept("JOIN"):
                    refs.append(self._table_ref())
                    ons.append(self._cond(scopes) if self.accept("ON") else None)
                elif self.accept(","):
                    joined = False
                    refs.append(self._table_ref())
                    ons.append(None)
                else:
                    raise SqlError(f"unexpected token {self.peek().surface!r} in FROM", self.pos)
            return FromClause(tuple(refs), tuple(ons), joined)

        return self._clause((start, end), body, scopes), scope_t

    def _table_ref(self) -> TableRef:
        tok = self.peek()
        if tok is None or tok.kind != "table" or tok.qualifier == "alias":
            got = "end of clause" if tok is None else repr(tok.surface)
            raise SqlError(f"expected a table, got {got}", self.pos)
        self.advance()
        alias = None
        if self.accept("AS"):
            a = self.advance()
            if a.kind != "table":
                raise SqlError("expected an alias after AS", self.pos - 1)
            alias = a.surface
        elif self.peek() is not None and self.peek().kind == "table" and self.peek().qualifier == "alias":
            alias = self.advance().surface
        return TableRef(tok.ref, alias)

    # -- clause bodies --------------------------------------------------
    def _select_body(self, scopes) -> Select:
        distinct = self.accept("DISTINCT")
        return Select(self._expr_list(scopes), distinct)

    def _expr_list(self, scopes) -> tuple[Expr, ...]:
        items = [self._expr(scopes)]
        while self.accept(","):
            items.append(self._expr(scopes))
        return tuple(items)

    def _order_items(self, scopes) -> tuple[OrderItem, ...]:
        items = []
        while True:
            e = self._expr(scopes)
            direction = None
            if _is(self.peek(), "ASC", "DESC"):
                direction = self.advance().surface
            items.append(OrderItem(e, direction))
            if not self.accept(","):
                return tuple(items)

    def _limit(self, scopes) -> int:
        digits = []
        while self.peek() is not None and self.peek().kind in ("number", "value"):
            digits.append(self.advance().surface)
        text = "".join(digits)
        if not text.isdigit():
            raise SqlError("LIMIT needs a nonnegative integer", self.pos)
        return int(text)

    # -- conditions -----------------------------------------------------
    def _cond(self, scopes) -> Cond:
        return self._bool("OR", self._and, scopes)

    def _and(self, scopes) -> Cond:
        return self._bool("AND", self._atom, scopes)

    def _bool(self, op, sub, scopes) -> Cond:
        items = [sub(scopes)]
        while self.accept(op):
            items.append(sub(scopes))
        if len(items) == 1:
            return items[0]
        flat = []
        for it in items:
            flat.extend(it.items if isinstance(it, BoolExpr) and it.op == op else (it,))
        return BoolExpr(op, tuple(flat))

    def _atom(self, scopes) -> Cond:
        if _is(self.peek(), "(") and not self._subquery_at(self.pos):
            self.advance()
            c = self._cond(scopes)
            self.expect(")")
            return c
        return self._predicate(scopes)

    def _predicate(self, scopes) -> Predicate:
        left = self._expr(scopes)
        negated = self.accept("NOT")
        tok = self.peek()
        if tok is None or tok.kind != "reserved":
            raise SqlError("expected a comparison", self.pos)
        op = tok.surface
        if op in COMPARISONS and not negated:
            self.advance()
            return Predicate(op, left, self._expr(scopes))
        if op == "IN":
            self.advance()
            if self._subquery_at(self.pos):
                return Predicate("IN", left, self._primary(scopes), negated=negated)
            self.expect("(")
            items = self._expr_list(scopes)
            self.expect(")")
            return Predicate("IN", left, ValueList(items), negated=negated)
        if op == "BETWEEN":
            self.advance()
            lo = self._expr(scopes)
            self.expect("AND")
            return Predicate("BETWEEN", left, lo, self._expr(scopes), negated)
        if op == "LIKE":
            self.advance()
            return Predicate("LIKE", left, self._expr(scopes), negated=negated)
        if op == "IS" and not negated:
            self.advance()
            neg = self.accept("NOT")
            self.expect("NULL")
            return Predicate("IS", left, Literal("NULL"), negated=neg)
        raise SqlError(f"unexpected {op!r} in condition", self.pos)

    # -- expressions ----------------------------------------------------
    def _expr(self, scopes) -> Expr:
        left = self._primary(scopes)
        while _is(self.peek(), *ARITHMETIC):
            op = self.advance().surface
            left = BinaryOp(op, left, self._primary(scopes))
        return left

    def _primary(self, scopes) -> Expr:
        tok = self.peek()
        if tok is None:
            raise SqlError("unexpected end of expression", self.pos)
        if tok.kind == "reserved":
            sym = tok.surface
            if sym in AGGREGATES:
                self.advance()
                self.expect("(")
                distinct = self.accept("DISTINCT")
                arg = self._expr(scopes)
                self.expect(")")
                return AggCall(sym, arg, distinct)
            if sym == "*":
                self.advance()
                return Column(None, "*")
            if sym == "-" and self.peek(1) is not None and self.peek(1).kind == "number":
                self.advance()
                return Literal("-" + self.advance().surface, True)
            if sym == "(":
                if self._subquery_at(self.pos):
                    close = self._closing(self.pos, self.end)
                    saved_end = self.end
                    q = self._query(self.pos + 1, close, scopes)
                    self.pos, self.end = close + 1, saved_end
                    return Subquery(q)
                self.advance()
                e = self._expr(scopes)
                self.expect(")")
                return e
            raise SqlError(f"unexpected {sym!r}", self.pos)
        if tok.kind == "field":
            i = self.pos
            self.advance()
            return Column(self._resolve(i, scopes), tok.surface)
        if tok.kind in ("value", "number"):
            run = []
            while self.peek() is not None and self.peek().kind in ("value", "number"):
                run.append(self.advance())
            if all(t.kind == "number" for t in run):
                return Literal("".join(t.surface for t in run), True)
            return Literal(" ".join(t.surface for t in run), False, run[0].quote)
        raise SqlError(f"unexpected {tok.kind} {tok.surface!r}", self.pos)

    # -- name resolution ------------------------------------------------
    def _resolve(self, i: int, scopes: tuple[Scope, ...]) -> int:
        tok = self.toks[i]
        qual, _, name = tok.surface.rpartition(".")
        s = self.s
        if qual:
            q = qual.lower()
            for scope in scopes:
                for tid, alias in scope:
                    if (alias is not None and alias.lower() == q) or s.tables[tid].name.lower() == q:
                        fid = s.field_id(tid, name)
                        if fid is None:
                            raise SqlError(f"table {s.tables[tid].name} has no field {name!r}", i, kind="unknown")
                        self.resolved[i] = fid
                        return fid
            tid = s.table_id(qual)
            fid = tok.ref if tok.ref is not None else (s.field_id(tid, name) if tid is not None else None)
            if fid is None:
                raise SqlError(f"cannot resolve {tok.surface!r}", i, kind="unknown")
            return self._out_of_scope(i, fid)
        for scope in scopes:
            hits = []
            for tid, _ in scope:
                fid = s.field_id(tid, name)
                if fid is not None and fid not in hits:
                    hits.append(fid)
            if len(hits) == 1 or (hits and tok.ref in hits):
                fid = hits[0] if len(hits) == 1 else tok.ref
                self.resolved[i] = fid
                return fid
            if hits:
                if self.strict:
                    raise SqlError(f"ambiguous field {name!r}", i, kind="ambiguous")
                self.resolved[i] = hits[0]
                return hits[0]
        candidates = s.fields_named(name)
        fid = tok.ref if tok.ref is not None else (candidates[0] if candidates else None)
        if fid is None:
            raise SqlError(f"unknown field {name!r}", i, kind="unknown")
        return self._out_of_scope(i, fid)

    def _out_of_scope(self, i: int, fid: int) -> int:
        err = SqlError(f"field {self.s.qualified_name(fid)} is out of scope", i, kind="scope")
        if self.strict:
            raise err
        self.violations.append(err)
        self.resolved[i] = fid
        return fid


def _set(q: Query, **changes) -> Query:
    from dataclasses import replace

    return replace(q, **changes)


def parse_tokens(tokens: Sequence[SqlToken], s: Schema, order: str | None = None) -> Query:
    return Parser(tokens, s, order=order).parse()


def parse(sql: str | Sequence[SqlToken], s: Schema, order: str | None = None) -> Query:
    """Parse SQL text (or an already classified token list) into a resolved tree.

    ``order`` fixes the expected clause order; by default it is taken from
    the first keyword (SELECT for written order, FROM for execution order).
    """
    tokens = tokenize_sql(sql, s) if isinstance(sql, str) else sql
    return Parser(tokens, s, order=order).parse()
