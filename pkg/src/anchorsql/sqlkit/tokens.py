"""Lexing and schema-aware token classification."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..schema import Schema
from ..vocab import reserved_set

KINDS = ("reserved", "table", "field", "value", "number")


class SqlError(ValueError):
    """Lexical, grammar or resolution error at a token position."""

    def __init__(self, message: str, position: int | None = None, kind: str = "syntax"):
        super().__init__(message if position is None else f"{message} (at token {position})")
        self.message = message
        self.position = position
        self.kind = kind


@dataclass(frozen=True)
class SqlToken:
    kind: str
    surface: str
    ref: int | None = None
    qualifier: str | None = field(default=None, compare=False)
    quote: str | None = field(default=None, compare=False)

    @property
    def name(self) -> str:
        """Unqualified identifier text."""
        return self.surface.rsplit(".", 1)[-1]

    @property
    def upper(self) -> str:
        return self.surface.upper()


_LEX = re.compile(
    r"""
     (?P<ws>\s+)
    |(?P<str>'(?:[^']|'')*'|"(?:[^"]|"")*")
    |(?P<num>\d+(?:\.\d+)?(?![A-Za-z_]))
    |(?P<kw2>(?:GROUP|ORDER)\s*BY\b)
    |(?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?)
    |(?P<op>!=|<>|<=|>=|[=<>+\-*/%(),.;])
    """,
    re.X | re.I,
)

_FROM_ENDERS = {"WHERE", "GROUP BY", "HAVING", "ORDER BY", "LIMIT", "SELECT", "UNION", "INTERSECT", "EXCEPT", ")"}


def lex(sql: str) -> list[tuple[str, str, int]]:
    """Split into (category, text, char offset) triples."""
    out = []
    pos = 0
    while pos < len(sql):
        m = _LEX.match(sql, pos)
        if m is None:
            raise SqlError(f"unexpected character {sql[pos]!r} at offset {pos}", kind="syntax")
        cat = m.lastgroup
        text = m.group()
        if cat == "kw2":
            out.append(("kw", "GROUP BY" if text[0] in "gG" else "ORDER BY", m.start()))
        elif cat == "ident" and "." not in text and text.upper() in reserved_set():
            out.append(("kw", text.upper(), m.start()))
        elif cat != "ws":
            out.append((cat, text, m.start()))
        pos = m.end()
    return out


def _alias_bindings(raw, s: Schema) -> dict[str, set[int]]:
    binds: dict[str, set[int]] = {}
    for i, (cat, text, _) in enumerate(raw):
        if cat != "ident" or "." in text:
            continue
        tid = s.table_id(text)
        if tid is None or i + 1 >= len(raw):
            continue
        nxt = raw[i + 1]
        if nxt[0] == "kw" and nxt[1] == "AS" and i + 2 < len(raw) and raw[i + 2][0] == "ident":
            binds.setdefault(raw[i + 2][1].lower(), set()).add(tid)
    return binds


def tokenize_sql(sql: str, s: Schema) -> list[SqlToken]:
    """Classify every token as reserved, table, field, value or number.

    Schema identifiers are matched case-insensitively.  Field tokens carry the
    resolved field id when the tokenizer can decide it alone (a table or a
    uniquely bound alias as qualifier, or a field name unique in the schema);
    otherwise ``ref`` is left for the parser's scope resolution.
    """
    raw = lex(sql)
    binds = _alias_bindings(raw, s)
    out: list[SqlToken] = []
    in_from = False
    after_on = False
    for i, (cat, text, off) in enumerate(raw):
        if cat == "kw" or cat == "op":
            sym = text.upper()
            if sym == "FROM":
                in_from, after_on = True, False
            elif sym == "JOIN":
                after_on = False
            elif sym == "ON":
                after_on = True
            elif sym in _FROM_ENDERS:
                in_from = False
            out.append(SqlToken("reserved", sym))
        elif cat == "str":
            q = text[0]
            out.append(SqlToken("value", text[1:-1].replace(q * 2, q), quote=q))
        elif cat == "num":
            out.append(SqlToken("number", text))
        else:
            out.append(_classify_ident(text, out, in_from and not after_on, binds, s, i))
    return out


def _classify_ident(text, out, table_slot, binds, s: Schema, i: int) -> SqlToken:
    prev = out[-1] if out else None
    prev_sym = prev.surface if prev is not None and prev.kind == "reserved" else None
    if "." not in text:
        if table_slot and prev_sym in ("FROM", "JOIN", ","):
            tid = s.table_id(text)
            if tid is None:
                raise SqlError(f"unknown table {text!r}", i, kind="unknown")
            return SqlToken("table", s.tables[tid].name, tid)
        if prev_sym == "AS" or (table_slot and prev is not None and prev.kind == "table"):
            # alias binding: a table-kind token naming the aliased table
            owner = out[-2] if prev_sym == "AS" and len(out) > 1 else prev
            tid = owner.ref if owner is not None and owner.kind == "table" else None
            return SqlToken("table", text, tid, qualifier="alias")
        fids = s.fields_named(text)
        if fids:
            return SqlToken("field", text, fids[0] if len(fids) == 1 else None)
        tid = s.table_id(text)
        if tid is not None:
            return SqlToken("table", s.tables[tid].name, tid)
        raise SqlError(f"unknown identifier {text!r}", i, kind="unknown")
    qual, name = text.split(".", 1)
    tid = s.table_id(qual)
    if tid is None:
        bound = binds.get(qual.lower(), set())
        tid = next(iter(bound)) if len(bound) == 1 else None
        if tid is None and not bound:
            raise SqlError(f"unknown qualifier {qual!r}", i, kind="unknown")
    fid = s.field_id(tid, name) if tid is not None else None
    if tid is not None and fid is None:
        raise SqlError(f"unknown field {text!r}", i, kind="unknown")
    if tid is None and not s.fields_named(name):
        raise SqlError(f"unknown field {text!r}", i, kind="unknown")
    return SqlToken("field", text, fid, qualifier=qual)
