"""Schema-consistency guards: decode-time masks and the post-hoc static check.

The field mask opens a table's fields once the table token has been emitted;
the transition mask enforces the reserved/schema/value alternation that any
valid linearization obeys.  Neither knows about sub-query scope, so decoded
sequences additionally go through ``static_check``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .schema import Schema
from .sqlkit import EXEC, Parser, SqlError, SqlToken, tokenize_sql
from .sqlkit.ast import AggCall, BoolExpr, Column, Literal, Predicate, Query, tables_used

VIOLATION_KINDS = ("syntax", "scope", "lemma1", "lemma2", "sketch")
# coarse classes used by the transition rule; digits and numbers count as values
CLASSES = ("reserved", "table", "field", "value")


@dataclass(frozen=True)
class Violation:
    kind: str
    position: int
    message: str

    def to_json(self) -> dict:
        return {"kind": self.kind, "position": self.position, "message": self.message}


def token_class(tok: SqlToken) -> str:
    return "value" if tok.kind in ("value", "number") else tok.kind


# -- field mask -----------------------------------------------------------

@dataclass(frozen=True)
class FieldMask:
    """One bit per pointable position; field bits open when their table is emitted."""

    owners: tuple[int | None, ...]  # owning table of each field position, None elsewhere
    opened: frozenset[int] = frozenset()

    @classmethod
    def initial(cls, owners: Sequence[int | None]) -> "FieldMask":
        return cls(tuple(owners))

    @property
    def bits(self) -> np.ndarray:
        return np.array([o is None or o in self.opened for o in self.owners], dtype=bool)


def update_field_mask(xi: FieldMask, emitted: SqlToken, s: Schema | None = None) -> FieldMask:
    if emitted.kind == "table" and emitted.ref is not None and emitted.ref not in xi.opened:
        return FieldMask(xi.owners, xi.opened | {emitted.ref})
    return xi


# -- transition mask ------------------------------------------------------

ALLOWED_AFTER = {
    None: frozenset({"reserved"}),
    "reserved": frozenset(CLASSES),
    "table": frozenset({"reserved"}),
    "field": frozenset({"reserved"}),
    "value": frozenset({"reserved", "value"}),
}


def transition_mask(last_class: str | None, candidate_classes: Sequence[str]) -> np.ndarray:
    """Bit vector over candidates given the class of the last emitted token (None at the start)."""
    allowed = ALLOWED_AFTER[last_class]
    return np.array([c in allowed for c in candidate_classes], dtype=bool)


def apply_masks(dist, *masks, renormalize: bool = True):
    """Zero masked entries and rescale the rest to sum to one.

    Returns ``(masked, all_masked)``; when every entry with mass is masked the
    input is not divided and ``all_masked`` is True.  Works on numpy arrays and
    torch tensors alike.
    """
    out = dist
    for m in masks:
        if m is None:
            continue
        if tuple(m.shape) != tuple(dist.shape):
            raise ValueError(f"mask shape {tuple(m.shape)} does not match distribution {tuple(dist.shape)}")
        out = out * m
    total = out.sum()
    if float(total) <= 0.0:
        return out, True
    return (out / total if renormalize else out), False


# -- sequence scans -------------------------------------------------------

def lemma2_scan(tokens: Sequence[SqlToken]) -> list[Violation]:
    found = []
    prev = None
    for i, tok in enumerate(tokens):
        cls = token_class(tok)
        if cls not in ALLOWED_AFTER[prev]:
            after = "start of sequence" if prev is None else f"a {prev} token"
            found.append(Violation("lemma2", i, f"{cls} token {tok.surface!r} follows {after}"))
        prev = cls
    return found


def lemma1_scan(tokens: Sequence[SqlToken], s: Schema, resolved: dict[int, int] | None = None) -> list[Violation]:
    found = []
    seen: set[int] = set()
    for i, tok in enumerate(tokens):
        if tok.kind == "table" and tok.ref is not None:
            seen.add(tok.ref)
        elif tok.kind == "field":
            fid = tok.ref if tok.ref is not None else (resolved or {}).get(i)
            owners = {s.fields[fid].table} if fid is not None else {s.fields[f].table for f in s.fields_named(tok.name)}
            if not owners & seen:
                found.append(Violation("lemma1", i, f"field {tok.surface!r} precedes its table"))
    return found


def static_check(tokens: str | Sequence[SqlToken], s: Schema) -> list[Violation]:
    """All violations of an execution-order sequence; empty iff it is valid."""
    if isinstance(tokens, str):
        try:
            tokens = tokenize_sql(tokens, s)
        except SqlError as e:
            return [Violation("syntax", e.position or 0, e.message)]
    tokens = list(tokens)
    if not tokens:
        return [Violation("syntax", 0, "empty sequence")]
    found: list[Violation] = []
    parser = Parser(tokens, s, order="exec", strict=False)
    try:
        parser.parse()
    except SqlError as e:
        found.append(Violation("syntax", e.position or 0, e.message))
    found.extend(Violation("scope", e.position, e.message) for e in parser.violations)
    found.extend(lemma1_scan(tokens, s, parser.resolved))
    found.extend(lemma2_scan(tokens))
    return found


# -- WikiSQL sketch -------------------------------------------------------

_SKETCH_AGGS = {"MAX", "MIN", "COUNT", "SUM", "AVG"}
_SKETCH_OPS = {"=", "<", ">"}


def _sketch_column(e) -> bool:
    return isinstance(e, Column) and e.field is not None


def _sketch_pred(c) -> bool:
    return (
        isinstance(c, Predicate)
        and c.op in _SKETCH_OPS
        and not c.negated
        and _sketch_column(c.left)
        and isinstance(c.right, Literal)
    )


def sketch_check(q: Query) -> bool:
    """SELECT [agg] col FROM one table [WHERE col op value AND ...]."""
    if q.set_op or q.group_by or q.having is not None or q.order_by or q.limit is not None:
        return False
    if q.select.distinct or len(q.select.items) != 1 or len(q.from_.tables) != 1:
        return False
    item = q.select.items[0]
    if isinstance(item, AggCall):
        if item.func not in _SKETCH_AGGS or item.distinct or not _sketch_column(item.arg):
            return False
    elif not _sketch_column(item):
        return False
    w = q.where
    if w is None:
        return True
    if isinstance(w, BoolExpr):
        return w.op == "AND" and all(_sketch_pred(c) for c in w.items)
    return _sketch_pred(w)


# -- mutation set ---------------------------------------------------------

def _top_level_span(tokens: Sequence[SqlToken], keyword: str) -> tuple[int, int] | None:
    depth = 0
    start = None
    stops = set(EXEC) | {"UNION", "INTERSECT", "EXCEPT"}
    for i, tok in enumerate(tokens):
        if tok.kind == "reserved" and tok.surface == "(":
            depth += 1
        elif tok.kind == "reserved" and tok.surface == ")":
            depth -= 1
        elif depth == 0 and tok.kind == "reserved" and tok.surface in stops:
            if start is not None:
                return start, i
            if tok.surface == keyword:
                start = i
            elif tok.surface in ("UNION", "INTERSECT", "EXCEPT"):
                return None
    return (start, len(tokens)) if start is not None else None


def mutants(tokens: Sequence[SqlToken], q: Query, s: Schema) -> list[tuple[str, list[SqlToken]]]:
    """Deterministic invalid variants of a valid execution-order sequence.

    * ``out_of_scope``: first field swapped for a field of a table that no FROM mentions
    * ``select_first``: the top-level SELECT clause moved before FROM
    * ``field_after_field``: a second field token inserted right after the first one
    """
    tokens = list(tokens)
    out = []
    first_field = next((i for i, t in enumerate(tokens) if t.kind == "field"), None)
    used = tables_used(q)
    outside = [f for f in range(len(s.fields)) if s.fields[f].table not in used]
    if first_field is not None and outside:
        fid = outside[0]
        m = tokens.copy()
        m[first_field] = SqlToken("field", s.qualified_name(fid), fid)
        out.append(("out_of_scope", m))
    span = _top_level_span(tokens, "SELECT")
    if span is not None:
        a, b = span
        out.append(("select_first", tokens[a:b] + tokens[:a] + tokens[b:]))
    if first_field is not None:
        t = tokens[first_field]
        m = tokens[: first_field + 1] + [t] + tokens[first_field + 1 :]
        out.append(("field_after_field", m))
    return out
