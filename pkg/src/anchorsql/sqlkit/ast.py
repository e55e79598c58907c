"""Clause-structured SQL syntax tree.

Nodes are frozen dataclasses so two trees compare equal exactly when they
denote the same query over the same schema ids.  Aliases, original spellings
and literal quote styles are carried for rendering but excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Iterator, Union


@dataclass(frozen=True)
class Column:
    field: int | None  # None is the star column
    surface: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Literal:
    text: str
    is_number: bool = False
    quote: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class AggCall:
    func: str
    arg: "Expr"
    distinct: bool = False


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Subquery:
    query: "Query"


@dataclass(frozen=True)
class ValueList:
    items: tuple["Expr", ...]


Expr = Union[Column, Literal, AggCall, BinaryOp, Subquery, ValueList]


@dataclass(frozen=True)
class Predicate:
    op: str  # comparison symbol, IN, LIKE, BETWEEN or IS
    left: Expr
    right: Expr
    upper: Expr | None = None  # second bound of BETWEEN
    negated: bool = False


@dataclass(frozen=True)
class BoolExpr:
    op: str  # AND / OR
    items: tuple["Cond", ...]


Cond = Union[Predicate, BoolExpr]


@dataclass(frozen=True)
class TableRef:
    table: int
    alias: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FromClause:
    tables: tuple[TableRef, ...]
    # on[i] is the join condition attached to tables[i + 1]; None for comma joins
    on: tuple[Cond | None, ...] = ()
    joined: bool = True  # JOIN syntax rather than comma list


@dataclass(frozen=True)
class Select:
    items: tuple[Expr, ...]
    distinct: bool = False


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    direction: str | None = None  # ASC, DESC or unspecified


@dataclass(frozen=True)
class Query:
    select: Select
    from_: FromClause
    where: Cond | None = None
    group_by: tuple[Expr, ...] = ()
    having: Cond | None = None
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None
    set_op: str | None = None
    right: "Query | None" = None


SqlAst = Query


def _flatten(value) -> Iterator:
    if isinstance(value, tuple):
        for item in value:
            yield from _flatten(item)
    elif is_dataclass(value):
        yield value


def children(node) -> Iterator:
    if is_dataclass(node):
        for f in fields(node):
            yield from _flatten(getattr(node, f.name))


def walk(node, into_subqueries: bool = True) -> Iterator:
    """Pre-order traversal.

    With ``into_subqueries=False`` nested queries (sub-queries and set
    operation operands) are not entered.
    """
    yield node
    for child in children(node):
        if not into_subqueries and isinstance(child, (Subquery, Query)):
            continue
        yield from walk(child, into_subqueries)


def query_parts(q: Query) -> list[Query]:
    """The query followed by every set-operation operand to its right."""
    parts = [q]
    while parts[-1].right is not None:
        parts.append(parts[-1].right)
    return parts


def literals(q: Query) -> list[Literal]:
    return [n for n in walk(q) if isinstance(n, Literal)]


def textual_values(q: Query) -> list[str]:
    return [lit.text for lit in literals(q) if not lit.is_number]


def tables_used(q: Query) -> set[int]:
    return {n.table for n in walk(q) if isinstance(n, TableRef)}


def strip_aliases(q: Query) -> Query:
    return _map(q, lambda n: replace(n, alias=None) if isinstance(n, TableRef) else n)


def _map(node, fn):
    if isinstance(node, tuple):
        return tuple(_map(x, fn) for x in node)
    if not is_dataclass(node):
        return node
    changes = {f.name: _map(getattr(node, f.name), fn) for f in fields(node)}
    return fn(replace(node, **changes))


def map_nodes(node, fn):
    """Bottom-up rebuild applying ``fn`` to every dataclass node."""
    return _map(node, fn)
