"""SQL tokenizer, parser and clause-order transformation for the Spider subset."""

from .ast import (
    AggCall,
    BinaryOp,
    BoolExpr,
    Column,
    FromClause,
    Literal,
    OrderItem,
    Predicate,
    Query,
    Select,
    SqlAst,
    Subquery,
    TableRef,
    ValueList,
    query_parts,
    strip_aliases,
    tables_used,
    textual_values,
    walk,
)
from .parser import EXEC, WRITTEN, Parser, parse
from .render import linearize, normalize, render_sql, render_tokens, to_exec_order, to_written
from .tokens import KINDS, SqlError, SqlToken, lex, tokenize_sql

__all__ = [
    "AggCall", "BinaryOp", "BoolExpr", "Column", "EXEC", "FromClause", "KINDS", "Literal",
    "OrderItem", "Parser", "Predicate", "Query", "Select", "SqlAst", "SqlError", "SqlToken",
    "Subquery", "TableRef", "ValueList", "WRITTEN", "lex", "linearize", "normalize", "parse",
    "query_parts", "render_sql", "render_tokens", "strip_aliases", "tables_used",
    "textual_values", "to_exec_order", "to_written", "tokenize_sql", "walk",
]
