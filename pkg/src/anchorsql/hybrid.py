"""Tagged question-schema serialization with anchor texts, and schema-view augmentation."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .anchor import AnchorMatch
from .schema import Schema

CLS, SEP, T, C, V = "[CLS]", "[SEP]", "[T]", "[C]", "[V]"
SPECIALS = (CLS, SEP, T, C, V)
VALUE_MODES = ("full", "marker", "none")

_WORD = re.compile(r"\d+(?:\.\d+)?|[^\W_]+|[^\w\s]|_")
_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


def tokenize_question(text: str) -> list[tuple[str, int, int]]:
    """(surface, start, end) words; punctuation marks are separate tokens."""
    return [(m.group(), m.start(), m.end()) for m in _WORD.finditer(text)]


def question_words(text: str) -> list[str]:
    return [w for w, _, _ in tokenize_question(text)]


def split_name(name: str) -> list[str]:
    """Schema identifier to lowercase words: snake_case, camelCase and spaces."""
    words = []
    for part in re.split(r"[\s_]+", name):
        words.extend(w.lower() for w in _CAMEL.findall(part))
    return words or [name.lower()]


@dataclass(frozen=True)
class HToken:
    kind: str  # question | special | schema | value
    surface: str

    @property
    def key(self) -> str:
        return self.surface if self.kind == "special" else self.surface.lower()


@dataclass(frozen=True)
class SchemaView:
    """A schema with its tables in a chosen order, possibly missing some tables."""

    schema: Schema
    tables: tuple[int, ...]

    @classmethod
    def full(cls, s: Schema) -> "SchemaView":
        return cls(s, tuple(range(len(s.tables))))

    @property
    def fields(self) -> list[int]:
        return [f for t in self.tables for f in self.schema.tables[t].fields]

    def in_foreign_pair(self, fid: int) -> bool:
        present = set(self.tables)
        fs = self.schema.fields
        return any(
            fid in (fk.source, fk.target) and fs[fk.source].table in present and fs[fk.target].table in present
            for fk in self.schema.foreign_keys
        )

    def contains_field(self, fid: int) -> bool:
        return self.schema.fields[fid].table in self.tables


@dataclass(frozen=True)
class Pointable:
    kind: str  # question | table | field
    key: str  # lowercase word for questions; qualified name for schema items
    surface: str
    ref: int | None  # schema id for tables and fields
    source: int  # index into the serialized sequence


@dataclass
class HybridSequence:
    tokens: list[HToken]
    question: list[str]
    question_range: tuple[int, int]
    t_positions: dict[int, int]
    c_positions: dict[int, int]
    v_spans: dict[int, list[tuple[int, int]]]
    view: SchemaView
    anchors: list[AnchorMatch] = field(default_factory=list)
    pointable: list[Pointable] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def to_json(self) -> dict:
        return {
            "tokens": [[t.kind, t.surface] for t in self.tokens],
            "question_range": list(self.question_range),
            "t_positions": {str(k): v for k, v in sorted(self.t_positions.items())},
            "c_positions": {str(k): v for k, v in sorted(self.c_positions.items())},
            "v_spans": {str(k): [list(x) for x in v] for k, v in sorted(self.v_spans.items())},
            "tables": list(self.view.tables),
            "anchors": [a.to_json() for a in self.anchors],
        }


def serialize(
    question: str | Sequence[str],
    s: Schema | SchemaView,
    anchors: Iterable[AnchorMatch] = (),
    value_mode: str = "full",
) -> HybridSequence:
    """Build ``[CLS] Q [SEP] [T] t1 [C] c11 ... [SEP]`` with ``[V] value`` after anchored fields.

    Anchors on fields of tables absent from the view are dropped with their
    table.  ``value_mode`` "marker" keeps the [V] tokens but not the value
    words; "none" omits both.
    """
    if value_mode not in VALUE_MODES:
        raise ValueError(f"value_mode must be one of {VALUE_MODES}")
    view = s if isinstance(s, SchemaView) else SchemaView.full(s)
    schema = view.schema
    words = question_words(question) if isinstance(question, str) else list(question)
    by_field: dict[int, list[AnchorMatch]] = {}
    kept = []
    for a in anchors:
        if not 0 <= a.field < len(schema.fields):
            raise ValueError(f"anchor references unknown field {a.field}")
        if view.contains_field(a.field):
            by_field.setdefault(a.field, []).append(a)
            kept.append(a)
    for lst in by_field.values():
        lst.sort(key=lambda a: a.span[0])

    toks = [HToken("special", CLS)] + [HToken("question", w) for w in words] + [HToken("special", SEP)]
    q_range = (1, 1 + len(words))
    t_pos: dict[int, int] = {}
    c_pos: dict[int, int] = {}
    v_spans: dict[int, list[tuple[int, int]]] = {}
    for t in view.tables:
        t_pos[t] = len(toks)
        toks.append(HToken("special", T))
        toks.extend(HToken("schema", w) for w in split_name(schema.tables[t].name))
        for f in schema.tables[t].fields:
            c_pos[f] = len(toks)
            toks.append(HToken("special", C))
            toks.extend(HToken("schema", w) for w in split_name(schema.fields[f].name))
            if value_mode == "none":
                continue
            for a in by_field.get(f, ()):
                start = len(toks)
                toks.append(HToken("special", V))
                if value_mode == "full":
                    toks.extend(HToken("value", w) for w in question_words(a.cell_value))
                v_spans.setdefault(f, []).append((start, len(toks)))
    toks.append(HToken("special", SEP))
    h = HybridSequence(toks, words, q_range, t_pos, c_pos, v_spans, view, kept)
    h.pointable = pointable_view(h)
    return h


def pointable_view(h: HybridSequence) -> list[Pointable]:
    """X~: question words, then [T] positions, then [C] positions (view order)."""
    s = h.view.schema
    out = [Pointable("question", w.lower(), w, None, h.question_range[0] + i) for i, w in enumerate(h.question)]
    for t in h.view.tables:
        out.append(Pointable("table", s.tables[t].name.lower(), s.tables[t].name, t, h.t_positions[t]))
    for f in h.view.fields:
        name = s.qualified_name(f)
        out.append(Pointable("field", name.lower(), name, f, h.c_positions[f]))
    return out


def shuffle_and_drop(s: Schema, gold_tables: Iterable[int], p_drop: float, rng: random.Random) -> SchemaView:
    """Random table order; with probability ``p_drop`` one non-gold table is removed."""
    if not 0.0 <= p_drop <= 1.0:
        raise ValueError("p_drop must lie in [0, 1]")
    order = list(range(len(s.tables)))
    rng.shuffle(order)
    gold = set(gold_tables)
    if rng.random() < p_drop:
        candidates = [t for t in order if t not in gold]
        if candidates:
            order.remove(rng.choice(sorted(candidates)))
    return SchemaView(s, tuple(order))
