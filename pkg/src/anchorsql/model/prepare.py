"""From (question, schema, gold SQL) to everything the network and search need."""

from __future__ import annotations

from dataclasses import dataclass

from ..anchor import AnchorMatch, MatchConfig, select_anchors
from ..hybrid import HybridSequence, SchemaView, serialize
from ..schema import Schema
from ..sqlkit import Query, SqlError, parse, to_exec_order
from .features import OutputSpace, featurize, output_space, target_symbols
from .net import EncoderInput, ModelConfig, Teacher, teacher


@dataclass
class Prepared:
    question: str
    schema: Schema
    hybrid: HybridSequence
    encoder_input: EncoderInput
    space: OutputSpace
    gold: Query | None = None
    target: list[str] | None = None
    teacher: Teacher | None = None


def encoder_input(h: HybridSequence, cfg: ModelConfig) -> EncoderInput:
    s = h.view.schema
    feats = featurize(h, cfg.word_buckets, cfg.ngram_buckets, cfg.hash_salt)
    positions = [p.source for p in h.pointable if p.kind != "question"]
    meta = []
    for p in h.pointable:
        if p.kind == "table":
            meta.append(None)
        elif p.kind == "field":
            f = s.fields[p.ref]
            meta.append((int(f.is_primary_key), int(h.view.in_foreign_pair(p.ref)), f.type_index))
    return EncoderInput(feats, len(h.question), positions, meta)


def prepare(
    question: str,
    s: Schema,
    cfg: ModelConfig,
    gold_sql: str | Query | None = None,
    anchors: list[AnchorMatch] | None = None,
    view: SchemaView | None = None,
    value_mode: str = "full",
    match_cfg: MatchConfig = MatchConfig(),
) -> Prepared:
    """Serialize one example; with ``gold_sql`` also build the training target.

    ``target`` stays None when the gold query cannot be produced by the
    decoder (a literal that is neither in the question nor all digits).
    """
    if anchors is None:
        anchors = select_anchors(question, s, match_cfg) if value_mode != "none" else []
    h = serialize(question, view or SchemaView.full(s), anchors, value_mode)
    space = output_space(h)
    ex = Prepared(question, s, h, encoder_input(h, cfg), space)
    if gold_sql is not None:
        gold = parse(gold_sql, s) if isinstance(gold_sql, str) else gold_sql
        ex.gold = gold
        try:
            toks = to_exec_order(gold, s)
        except SqlError:
            return ex
        syms = target_symbols(toks, h.question)
        if syms is not None and all(space.positions(x) for x in syms):
            ex.target = syms
            ex.teacher = teacher(syms, space)
    return ex
