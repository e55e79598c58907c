import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from anchorsql.anchor import select_anchors
from anchorsql.hybrid import (
    C,
    CLS,
    SEP,
    T,
    V,
    SchemaView,
    question_words,
    serialize,
    shuffle_and_drop,
    split_name,
)
from anchorsql.schema import build_schema

FIG2 = "What are the names of properties that are either houses or apartments with more than 1 room?"


def _surfaces(h, start, end):
    return [t.surface for t in h.tokens[start:end]]


def test_fig2_values_follow_field(real_estate):
    h = serialize(FIG2, real_estate, select_anchors(FIG2, real_estate))
    fid = real_estate.field_id(real_estate.table_id("Properties"), "property_type_code")
    q = h.c_positions[fid]
    assert _surfaces(h, q, q + 4) == [C, "property", "type", "code"]
    assert _surfaces(h, q + 4, q + 8) == [V, "House", V, "Apartment"]
    assert h.v_spans[fid] == [(q + 4, q + 6), (q + 6, q + 8)]


def test_layout(real_estate):
    h = serialize(FIG2, real_estate)
    words = question_words(FIG2)
    assert h.tokens[0].surface == CLS and h.tokens[-1].surface == SEP
    assert h.question_range == (1, 1 + len(words))
    assert h.tokens[1 + len(words)].surface == SEP
    assert [t.surface for t in h.tokens if t.kind == "special"].count(V) == 0
    assert len(h.t_positions) == len(real_estate.tables)
    assert len(h.c_positions) == len(real_estate.fields)
    assert h.v_spans == {}


def test_value_marker_only(real_estate):
    anchors = select_anchors(FIG2, real_estate)
    h = serialize(FIG2, real_estate, anchors, value_mode="marker")
    assert Counter(t.surface for t in h.tokens)[V] == len(anchors)
    assert not any(t.kind == "value" for t in h.tokens)
    with pytest.raises(ValueError):
        serialize(FIG2, real_estate, anchors, value_mode="bogus")


def test_unknown_anchor_field(real_estate, pets):
    bad = select_anchors("Which students from WAS have a dog?", pets)
    bad = [a.__class__(99, *[getattr(a, k) for k in ("cell_value", "span", "question_text", "matched", "beta_q", "beta_c")]) for a in bad]
    with pytest.raises(ValueError, match="unknown field"):
        serialize("x", real_estate, bad)


def test_pointable_counts():
    s = build_schema("d", {"a": [(f"f{i}", "text") for i in range(3)], "b": [(f"g{i}", "text") for i in range(3)]})
    h = serialize("one two three four five", s)
    assert len(h.pointable) == 13
    assert [p.kind for p in h.pointable] == ["question"] * 5 + ["table"] * 2 + ["field"] * 6
    tiny = build_schema("t", {"x": [("y", "text")]})
    assert len(serialize("hi", tiny).pointable) == 3


def test_split_name():
    assert split_name("property_type_code") == ["property", "type", "code"]
    assert split_name("PRESIDENT_Vote") == ["president", "vote"]
    assert split_name("StuID") == ["stu", "id"]
    assert split_name("LName") == ["l", "name"]


def test_question_tokens_keep_punctuation():
    assert question_words("How many cats?") == ["How", "many", "cats", "?"]
    assert question_words("price > 2.5") == ["price", ">", "2.5"]


def test_shuffle_and_drop_examples():
    s = build_schema("d", {f"t{i}": [("x", "text")] for i in range(4)})
    rng = random.Random(0)
    assert sorted(shuffle_and_drop(s, {0}, 0.0, rng).tables) == [0, 1, 2, 3]
    one = build_schema("o", {"t": [("x", "text")]})
    for _ in range(20):
        assert shuffle_and_drop(one, {0}, 1.0, rng).tables == (0,)
    drops = Counter()
    for _ in range(10_000):
        v = shuffle_and_drop(s, {2}, 1.0, rng)
        assert 2 in v.tables and len(v.tables) == 3
        drops[({0, 1, 2, 3} - set(v.tables)).pop()] += 1
    assert set(drops) == {0, 1, 3}
    assert all(abs(n / 10_000 - 1 / 3) < 0.03 for n in drops.values())
    with pytest.raises(ValueError):
        shuffle_and_drop(s, {0}, 1.5, rng)


def test_drop_removes_view_foreign_pairs(schemas):
    s = schemas["school"]
    view = SchemaView(s, (0, 2))  # student, enrollment
    course_fk = [fk for fk in s.foreign_keys if s.tables[s.fields[fk.target].table].name == "course"][0]
    assert not view.in_foreign_pair(course_fk.source)
    assert SchemaView.full(s).in_foreign_pair(course_fk.source)


# -- properties ---------------------------------------------------------------

def _strip_values(h):
    drop = {i for spans in h.v_spans.values() for a, b in spans for i in range(a, b)}
    return [t for i, t in enumerate(h.tokens) if i not in drop]


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_serialization_invariants(data, train_records, schemas):
    r = data.draw(st.sampled_from(train_records))
    s = schemas[r["db_id"]]
    seed = data.draw(st.integers(0, 10_000))
    gold = data.draw(st.sets(st.integers(0, len(s.tables) - 1), max_size=1))
    view = shuffle_and_drop(s, gold, 0.5, random.Random(seed))
    again = shuffle_and_drop(s, gold, 0.5, random.Random(seed))
    assert view == again and gold <= set(view.tables)
    anchors = select_anchors(r["question"], s)
    h = serialize(r["question"], view, anchors)
    plain = serialize(r["question"], view)
    assert _strip_values(h) == plain.tokens
    for t, p in h.t_positions.items():
        assert h.tokens[p].surface == T
        assert _surfaces(h, p + 1, p + 1 + len(split_name(s.tables[t].name))) == split_name(s.tables[t].name)
    for f, p in h.c_positions.items():
        assert h.tokens[p].surface == C
        n = split_name(s.fields[f].name)
        assert _surfaces(h, p + 1, p + 1 + len(n)) == n
    assert len(h.pointable) == len(h.question) + len(view.tables) + len(view.fields)
    assert all(h.tokens[p.source].kind != "value" and h.tokens[p.source].surface != V for p in h.pointable)
