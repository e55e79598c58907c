"""Fuzzy matching of question text against field picklists (anchor texts)."""

from __future__ import annotations

import difflib
import re
from dataclasses import asdict, dataclass
from typing import Sequence

from .schema import Schema

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)$")


@dataclass(frozen=True)
class RawMatch:
    matched: str  # s_m, lowercased
    match_span: tuple[int, int]  # character range of s_m in the question
    span: tuple[int, int]  # character range of the whole-word phrase s_q
    question_text: str  # s_q with question casing


@dataclass(frozen=True)
class AnchorMatch:
    field: int
    cell_value: str
    span: tuple[int, int]
    question_text: str
    matched: str
    beta_q: float
    beta_c: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["span"] = list(self.span)
        return d


@dataclass(frozen=True)
class MatchConfig:
    k: int = 2
    theta_q: float = 0.5
    theta_c: float = 0.8
    exclude_numbers: bool = True
    # False: keep beta_c >= theta_c (default).  True: keep beta_c <= theta_c.
    cell_ceiling: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        for name in ("theta_q", "theta_c"):
            if not 0.0 <= getattr(self, name) <= 1.5:
                raise ValueError(f"{name} must lie in [0, 1.5]")


def is_number(text: str) -> bool:
    return bool(_NUMBER_RE.match(text.strip()))


def _left_boundary(s: str, i: int) -> int | None:
    for p in range(i, max(0, i - 2) - 1, -1):
        if p == 0 or not s[p - 1].isalnum():
            return p
    return None


def _right_boundary(s: str, j: int) -> int | None:
    for p in range(j, min(len(s), j + 2) + 1):
        if p == len(s) or not s[p].isalnum():
            return p
    return None


def _trim(s: str, a: int, b: int, size: int) -> tuple[int, int, int]:
    while size and not s[a].isalnum():
        a, b, size = a + 1, b + 1, size - 1
    while size and not s[a + size - 1].isalnum():
        size -= 1
    return a, b, size


def longest_boundary_match(question: str, cell: str) -> RawMatch | None:
    """Longest common substring of the lowercased strings, validated on word boundaries.

    A word boundary must exist within two characters of each end of the match,
    both in the question and in the cell, otherwise there is no match.  The
    question-side boundaries delimit the whole-word phrase ``s_q``.
    """
    if not question or not cell:
        return None
    q, c = question.lower(), cell.strip().lower()
    a, b, size = difflib.SequenceMatcher(None, q, c, autojunk=False).find_longest_match(0, len(q), 0, len(c))
    a, b, size = _trim(q, a, b, size)
    if size == 0:
        return None
    start, end = _left_boundary(q, a), _right_boundary(q, a + size)
    if start is None or end is None:
        return None
    if _left_boundary(c, b) is None or _right_boundary(c, b + size) is None:
        return None
    return RawMatch(q[a : a + size], (a, a + size), (start, end), question[start:end])


def score(m: RawMatch, cell: str) -> tuple[float, float]:
    """(beta_q, beta_c) = (|s_m| / |s_q|, |s_c| / |s_q|) in characters."""
    sq = len(m.question_text.lower())
    return len(m.matched) / sq, len(cell.strip().lower()) / sq


def _passes(bq: float, bc: float, m: RawMatch, cfg: MatchConfig) -> bool:
    if bq < cfg.theta_q:
        return False
    if cfg.cell_ceiling and bc > cfg.theta_c:
        return False
    if not cfg.cell_ceiling and bc < cfg.theta_c:
        return False
    if cfg.exclude_numbers and is_number(m.question_text):
        return False
    return True


def field_matches(question: str, values: Sequence[str], fid: int, cfg: MatchConfig) -> list[AnchorMatch]:
    found = []
    for value in values:
        if not value.strip():
            continue
        m = longest_boundary_match(question, value)
        if m is None:
            continue
        bq, bc = score(m, value)
        if _passes(bq, bc, m, cfg):
            found.append(AnchorMatch(fid, value, m.span, m.question_text, m.matched, bq, bc))
    found.sort(key=lambda a: (-a.beta_q, -len(a.matched), a.span[0]))
    kept = found[: cfg.k]
    kept.sort(key=lambda a: a.span[0])
    return kept


def select_anchors(question: str, s: Schema, cfg: MatchConfig = MatchConfig()) -> list[AnchorMatch]:
    out: list[AnchorMatch] = []
    for fid, f in enumerate(s.fields):
        if f.picklist:
            out.extend(field_matches(question, f.picklist, fid, cfg))
    return out


def approx_precision_recall(
    anchors: Sequence[Sequence[str]],
    gold_values: Sequence[Sequence[str]],
) -> tuple[float, float]:
    """Corpus-level (p', r') in percent; field association is not checked.

    With no anchors (or no gold values) in the whole corpus the corresponding
    figure is reported as 0.
    """
    if len(anchors) != len(gold_values):
        raise ValueError(f"length mismatch: {len(anchors)} anchor lists vs {len(gold_values)} gold lists")
    hit_p = total_p = hit_r = total_r = 0
    for pred, gold in zip(anchors, gold_values):
        p = [v.strip().lower() for v in pred]
        g = [v.strip().lower() for v in gold]
        gs, ps = set(g), set(p)
        hit_p += sum(v in gs for v in p)
        total_p += len(p)
        hit_r += sum(v in ps for v in g)
        total_r += len(g)
    precision = 100.0 * hit_p / total_p if total_p else 0.0
    recall = 100.0 * hit_r / total_r if total_r else 0.0
    return precision, recall
