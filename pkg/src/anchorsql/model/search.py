"""Guided beam search, static filtering, fallback and ensembling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import torch

from ..guard import ALLOWED_AFTER, FieldMask, apply_masks, sketch_check, static_check, update_field_mask
from ..sqlkit import SqlError, SqlToken, parse, render_tokens, to_written
from .features import COPY_KINDS, EOS_SYMBOL, symbol_token
from .net import AnchorNet, selective_read
from .prepare import Prepared


@dataclass
class Hypothesis:
    symbols: list[str]
    logp: float
    states: list  # per member (h, c), each 1 x n
    alphas: list  # per member last-head attention of the previous step, 1 x P
    p_gens: list  # per member previous p_gen, 1-element tensor
    xi: FieldMask
    last_class: str | None = None


@dataclass
class DecodeResult:
    prediction: list[SqlToken]  # execution order
    sql: str  # written order
    beam_rank: int | None  # rank of the chosen hypothesis among finished ones, None on fallback
    fell_back: bool
    ranked: list[list[str]] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)


class _Member:
    """One model bound to one encoded example."""

    def __init__(self, model: AnchorNet, ex: Prepared):
        self.model = model
        enc = model.encoder([ex.encoder_input])
        self.memory = enc.memory
        self.mask = enc.memory_mask
        self.values = model.decoder.project(enc.memory)
        self.init = enc.init

    def step(self, hyps: Sequence[Hypothesis], k: int, prev: list[tuple[int, int]], match: torch.Tensor):
        B = len(hyps)
        mem = self.memory.expand(B, -1, -1)
        vals = self.values.expand(B, -1, -1, -1)
        mask = self.mask.expand(B, -1)
        h = torch.cat([x.states[k][0] for x in hyps])
        c = torch.cat([x.states[k][1] for x in hyps])
        alpha = torch.cat([x.alphas[k] for x in hyps])
        pg = torch.cat([x.p_gens[k] for x in hyps])
        vi = torch.tensor([p[0] for p in prev])
        ki = torch.tensor([p[1] for p in prev])
        e = self.model.step_inputs(vi, ki)
        zeta = selective_read(alpha, match, mem)
        return self.model.decoder.step(e, zeta, pg, (h, c), vals, mask)


def _prev_inputs(sym: str | None, ex: Prepared) -> tuple[int, int]:
    if sym is None:
        return -2, -1
    sp = ex.space
    for i in range(sp.n_vocab):
        if sp.symbols[sp.pos_symbol[i]] == sym:
            return i, -1
    kind = sym.split(":", 1)[0]
    return -1, COPY_KINDS.index("question" if kind == "value" else kind)


def fallback_tokens(ex: Prepared) -> list[SqlToken]:
    s = ex.schema
    t = SqlToken("table", s.tables[0].name, 0)
    return [SqlToken("reserved", "FROM"), t, SqlToken("reserved", "SELECT"), SqlToken("reserved", "COUNT"),
            SqlToken("reserved", "("), SqlToken("reserved", "*"), SqlToken("reserved", ")")]


def _written(tokens: list[SqlToken], ex: Prepared) -> str:
    try:
        return to_written(tokens, ex.schema)
    except SqlError:
        return render_tokens(tokens)


def beam_search(
    models: AnchorNet | Sequence[AnchorNet],
    ex: Prepared,
    width: int = 16,
    max_len: int = 200,
    guided: bool = True,
    static: bool = True,
    sketch: bool = False,
    renormalize: bool = True,
) -> DecodeResult:
    """Decode one example with one model or an averaged ensemble.

    Finished hypotheses are ranked by raw log-probability; the first that
    passes the static check (and the sketch check when ``sketch``) wins,
    otherwise the fallback query is returned.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    models = [models] if isinstance(models, AnchorNet) else list(models)
    sp = ex.space
    n_sym = len(sp.symbols)
    pos_sym = torch.tensor(sp.pos_symbol)
    sym_class = [""] * n_sym
    for p, sid in enumerate(sp.pos_symbol):
        sym_class[sid] = sp.pos_class[p]
    tmasks = {}
    field_owner = [None] * sp.n_vocab + list(sp.owners)
    n_vocab = sp.n_vocab
    P = sp.size - n_vocab

    with torch.no_grad():
        members = [_Member(m, ex) for m in models]
        dtype = members[0].memory.dtype
        for last, allowed in ALLOWED_AFTER.items():
            tmasks[last] = torch.tensor([c in allowed for c in sp.pos_class], dtype=dtype)
        start = Hypothesis(
            [], 0.0,
            [m.init for m in members],
            [torch.zeros(1, P, dtype=dtype) for _ in members],
            [torch.zeros(1, dtype=dtype) for _ in members],
            FieldMask.initial(field_owner),
        )
        live = [start]
        finished: list[Hypothesis] = []
        for _ in range(max_len):
            if not live:
                break
            prev_syms = [h.symbols[-1] if h.symbols else None for h in live]
            prev = [_prev_inputs(s, ex) for s in prev_syms]
            match = torch.zeros(len(live), P, dtype=dtype)
            for b, s in enumerate(prev_syms):
                if s is not None:
                    match[b, sp.pointable_positions(s)] = 1.0
            outs = [m.step(live, k, prev, match) for k, m in enumerate(members)]
            usable = [True] * len(live)
            masked = []
            for out in outs:
                rows = out.p_out
                if guided:
                    rows = rows.clone()
                    for b, h in enumerate(live):
                        xi = torch.from_numpy(h.xi.bits).to(dtype)
                        rows[b], dead = apply_masks(rows[b], xi, tmasks[h.last_class], renormalize=renormalize)
                        usable[b] = usable[b] and not dead
                masked.append(rows)
            dist = ensemble_step(masked)
            sym_p = torch.zeros(len(live), n_sym, dtype=dtype).index_add_(1, pos_sym, dist)
            scores = torch.log(sym_p) + torch.tensor([h.logp for h in live], dtype=dtype).unsqueeze(1)
            for b in range(len(live)):
                if not usable[b]:
                    scores[b] = float("-inf")
            flat = scores.flatten()
            k = min(flat.numel(), 2 * width)
            top = torch.topk(flat, k)
            new_live = []
            for score, idx in zip(top.values.tolist(), top.indices.tolist()):
                if score == float("-inf") or len(new_live) >= width:
                    break
                b, sid = divmod(idx, n_sym)
                h = live[b]
                sym = sp.symbols[sid]
                nh = Hypothesis(
                    h.symbols + [sym], score,
                    [(o.state[0][b : b + 1], o.state[1][b : b + 1]) for o in outs],
                    [o.alphas[b : b + 1, -1] for o in outs],
                    [o.p_gen[b : b + 1] for o in outs],
                    update_field_mask(h.xi, symbol_token(sym, sp, ex.hybrid)),
                    sym_class[sid],
                )
                if sym == EOS_SYMBOL:
                    finished.append(nh)
                else:
                    new_live.append(nh)
            live = new_live
            if len(finished) >= width:
                best = sorted(h.logp for h in finished)[-width]
                if not live or max(h.logp for h in live) <= best:
                    break

    finished.sort(key=lambda h: -h.logp)
    ranked = [h.symbols for h in finished]
    scores = [h.logp for h in finished]
    for rank, h in enumerate(finished):
        if h.symbols and h.symbols[-1] != EOS_SYMBOL:
            continue
        toks = [symbol_token(s, sp, ex.hybrid) for s in h.symbols if s != EOS_SYMBOL]
        if static:
            if static_check(toks, ex.schema):
                continue
            if sketch:
                try:
                    if not sketch_check(parse(toks, ex.schema, order="exec")):
                        continue
                except SqlError:
                    continue
        return DecodeResult(toks, _written(toks, ex), rank, False, ranked, scores)
    toks = fallback_tokens(ex)
    return DecodeResult(toks, _written(toks, ex), None, True, ranked, scores)


def ensemble_step(dists: Sequence[torch.Tensor]) -> torch.Tensor:
    """Mean of member step distributions that share one support."""
    shapes = {tuple(d.shape) for d in dists}
    if len(shapes) != 1:
        raise ValueError(f"ensemble members disagree on the step support: {sorted(shapes)}")
    return torch.stack(list(dists)).mean(0)

