"""Slow reference implementations used only as test oracles."""

import dataclasses
import re

from anchorsql.sqlkit.ast import BoolExpr, Literal, Query, Select, ValueList, map_nodes


def lcs_substring(q, c):
    """Longest common substring by exhaustive extension; ties go to the earliest (i, j)."""
    best = (0, 0, 0)
    for i in range(len(q)):
        for j in range(len(c)):
            k = 0
            while i + k < len(q) and j + k < len(c) and q[i + k] == c[j + k]:
                k += 1
            if k > best[2]:
                best = (i, j, k)
    return best


def _word_edge(s, p):
    return p == 0 or p == len(s) or not s[p - 1].isalnum() or not s[p].isalnum()


def brute_match(question, cell):
    q, c = question.lower(), cell.strip().lower()
    i, j, k = lcs_substring(q, c)
    while k and not q[i].isalnum():
        i, j, k = i + 1, j + 1, k - 1
    while k and not q[i + k - 1].isalnum():
        k -= 1
    if not k:
        return None

    def left(s, p):
        cands = [x for x in range(max(0, p - 2), p + 1) if x == 0 or not s[x - 1].isalnum()]
        return max(cands) if cands else None

    def right(s, p):
        cands = [x for x in range(p, min(len(s), p + 2) + 1) if x == len(s) or not s[x].isalnum()]
        return min(cands) if cands else None

    a, b = left(q, i), right(q, i + k)
    if a is None or b is None or left(c, j) is None or right(c, j + k) is None:
        return None
    return q[i:i + k], (a, b), question[a:b]


def brute_anchors(question, schema, k=2, theta_q=0.5, theta_c=0.8, ceiling=False):
    out = []
    for fid, f in enumerate(schema.fields):
        found = []
        for v in f.picklist:
            if not v.strip():
                continue
            m = brute_match(question, v)
            if m is None:
                continue
            sm, span, sq = m
            bq = len(sm) / len(sq)
            bc = len(v.strip()) / len(sq)
            ok_c = bc <= theta_c if ceiling else bc >= theta_c
            numeric = re.fullmatch(r"[+-]?(\d+\.?\d*|\.\d+)", sq.strip()) is not None
            if bq >= theta_q and ok_c and not numeric:
                found.append((fid, v, span, sq, sm, bq, bc))
        found.sort(key=lambda x: (-x[5], -len(x[4]), x[2][0]))
        out.extend(sorted(found[:k], key=lambda x: x[2][0]))
    return out


def greedy_decode(model, ex, max_len=60):
    """Step-by-step argmax decoding with both guard masks, written without the beam machinery."""
    import torch

    from anchorsql.guard import ALLOWED_AFTER, apply_masks
    from anchorsql.model.features import COPY_KINDS, EOS_SYMBOL
    from anchorsql.model.net import selective_read

    sp = ex.space
    with torch.no_grad():
        enc = model.encoder([ex.encoder_input])
        values = model.decoder.project(enc.memory)
        state = enc.init
        P = enc.memory.shape[1]
        alpha = torch.zeros(1, P)
        p_gen = torch.zeros(1)
        opened = set()
        last_class = None
        prev = None
        out = []
        for _ in range(max_len):
            if prev is None:
                vi, ki = -2, -1
            elif prev.startswith("kw:") or (prev.startswith("value:") and prev in [sp.symbols[sp.pos_symbol[i]] for i in range(sp.n_vocab)]):
                vi = [sp.symbols[sp.pos_symbol[i]] for i in range(sp.n_vocab)].index(prev)
                ki = -1
            else:
                vi = -1
                kind = prev.split(":")[0]
                ki = COPY_KINDS.index("question" if kind == "value" else kind)
            e = model.step_inputs(torch.tensor([vi]), torch.tensor([ki]))
            match = torch.zeros(1, P)
            if prev is not None:
                for j in sp.pointable_positions(prev):
                    match[0, j] = 1
            zeta = selective_read(alpha, match, enc.memory)
            o = model.decoder.step(e, zeta, p_gen, state, values, enc.memory_mask)
            xi = torch.tensor([1.0 if (own is None or own in opened) else 0.0 for own in [None] * sp.n_vocab + sp.owners])
            tm = torch.tensor([1.0 if c in ALLOWED_AFTER[last_class] else 0.0 for c in sp.pos_class])
            dist, dead = apply_masks(o.p_out[0], xi, tm)
            if dead:
                return None
            per_symbol = {}
            for pos, sid in enumerate(sp.pos_symbol):
                per_symbol[sid] = per_symbol.get(sid, 0.0) + float(dist[pos])
            sid = max(sorted(per_symbol), key=lambda k: per_symbol[k])
            sym = sp.symbols[sid]
            out.append(sym)
            if sym == EOS_SYMBOL:
                return out
            if sym.startswith("table:"):
                opened.add(int(sym.split(":")[1]))
            last_class = [sp.pos_class[p] for p, s in enumerate(sp.pos_symbol) if s == sid][0]
            state, p_gen, alpha, prev = o.state, o.p_gen, o.alphas[:, -1], sym
        return None


# -- E-SM preserving mutations ---------------------------------------------------

def _swap_values(node, rng):
    if isinstance(node, Literal):
        return Literal(str(rng.randint(0, 999)) if node.is_number else f"v{rng.randint(0, 99)}", node.is_number, node.quote)
    if isinstance(node, ValueList):
        return ValueList(tuple(_swap_values(v, rng) for v in node.items))
    return node


def _reorder(node, rng):
    if isinstance(node, Select):
        items = list(node.items)
        rng.shuffle(items)
        return Select(tuple(items), node.distinct)
    if isinstance(node, BoolExpr):
        items = list(node.items)
        rng.shuffle(items)
        return BoolExpr(node.op, tuple(items))
    if isinstance(node, Query) and node.group_by:
        keys = list(node.group_by)
        rng.shuffle(keys)
        return dataclasses.replace(node, group_by=tuple(keys))
    return node


def mutate_query(q, rng):
    """Random literal values plus shuffled projections, condition operands and group keys."""
    return map_nodes(map_nodes(q, lambda n: _swap_values(n, rng)), lambda n: _reorder(n, rng))
