"""Encoder, pointer-generator decoder and the teacher-forced training forward pass."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from ..schema import DATA_TYPES
from ..vocab import generation_vocab
from .features import COPY_KINDS, OutputSpace, TokenFeatures


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64  # token embedding size
    n: int = 64  # hidden size of h_X, h_Q, h_S and the decoder
    heads: int = 2
    word_buckets: int = 8192
    ngram_buckets: int = 8192
    hash_salt: int = 17
    use_metadata: bool = True
    self_attention: bool = True  # cross-segment layer of the pretrained-encoder stand-in
    lexical_match: bool = True  # question/schema shared-stem indicator, a lexical prior the stand-in lacks

    def __post_init__(self):
        if self.n % self.heads or self.n % 2 or self.d % 2:
            raise ValueError("n must be even and divisible by heads; d must be even")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class EncoderInput:
    """One example's tensors; batching pads these."""

    features: TokenFeatures
    q_len: int
    schema_positions: list[int]  # [T] positions then [C] positions, in X~ order
    meta: list[tuple[int, int, int] | None]  # (u, v, w) per field row, None for table rows


@dataclass
class EncoderOutput:
    h_x: torch.Tensor  # B x L x n
    h_q: torch.Tensor  # B x Qmax x n
    h_s: torch.Tensor  # B x Smax x n
    memory: torch.Tensor  # B x P x n, rows of X~: h_Q then h_S
    memory_mask: torch.Tensor  # B x P, True on real rows
    init: tuple[torch.Tensor, torch.Tensor]  # decoder (h, c) from the question encoder

    def select(self, idx: torch.Tensor) -> "EncoderOutput":
        return EncoderOutput(
            self.h_x[idx], self.h_q[idx], self.h_s[idx], self.memory[idx], self.memory_mask[idx],
            (self.init[0][idx], self.init[1][idx]),
        )


def _init_lstm(m: nn.Module) -> None:
    for name, p in m.named_parameters():
        if "weight_hh" in name:
            # one orthogonal block per gate
            for k in range(0, p.shape[0], p.shape[1]):
                nn.init.orthogonal_(p.data[k : k + p.shape[1]])
        elif "weight_ih" in name:
            nn.init.xavier_uniform_(p.data)
        elif "bias" in name:
            nn.init.zeros_(p.data)


def _run_lstm(lstm: nn.LSTM, x: torch.Tensor, lengths: torch.Tensor):
    packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
    out, (h, c) = lstm(packed)
    out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
    return out, (h, c)


class Encoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d, n = cfg.d, cfg.n
        self.cfg = cfg
        self.word = nn.Embedding(cfg.word_buckets, d, padding_idx=0)
        self.ngram = nn.EmbeddingBag(cfg.ngram_buckets, d, mode="mean", padding_idx=0)
        self.kind = nn.Embedding(8, d)
        self.match = nn.Embedding(2, d)
        self.ctx_lstm = nn.LSTM(d, d // 2, batch_first=True, bidirectional=True)
        self.att_q = nn.Linear(2 * d, d, bias=False)
        self.att_k = nn.Linear(2 * d, d, bias=False)
        self.lstm_x = nn.LSTM(d, n // 2, batch_first=True, bidirectional=True)
        self.lstm_q = nn.LSTM(n, n // 2, batch_first=True, bidirectional=True)
        self.f_pri = nn.Embedding(2, n)
        self.f_for = nn.Embedding(2, n)
        self.f_type = nn.Embedding(len(DATA_TYPES), n)
        self.W_g = nn.Linear(4 * n, n)
        for emb in (self.word, self.ngram, self.kind, self.match, self.f_pri, self.f_for, self.f_type):
            nn.init.uniform_(emb.weight, -0.1, 0.1)
        with torch.no_grad():
            self.word.weight[0].zero_()
            self.ngram.weight[0].zero_()
        for lstm in (self.ctx_lstm, self.lstm_x, self.lstm_q):
            _init_lstm(lstm)
        nn.init.xavier_uniform_(self.att_q.weight)
        nn.init.xavier_uniform_(self.att_k.weight)
        nn.init.xavier_uniform_(self.W_g.weight)
        nn.init.zeros_(self.W_g.bias)

    def fuse(self, base: torch.Tensor, meta: torch.Tensor, is_field: torch.Tensor) -> torch.Tensor:
        """g([h; f_pri[u]; f_for[v]; f_type[w]]) with zero blocks where ``is_field`` is False."""
        gate = is_field.unsqueeze(-1).to(base.dtype)
        if not self.cfg.use_metadata:
            gate = torch.zeros_like(gate)
        blocks = [base, self.f_pri(meta[..., 0]) * gate, self.f_for(meta[..., 1]) * gate, self.f_type(meta[..., 2]) * gate]
        return torch.relu(self.W_g(torch.cat(blocks, dim=-1)))

    def forward(self, batch: Sequence[EncoderInput]) -> EncoderOutput:
        dev = self.word.weight.device
        B = len(batch)
        lengths = torch.tensor([len(x.features.type_ids) for x in batch])
        L = int(lengths.max())
        type_ids = torch.zeros(B, L, dtype=torch.long)
        word_ids = torch.zeros(B, L, dtype=torch.long)
        match_ids = torch.zeros(B, L, dtype=torch.long)
        flat, offsets = [], []
        for b, x in enumerate(batch):
            f = x.features
            type_ids[b, : len(f.type_ids)] = torch.tensor(f.type_ids)
            word_ids[b, : len(f.word_ids)] = torch.tensor(f.word_ids)
            if self.cfg.lexical_match and f.match_ids:
                match_ids[b, : len(f.match_ids)] = torch.tensor(f.match_ids)
        for b, x in enumerate(batch):
            grams = x.features.ngram_ids
            for i in range(L):
                offsets.append(len(flat))
                if i < len(grams):
                    flat.extend(grams[i])
        grams = self.ngram(torch.tensor(flat, dtype=torch.long, device=dev), torch.tensor(offsets, device=dev))
        emb = self.word(word_ids) + self.kind(type_ids) + grams.view(B, L, -1)
        if self.cfg.lexical_match:
            emb = emb + self.match(match_ids)

        valid = torch.arange(L).unsqueeze(0) < lengths.unsqueeze(1)
        ctx, _ = _run_lstm(self.ctx_lstm, emb, lengths)
        if self.cfg.self_attention:
            key_in = torch.cat([emb, ctx], dim=-1)
            scores = self.att_q(key_in) @ self.att_k(key_in).transpose(1, 2) / math.sqrt(self.cfg.d)
            scores = scores.masked_fill(~valid.unsqueeze(1), float("-inf"))
            ctx = ctx + torch.softmax(scores, dim=-1) @ ctx
        h_x, _ = _run_lstm(self.lstm_x, ctx, lengths)

        q_lens = torch.tensor([x.q_len for x in batch])
        Q = int(q_lens.max())
        h_q, (hn, cn) = _run_lstm(self.lstm_q, h_x[:, 1 : 1 + Q], q_lens)
        init = (torch.cat([hn[0], hn[1]], dim=-1), torch.cat([cn[0], cn[1]], dim=-1))

        S = max(len(x.schema_positions) for x in batch)
        pos = torch.zeros(B, S, dtype=torch.long)
        meta = torch.zeros(B, S, 3, dtype=torch.long)
        is_field = torch.zeros(B, S, dtype=torch.bool)
        for b, x in enumerate(batch):
            pos[b, : len(x.schema_positions)] = torch.tensor(x.schema_positions)
            for j, m in enumerate(x.meta):
                if m is not None:
                    meta[b, j] = torch.tensor(m)
                    is_field[b, j] = True
        base = torch.gather(h_x, 1, pos.unsqueeze(-1).expand(B, S, h_x.shape[-1]))
        h_s = self.fuse(base, meta, is_field)

        P = max(x.q_len + len(x.schema_positions) for x in batch)
        both = torch.cat([h_q, h_s], dim=1)
        idx = torch.zeros(B, P, dtype=torch.long)
        mask = torch.zeros(B, P, dtype=torch.bool)
        for b, x in enumerate(batch):
            rows = list(range(x.q_len)) + [Q + j for j in range(len(x.schema_positions))]
            idx[b, : len(rows)] = torch.tensor(rows)
            mask[b, : len(rows)] = True
        memory = torch.gather(both, 1, idx.unsqueeze(-1).expand(B, P, both.shape[-1]))
        memory = memory * mask.unsqueeze(-1).to(memory.dtype)
        return EncoderOutput(h_x, h_q, h_s, memory, mask, init)


@dataclass
class StepOutput:
    p_out: torch.Tensor  # B x (|V| + P)
    p_gen: torch.Tensor  # B
    alphas: torch.Tensor  # B x H x P
    state: tuple[torch.Tensor, torch.Tensor]


class Decoder(nn.Module):
    def __init__(self, cfg: ModelConfig, n_vocab: int):
        super().__init__()
        n, H = cfg.n, cfg.heads
        self.cfg = cfg
        self.vocab_emb = nn.Embedding(n_vocab, n)
        self.kind_emb = nn.Embedding(len(COPY_KINDS), n)
        self.start = nn.Parameter(torch.empty(n))
        self.cell = nn.LSTMCell(2 * n, n)
        self.W_U = nn.Parameter(torch.empty(H, n, n // H))
        self.W_V = nn.Parameter(torch.empty(H, n, n // H))
        self.W_gen_s = nn.Parameter(torch.empty(n))
        self.W_gen_z = nn.Parameter(torch.empty(n))
        self.b_gen = nn.Parameter(torch.zeros(1))
        self.out = nn.Linear(2 * n, n_vocab)
        for emb in (self.vocab_emb, self.kind_emb):
            nn.init.uniform_(emb.weight, -0.1, 0.1)
        nn.init.uniform_(self.start, -0.1, 0.1)
        _init_lstm(self.cell)
        for w in (self.W_U, self.W_V):
            for h in range(H):
                nn.init.xavier_uniform_(w.data[h])
        nn.init.uniform_(self.W_gen_s, -0.1, 0.1)
        nn.init.uniform_(self.W_gen_z, -0.1, 0.1)
        nn.init.xavier_uniform_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def project(self, memory: torch.Tensor) -> torch.Tensor:
        """h_j W_V^(h) for every head: B x H x P x n/H."""
        return torch.einsum("bpn,hnk->bhpk", memory, self.W_V)

    def attend(self, s: torch.Tensor, values: torch.Tensor, mask: torch.Tensor):
        q = torch.einsum("bn,hnk->bhk", s, self.W_U)
        e = torch.einsum("bhk,bhpk->bhp", q, values) / math.sqrt(values.shape[-1])
        e = e.masked_fill(~mask.unsqueeze(1), float("-inf"))
        alphas = torch.softmax(e, dim=-1)
        z = torch.einsum("bhp,bhpk->bhk", alphas, values).reshape(s.shape[0], -1)
        return z, alphas

    def step(self, e_prev, zeta, p_gen_prev, state, values, mask) -> StepOutput:
        y = torch.cat([e_prev, (1.0 - p_gen_prev).unsqueeze(-1) * zeta], dim=-1)
        s, c = self.cell(y, state)
        z, alphas = self.attend(s, values, mask)
        p_gen = torch.sigmoid(s @ self.W_gen_s + z @ self.W_gen_z + self.b_gen)
        p_vocab = torch.softmax(self.out(torch.cat([s, z], dim=-1)), dim=-1)
        copy = alphas[:, -1]
        p_out = torch.cat([p_gen.unsqueeze(-1) * p_vocab, (1.0 - p_gen).unsqueeze(-1) * copy], dim=-1)
        return StepOutput(p_out, p_gen, alphas, (s, c))

    def embed_prev(self, vocab_idx: torch.Tensor, kind_idx: torch.Tensor) -> torch.Tensor:
        """Vocabulary embedding where ``vocab_idx`` >= 0, otherwise the copy-kind vector."""
        in_vocab = (vocab_idx >= 0).unsqueeze(-1)
        return torch.where(in_vocab, self.vocab_emb(vocab_idx.clamp(min=0)), self.kind_emb(kind_idx.clamp(min=0)))


def selective_read(alpha_last: torch.Tensor, match: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
    """zeta = sum_j rho_j h_j with rho = alpha / K on positions equal to the previous token."""
    w = alpha_last * match.to(alpha_last.dtype)
    k = w.sum(-1, keepdim=True)
    rho = torch.where(k > 0, w / torch.where(k > 0, k, torch.ones_like(k)), torch.zeros_like(w))
    return torch.einsum("bp,bpn->bn", rho, memory)


@dataclass
class Teacher:
    """Per-step training tensors for one example aligned to its OutputSpace."""

    target_pos: list[list[int]]  # layout positions carrying the gold symbol at step t
    prev_vocab: list[int]  # vocabulary index of the previous gold symbol, -1 if none
    prev_kind: list[int]  # copy-kind index of the previous gold symbol, -1 if in vocabulary
    prev_match: list[list[int]]  # X~ positions equal to the previous gold symbol


def teacher(symbols: Sequence[str], space: OutputSpace) -> Teacher:
    vocab_syms = {}
    for i in range(space.n_vocab):
        vocab_syms.setdefault(space.symbols[space.pos_symbol[i]], i)
    target_pos, prev_vocab, prev_kind, prev_match = [], [], [], []
    prev = None
    for sym in symbols:
        pos = space.positions(sym)
        if not pos:
            raise ValueError(f"target symbol {sym!r} has no position in the output space")
        target_pos.append(pos)
        if prev is None:
            prev_vocab.append(-2)  # start symbol
            prev_kind.append(-1)
            prev_match.append([])
        else:
            vi = vocab_syms.get(prev, -1)
            prev_vocab.append(vi)
            prev_kind.append(-1 if vi >= 0 else COPY_KINDS.index(_copy_kind(prev)))
            prev_match.append(space.pointable_positions(prev))
        prev = sym
    return Teacher(target_pos, prev_vocab, prev_kind, prev_match)


def _copy_kind(sym: str) -> str:
    kind = sym.split(":", 1)[0]
    return "question" if kind == "value" else kind


class AnchorNet(nn.Module):
    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.n_vocab = len(generation_vocab())
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg, self.n_vocab)

    def step_inputs(self, vocab_idx: torch.Tensor, kind_idx: torch.Tensor) -> torch.Tensor:
        e = self.decoder.embed_prev(vocab_idx, kind_idx)
        start = (vocab_idx == -2).unsqueeze(-1)
        return torch.where(start, self.decoder.start.expand_as(e), e)

    def nll(self, inputs: Sequence[EncoderInput], teachers: Sequence[Teacher], reduce: str = "mean") -> torch.Tensor:
        """Teacher-forced negative log-likelihood; per-example sums averaged over the batch."""
        enc = self.encoder(inputs)
        dec = self.decoder
        B = len(inputs)
        P = enc.memory.shape[1]
        T = max(len(t.target_pos) for t in teachers)
        V = self.n_vocab
        dtype = enc.memory.dtype
        tgt = torch.zeros(B, T, V + P, dtype=dtype)
        match = torch.zeros(B, T, P, dtype=dtype)
        pv = torch.full((B, T), -1, dtype=torch.long)
        pk = torch.full((B, T), -1, dtype=torch.long)
        live = torch.zeros(B, T, dtype=dtype)
        for b, t in enumerate(teachers):
            for i, pos in enumerate(t.target_pos):
                tgt[b, i, pos] = 1.0
                match[b, i, t.prev_match[i]] = 1.0
                live[b, i] = 1.0
            pv[b, : len(t.prev_vocab)] = torch.tensor(t.prev_vocab)
            pk[b, : len(t.prev_kind)] = torch.tensor(t.prev_kind)
        values = dec.project(enc.memory)
        state = enc.init
        zeta = torch.zeros(B, self.cfg.n, dtype=dtype)
        p_gen_prev = torch.zeros(B, dtype=dtype)
        alpha_last = torch.zeros(B, P, dtype=dtype)
        total = torch.zeros(B, dtype=dtype)
        for i in range(T):
            e = self.step_inputs(pv[:, i], pk[:, i])
            zeta = selective_read(alpha_last, match[:, i], enc.memory)
            out = dec.step(e, zeta, p_gen_prev, state, values, enc.memory_mask)
            p = (out.p_out * tgt[:, i]).sum(-1)
            p = torch.where(live[:, i] > 0, p, torch.ones_like(p))
            total = total - torch.log(p.clamp_min(1e-30))
            state, p_gen_prev, alpha_last = out.state, out.p_gen, out.alphas[:, -1]
        return total.mean() if reduce == "mean" else total
