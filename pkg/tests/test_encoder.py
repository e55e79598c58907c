import torch

from anchorsql.hybrid import serialize
from anchorsql.model import AnchorNet, Encoder, ModelConfig
from anchorsql.model.features import stem
from anchorsql.model.prepare import encoder_input
from anchorsql.schema import build_schema

torch.manual_seed(0)
CFG = ModelConfig(d=16, n=16, heads=2, word_buckets=512, ngram_buckets=512)


def _example(cfg=CFG, question="how many singers are from france ?"):
    s = build_schema("d", {"singer": [("singer_id", "number"), ("name", "text"), ("country", "text")],
                           "concert": [("concert_id", "number"), ("venue", "text"), ("singer_id", "number")]},
                     foreign_keys=[("concert.singer_id", "singer.singer_id")], primary_keys=["singer.singer_id"])
    h = serialize(question, s)
    return s, h, encoder_input(h, cfg)


def test_shapes():
    s, h, x = _example()
    out = Encoder(CFG)([x])
    assert out.h_x.shape == (1, len(h), 16)
    assert out.h_q.shape == (1, len(h.question), 16)
    assert out.h_s.shape == (1, len(s.tables) + len(s.fields), 16)
    assert out.memory.shape == (1, len(h.pointable), 16)
    assert out.init[0].shape == (1, 16)
    assert torch.equal(out.memory[0, : len(h.question)], out.h_q[0])
    assert torch.equal(out.memory[0, len(h.question):], out.h_s[0])


def test_zero_lstm_weights_give_constant_rows():
    _, h, x = _example()
    enc = Encoder(ModelConfig(d=16, n=16, heads=2, word_buckets=512, ngram_buckets=512, self_attention=False))
    with torch.no_grad():
        for p in enc.lstm_x.parameters():
            p.zero_()
    out = enc([x])
    assert torch.allclose(out.h_x[0], out.h_x[0, :1].expand_as(out.h_x[0]))


def test_fuse_identity_on_base_block():
    enc = Encoder(CFG)
    n = CFG.n
    with torch.no_grad():
        enc.W_g.weight.zero_()
        enc.W_g.weight[:, :n] = torch.eye(n)
        enc.W_g.bias.zero_()
    base = torch.rand(1, 3, n)
    meta = torch.tensor([[[1, 0, 2], [0, 1, 0], [0, 0, 1]]])
    out = enc.fuse(base, meta, torch.tensor([[True, True, False]]))
    assert torch.allclose(out, base)


def test_fuse_table_rows_clamped():
    enc = Encoder(CFG)
    with torch.no_grad():
        enc.W_g.weight.zero_()
        enc.W_g.bias.fill_(-1.0)
    out = enc.fuse(torch.rand(1, 2, CFG.n), torch.zeros(1, 2, 3, dtype=torch.long), torch.tensor([[False, False]]))
    assert torch.equal(out, torch.zeros_like(out))


def test_fuse_primary_key_flip():
    enc = Encoder(CFG).double()
    n = CFG.n
    base = torch.randn(1, 1, n, dtype=torch.float64)
    field = torch.tensor([[True]])
    lo = torch.tensor([[[0, 1, 2]]])
    hi = torch.tensor([[[1, 1, 2]]])
    pre = lambda m: enc.W_g(torch.cat([base, enc.f_pri(m[..., 0]), enc.f_for(m[..., 1]), enc.f_type(m[..., 2])], -1))
    diff = pre(hi) - pre(lo)
    expected = enc.W_g.weight[:, n : 2 * n] @ (enc.f_pri.weight[1] - enc.f_pri.weight[0])
    assert torch.allclose(diff[0, 0], expected)
    assert torch.allclose(enc.fuse(base, hi, field), torch.relu(pre(hi)))


def test_metadata_toggle_zeroes_features():
    enc = Encoder(ModelConfig(d=16, n=16, heads=2, word_buckets=512, ngram_buckets=512, use_metadata=False))
    base = torch.rand(1, 2, 16)
    a = enc.fuse(base, torch.tensor([[[1, 1, 3], [0, 0, 0]]]), torch.tensor([[True, True]]))
    b = enc.fuse(base, torch.tensor([[[0, 0, 0], [1, 1, 4]]]), torch.tensor([[True, True]]))
    assert torch.equal(a, b)




def test_table_permutation_permutes_schema_rows():
    # with the contextual layers replaced by per-token maps, h_S rows only depend on their own tokens
    cfg = ModelConfig(d=16, n=16, heads=2, word_buckets=512, ngram_buckets=512, self_attention=False)
    s = build_schema("d", {"alpha": [("x", "text")], "beta": [("y", "text")]})
    from anchorsql.hybrid import SchemaView

    enc = Encoder(cfg)
    with torch.no_grad():
        for lstm in (enc.ctx_lstm, enc.lstm_x):
            for name, p in lstm.named_parameters():
                if "weight_hh" in name:
                    p.zero_()
                elif "bias_ih" in name:
                    hid = p.shape[0] // 4
                    p[hid : 2 * hid] = -1e4  # forget gate shut: no cell memory either
    a = enc([encoder_input(serialize("q", SchemaView(s, (0, 1))), cfg)]).h_s[0]
    b = enc([encoder_input(serialize("q", SchemaView(s, (1, 0))), cfg)]).h_s[0]
    # rows: tables then fields, each in view order
    assert torch.allclose(a[[1, 0, 3, 2]], b, atol=1e-6)


def test_batched_equals_single():
    _, _, x1 = _example()
    _, _, x2 = _example(question="list venues")
    enc = Encoder(CFG)
    both = enc([x1, x2])
    one = enc([x2])
    P = one.memory.shape[1]
    assert torch.allclose(both.memory[1, :P], one.memory[0], atol=1e-6)
    assert not both.memory_mask[1, P:].any()


def test_determinism_under_seed():
    torch.manual_seed(3)
    a = AnchorNet(CFG)
    torch.manual_seed(3)
    b = AnchorNet(CFG)
    for (ka, va), (kb, vb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)


def test_lexical_match_flags():
    _, h, x = _example(question="which countries have singers ?")
    flagged = {(t.kind, t.surface) for t, m in zip(h.tokens, x.features.match_ids) if m}
    assert flagged == {("question", "singers"), ("question", "countries"), ("schema", "singer"), ("schema", "country")}
    assert stem("classes") == "classe" and stem("glass") == "glass" and stem("bus") == "bus"


def test_lexical_match_toggle():
    _, _, x = _example()
    torch.manual_seed(1)
    on = Encoder(CFG)
    off = Encoder(ModelConfig(**{**CFG.to_json(), "lexical_match": False}))
    off.load_state_dict(on.state_dict())
    with torch.no_grad():
        on.match.weight.zero_()
    assert torch.allclose(on([x]).memory, off([x]).memory)
