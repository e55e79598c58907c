import math

import pytest
import torch
from hypothesis import given, settings, strategies as st

from anchorsql.guard import lemma1_scan, lemma2_scan, static_check
from anchorsql.model import AnchorNet, ModelConfig, beam_search, ensemble_step, load, prepare, save, selective_read
from anchorsql.model.features import EOS_SYMBOL, target_symbols
from anchorsql.model.net import teacher
from anchorsql.schema import build_schema
from anchorsql.sqlkit import parse, to_exec_order

from oracles import greedy_decode

CFG = ModelConfig(d=16, n=16, heads=2, word_buckets=512, ngram_buckets=512)
SCHEMA = build_schema("d", {"people": [("name", "text", ["Kyle", "Bob"]), ("age", "number")],
                            "pets": [("kind", "text", ["cat"]), ("owner", "text")]})


def _model(seed=0, cfg=CFG):
    torch.manual_seed(seed)
    return AnchorNet(cfg).eval()


def _step(model, ex, prev_vocab=-2, prev_kind=-1, zeta=None, p_gen=None):
    enc = model.encoder([ex.encoder_input])
    values = model.decoder.project(enc.memory)
    e = model.step_inputs(torch.tensor([prev_vocab]), torch.tensor([prev_kind]))
    zeta = torch.zeros(1, CFG.n) if zeta is None else zeta
    p_gen = torch.zeros(1) if p_gen is None else p_gen
    return enc, model.decoder.step(e, zeta, p_gen, enc.init, values, enc.memory_mask)


def test_attention_uniform_and_peaked():
    dec = _model(cfg=ModelConfig(d=16, n=16, heads=1, word_buckets=512, ngram_buckets=512)).decoder
    P = 5
    values = torch.randn(1, 1, P, 16)
    mask = torch.ones(1, P, dtype=torch.bool)
    with torch.no_grad():
        dec.W_U.zero_()
    z, a = dec.attend(torch.randn(1, 16), values, mask)
    assert torch.allclose(a, torch.full_like(a, 1 / P))
    # a dominant logit: make one value row align with the query direction
    with torch.no_grad():
        dec.W_U.copy_(torch.eye(16).unsqueeze(0))
    s = torch.zeros(1, 16)
    s[0, 0] = 1.0
    values = torch.zeros(1, 1, P, 16)
    values[0, 0, 2, 0] = 400.0  # logit 400 / sqrt(16) = 100
    z, a = dec.attend(s, values, mask)
    assert a[0, 0, 2] > 1 - 1e-6
    assert torch.allclose(z[0], values[0, 0, 2])


def test_attention_rows_sum_to_one():
    model = _model()
    ex = prepare("how old is Kyle", SCHEMA, CFG)
    _, out = _step(model, ex)
    assert torch.allclose(out.alphas.sum(-1), torch.ones(1, CFG.heads), atol=1e-9 * 1e3)


def test_pgen_endpoints_and_copy_sum():
    model = _model().double()
    ex = prepare("kyle or kyle", SCHEMA, CFG)
    with torch.no_grad():
        model.decoder.b_gen.fill_(1e4)
    enc, out = _step(model, ex)
    V = model.n_vocab
    assert torch.allclose(out.p_out[0, V:], torch.zeros(1, dtype=torch.float64))
    # p_gen = 0 and a hand-set last-head attention with 0.2 / 0.1 on the two "kyle" positions
    with torch.no_grad():
        model.decoder.b_gen.fill_(-1e4)
    enc, out = _step(model, ex)
    alpha = out.alphas[0, -1]
    pos = ex.space.pointable_positions("value:kyle")
    assert len(pos) == 2
    manual = torch.zeros_like(alpha)
    manual[pos[0]], manual[pos[1]] = 0.2, 0.1
    manual[[p for p in range(len(alpha)) if p not in pos]] = 0.7 / (len(alpha) - 2)
    p_gen = torch.zeros(1, dtype=torch.float64)
    mix = torch.cat([p_gen * torch.zeros(V, dtype=torch.float64), (1 - p_gen) * manual])
    assert math.isclose(float(mix[[V + p for p in pos]].sum()), 0.3, abs_tol=1e-12)
    assert torch.allclose(out.p_out[0, V:], alpha)


def test_last_head_is_the_copy_head():
    model = _model()
    ex = prepare("how old is Kyle", SCHEMA, CFG)
    _, base = _step(model, ex)
    with torch.no_grad():
        model.decoder.W_U[0].mul_(5.0)  # change only the first head's scores
    _, after = _step(model, ex)
    assert not torch.allclose(base.alphas[:, 0], after.alphas[:, 0])
    assert torch.allclose(base.alphas[:, -1], after.alphas[:, -1])
    V = model.n_vocab
    copy_share = lambda o: o.p_out[0, V:] / (1 - o.p_gen)
    assert torch.allclose(copy_share(base), copy_share(after), atol=1e-6)


def test_selective_read():
    mem = torch.randn(1, 4, 3)
    alpha = torch.tensor([[0.3, 0.2, 0.1, 0.4]])
    assert torch.equal(selective_read(alpha, torch.zeros(1, 4), mem), torch.zeros(1, 3))
    one = torch.tensor([[0.0, 1.0, 0.0, 0.0]])
    assert torch.allclose(selective_read(alpha, one, mem), mem[:, 1])
    two = torch.tensor([[1.0, 0.0, 1.0, 0.0]])
    assert torch.allclose(selective_read(alpha, two, mem), 0.75 * mem[:, 0] + 0.25 * mem[:, 2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["how old is Kyle", "count the cats", "list names of people older than 30"]))
def test_step_distribution_contract(seed, question):
    model = _model(seed)
    ex = prepare(question, SCHEMA, CFG)
    with torch.no_grad():
        enc, out = _step(model, ex, zeta=torch.randn(1, CFG.n), p_gen=torch.rand(1))
    assert abs(float(out.p_out.sum()) - 1) < 1e-6
    assert 0.0 <= float(out.p_gen) <= 1.0
    assert (out.p_out >= 0).all()


def test_ensemble_step():
    a = torch.tensor([0.6, 0.4])
    b = torch.tensor([0.2, 0.8])
    assert torch.allclose(ensemble_step([a, b]), torch.tensor([0.4, 0.6]))
    assert torch.equal(ensemble_step([a]), a)
    with pytest.raises(ValueError):
        ensemble_step([a, torch.ones(3) / 3])


def test_target_symbols_and_teacher():
    q = parse('SELECT age FROM people WHERE name = "Kyle" LIMIT 12', SCHEMA)
    toks = to_exec_order(q, SCHEMA)
    syms = target_symbols(toks, ["how", "old", "is", "kyle"])
    assert syms[-1] == EOS_SYMBOL
    assert "value:kyle" in syms and syms[-3:-1] == ["value:1", "value:2"]
    assert target_symbols(toks, ["how", "old"]) is None
    ex = prepare("how old is kyle", SCHEMA, CFG, 'SELECT age FROM people WHERE name = "Kyle"')
    t = teacher(ex.target, ex.space)
    assert t.prev_vocab[0] == -2 and len(t.target_pos) == len(ex.target)


def test_uniform_loss_is_length_log_m():
    # one-hot targets under a uniform p_out give L * ln m
    from anchorsql.trainer import loss

    m, L = 7, 4
    dists = [torch.full((m,), 1 / m, dtype=torch.float64) for _ in range(L)]
    assert math.isclose(float(loss(dists, [[0]] * L)), L * math.log(m))
    assert float(loss([torch.tensor([0.0, 1.0])], [[1]])) == 0.0
    two = torch.tensor([0.7, 0.2, 0.1], dtype=torch.float64)
    assert math.isclose(float(loss([two], [[1, 2]])), -math.log(0.3))
    with pytest.raises(ValueError, match="step 1"):
        loss([two, torch.tensor([1.0, 0.0, 0.0])], [[0], [2]])
    with pytest.raises(ValueError):
        loss([two], [[0], [1]])


# -- search ---------------------------------------------------------------------

def _examples(records, schemas, n, cfg=CFG):
    return [prepare(r["question"], schemas[r["db_id"]], cfg, r["query"]) for r in records[:n]]


def test_width_one_is_greedy(train_records, schemas):
    model = _model(1)
    for ex in _examples(train_records[::7], schemas, 12):
        res = beam_search(model, ex, width=1, max_len=40)
        ref = greedy_decode(model, ex, max_len=40)
        if ref is None or static_check([t for t in _tokens(ref, ex)], ex.schema):
            assert res.fell_back
        else:
            assert not res.fell_back and res.ranked[res.beam_rank] == ref


def _tokens(symbols, ex):
    from anchorsql.model.features import symbols_to_tokens

    return symbols_to_tokens(symbols, ex.space, ex.hybrid)


def test_untrained_model_falls_back(train_records, schemas):
    model = _model(2)
    ex = _examples(train_records, schemas, 1)[0]
    res = beam_search(model, ex, width=2, max_len=3)
    assert res.fell_back and res.beam_rank is None
    first = ex.schema.tables[0].name
    assert res.sql == f"SELECT COUNT(*) FROM {first}"


def test_guarded_outputs_rescan_clean(train_records, schemas):
    model = _model(3)
    for ex in _examples(train_records[::5], schemas, 20):
        res = beam_search(model, ex, width=3, max_len=30, static=False)
        for syms in res.ranked:
            toks = _tokens(syms, ex)
            assert lemma2_scan(toks) == [] and lemma1_scan(toks, ex.schema) == []


def test_single_member_ensemble_is_identity(train_records, schemas):
    model = _model(4)
    for ex in _examples(train_records[::11], schemas, 5):
        a = beam_search(model, ex, width=3, max_len=30)
        b = beam_search([model], ex, width=3, max_len=30)
        assert a.ranked == b.ranked and a.sql == b.sql


def test_width_validation(train_records, schemas):
    with pytest.raises(ValueError):
        beam_search(_model(), _examples(train_records, schemas, 1)[0], width=0)


def test_checkpoint_round_trip(tmp_path, train_records, schemas):
    model = _model(5)
    path = tmp_path / "m.ckpt"
    save(model, path, {"note": "x"})
    back = load(path)
    assert back.cfg == model.cfg
    for (k, v), (k2, v2) in zip(model.state_dict().items(), back.state_dict().items()):
        assert k == k2 and torch.equal(v, v2)
    ex = _examples(train_records, schemas, 1)[0]
    assert beam_search(model, ex, width=2, max_len=20).ranked == beam_search(back, ex, width=2, max_len=20).ranked
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b'{"format": "other"}\n')
    with pytest.raises(ValueError):
        load(bad)
