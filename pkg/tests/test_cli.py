import json

import pytest

from anchorsql import cli, toy
from anchorsql.model.checkpoint import read_header

from conftest import read_jsonl

SMALL = {"gamma_0": 1e-2, "warmup_steps": 2, "n_max": 6, "batch_size": 2, "eval_every": 3, "log_every": 1,
         "model": {"d": 16, "n": 16, "heads": 2, "word_buckets": 512, "ngram_buckets": 512}}


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def corpus(tmp_path, train_records, heldout_records):
    def write(name, recs):
        p = tmp_path / name
        p.write_text("\n".join([json.dumps(cli.header("examples"))] + [json.dumps(r) for r in recs]) + "\n")
        return p

    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(SMALL))
    return write("train.jsonl", train_records[::20]), write("dev.jsonl", heldout_records[:4]), cfg


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["train", "--out", "x", "--ablate", "everything"])
    assert e.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_runtime_errors_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "match-anchors", "--input", tmp_path / "missing.jsonl")
    assert code == 1 and err.startswith("anchorsql: error:")
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"db_id": "shop"\n')
    code, _, err = run(capsys, "preprocess", "--input", bad)
    assert code == 1 and "bad.jsonl:1" in err
    code, _, err = run(capsys, "check", "--db", "no_such_db", "--input", bad)
    assert code == 1 and "no_such_db" in err


def test_match_anchors_output(capsys, tmp_path):
    out = tmp_path / "a.jsonl"
    cases = toy.bundled_dir() / "anchors.jsonl"

    def cats(*flags):
        assert run(capsys, "match-anchors", "--input", cases, "-o", out, *flags)[0] == 0
        recs = read_jsonl(out)
        hit = next(r for r in recs if r["question"].startswith("how many students keep cats"))
        return recs, [(a["field_name"], a["question_text"]) for a in hit["anchors"] if a["cell_value"] == "cat"]

    # beta_c = 3/4 sits below the default cell threshold of 0.8
    assert cats()[1] == []
    recs, found = cats("--theta-c", 0.7, "--k", 1)
    assert found == [("pets.pettype", "cats")]
    head = json.loads(out.read_text().splitlines()[0])
    assert head["format"] == "anchorsql-anchors" and head["match"]["k"] == 1 and head["match"]["theta_c"] == 0.7
    assert all(set(a) >= {"field", "cell_value", "span", "beta_q", "beta_c", "matched"} for r in recs for a in r["anchors"])


def test_preprocess_is_reproducible(capsys, tmp_path, corpus):
    train, _, _ = corpus
    a, b, c = tmp_path / "a.jsonl", tmp_path / "b.jsonl", tmp_path / "c.jsonl"
    run(capsys, "preprocess", "--input", train, "-o", a)
    run(capsys, "--jobs", 3, "preprocess", "--input", train, "-o", b)
    assert a.read_bytes() == b.read_bytes()
    run(capsys, "preprocess", "--input", train, "--no-bridging", "-o", c)
    plain = read_jsonl(c)
    assert all(r["value_mode"] == "none" and not r["anchors"] for r in plain)
    assert all("[V]" not in [t[1] for t in r["hybrid"]["tokens"]] for r in plain)
    assert any(r["anchors"] for r in read_jsonl(a))


def test_normalize_and_check(capsys, tmp_path):
    sql = tmp_path / "q.sql"
    sql.write_text('SELECT name FROM singer WHERE country = "France"\n\nSELECT count(*) FROM concert\n')
    code, out, _ = run(capsys, "normalize-sql", "--db", "concert_hall", "--input", sql)
    assert code == 0
    assert out.splitlines() == ['FROM singer WHERE singer.country = "France" SELECT singer.name', "FROM concert SELECT COUNT(*)"]
    exec_file = tmp_path / "exec.txt"
    exec_file.write_text(out + "FROM singer SELECT concert.year\n")
    code, out, err = run(capsys, "check", "--db", "concert_hall", "--input", exec_file)
    verdicts = [json.loads(x) for x in out.splitlines()]
    assert code == 1 and [v["ok"] for v in verdicts] == [True, True, False]
    assert {v["kind"] for v in verdicts[2]["violations"]} == {"scope", "lemma1"}
    code, out, _ = run(capsys, "normalize-sql", "--db", "concert_hall", "--input", sql, "--check-lemmas")
    assert all(json.loads(x)["lemma1"] and json.loads(x)["lemma2"] for x in out.splitlines())
    code, out, _ = run(capsys, "normalize-sql", "--db", "concert_hall", "--input", sql, "--written")
    assert out.splitlines()[1] == "SELECT COUNT(*) FROM concert"
    sql.write_text("SELECT nope FROM singer\n")
    code, _, err = run(capsys, "normalize-sql", "--db", "concert_hall", "--input", sql)
    assert code == 1 and "line 1" in err


def test_pipeline_composes(capsys, tmp_path, corpus, monkeypatch):
    """preprocess -> train -> decode -> eval on the toy corpus, the documented sequence."""
    train, dev, cfg = corpus
    monkeypatch.setenv(cli.ENV_DATA_ROOT, str(toy.bundled_dir()))
    pre = tmp_path / "pre.jsonl"
    assert run(capsys, "preprocess", "--input", train, "--no-bridging", "-o", pre)[0] == 0
    runs = {}
    for seed in (1, 2):
        out = tmp_path / f"run{seed}"
        code, stdout, _ = run(capsys, "--seed", seed, "train", "--train", pre, "--dev", dev, "--out", out,
                              "--config", cfg, "--ablate", "metadata", "--quiet")
        assert code == 0, stdout
        runs[seed] = out / "model.ckpt"
        extra = read_header(runs[seed])["extra"]
        # the preprocessed file carries the bridging ablation into training
        assert extra["train"]["bridging"] is False and extra["train"]["metadata"] is False
        assert extra["train"]["seed"] == seed
        assert (out / "metrics.csv").read_text().startswith("step,lr,loss,dev_em,dev_esm")
    preds = tmp_path / "pred.jsonl"
    code, _, _ = run(capsys, "decode", "--model", runs[1], "--input", dev, "--beam", 2, "--max-len", 30, "-o", preds)
    assert code == 0
    recs = read_jsonl(preds)
    assert len(recs) == 4 and all(set(r) >= {"question", "predicted_sql", "beam_rank", "fell_back"} for r in recs)
    ens = tmp_path / "ens.jsonl"
    code, _, _ = run(capsys, "decode", "--ensemble", f"{runs[1]},{runs[2]}", "--input", dev, "--beam", 2, "--max-len", 30, "-o", ens)
    assert code == 0 and len(read_jsonl(ens)) == 4
    verdicts = tmp_path / "verdicts.jsonl"
    code, out, _ = run(capsys, "eval", "--pred", preds, "--gold", dev, "--verdicts", verdicts, "--json")
    summary = json.loads(out)
    assert code == 0 and summary["n"] == 4 and summary["ea"] is None
    v = read_jsonl(verdicts)
    assert all((not x["em"]) or x["esm"] for x in v)
    assert summary["esm"] == pytest.approx(100 * sum(x["esm"] for x in v) / 4)


def test_decode_is_idempotent(capsys, tmp_path, corpus):
    train, dev, cfg = corpus
    out = tmp_path / "m"
    run(capsys, "train", "--train", train, "--out", out, "--config", cfg, "--quiet")
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run(capsys, "decode", "--model", out / "model.ckpt", "--input", dev, "--beam", 2, "--max-len", 30, "-o", a)
    run(capsys, "--jobs", 2, "decode", "--model", out / "model.ckpt", "--input", dev, "--beam", 2, "--max-len", 30, "-o", b)
    assert a.read_bytes() == b.read_bytes()


def test_eval_with_databases(capsys, tmp_path, heldout_records):
    toy.build_database("shop", tmp_path / "dbs" / "shop.sqlite")
    gold = heldout_records[:3]
    preds = [{"question": r["question"], "predicted_sql": r["query"]} for r in gold]
    preds[1]["predicted_sql"] = "SELECT count(*) FROM supplier WHERE supplier_id = -1"
    p = tmp_path / "p.jsonl"
    p.write_text("\n".join(json.dumps(x) for x in preds) + "\n")
    g = tmp_path / "g.jsonl"
    g.write_text("\n".join(json.dumps(x) for x in gold) + "\n")
    code, out, _ = run(capsys, "eval", "--pred", p, "--gold", g, "--db-dir", tmp_path / "dbs")
    assert code == 0
    header, row = out.splitlines()
    assert header.split() == ["n", "EM", "E-SM", "EA"]
    assert row.split()[:2] == ["3", "66.7"]
    mismatch = tmp_path / "m.jsonl"
    mismatch.write_text(json.dumps({"question": "something else", "predicted_sql": "SELECT 1"}) + "\n")
    one = tmp_path / "one.jsonl"
    one.write_text(json.dumps(gold[0]) + "\n")
    code, _, err = run(capsys, "eval", "--pred", mismatch, "--gold", one)
    assert code == 1 and "different question" in err


def test_train_rejects_bad_config(capsys, tmp_path, corpus):
    train, _, _ = corpus
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"learning_rate": 1}))
    code, _, err = run(capsys, "train", "--train", train, "--out", tmp_path / "o", "--config", bad)
    assert code == 1 and "learning_rate" in err
