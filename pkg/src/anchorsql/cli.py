"""Command-line entry point: preprocess, match-anchors, normalize-sql, check, train, decode, eval.

Every JSONL artifact starts with a header line ``{"format": "anchorsql-<kind>", "version": N}``
so each stage can be rerun on its own.  The data root (schemas, example
files) defaults to the bundled toy corpus and can be moved with the
``ANCHORSQL_DATA_ROOT`` environment variable or ``--data-root``.

Exit status: 0 on success, 1 on a runtime error (or, for ``check``, when a
violation is found), 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import torch

from . import __version__, toy
from .anchor import AnchorMatch, MatchConfig, select_anchors
from .evalkit import judge
from .guard import lemma1_scan, lemma2_scan, static_check
from .hybrid import serialize
from .model import ModelConfig, beam_search, load, prepare
from .model.checkpoint import read_header
from .schema import Schema, SchemaError, load_schemas, sqlite_path
from .sqlkit import SqlError, parse, render_tokens, to_exec_order, to_written
from .trainer import TrainConfig, make_samples, train

ENV_DATA_ROOT = "ANCHORSQL_DATA_ROOT"
FORMAT_VERSION = 1
ABLATIONS = {
    "bridging": {"bridging": False},
    "metadata": {"metadata": False},
    "shuffle-drop": {"shuffle_drop": False},
    "sc-decoding": {"sc_guided": False},
    "static-check": {"static_check": False},
    "value-marker-only": {"value_marker_only": True},
}

log = logging.getLogger("anchorsql")


class CliError(Exception):
    """A runtime failure reported as ``anchorsql: error: ...`` with exit status 1."""


# -- files ------------------------------------------------------------------

def header(kind: str) -> dict:
    return {"format": f"anchorsql-{kind}", "version": FORMAT_VERSION}


def read_records(path: str | Path) -> tuple[dict | None, list[dict]]:
    """(header or None, records) from a JSONL file, or from a JSON list (Spider style)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from e
    if text.lstrip().startswith("["):
        try:
            return None, json.loads(text)
        except json.JSONDecodeError as e:
            raise CliError(f"{path}:{e.lineno}: malformed JSON ({e.msg})") from e
    records, head = [], None
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CliError(f"{path}:{n}: malformed JSON line ({e.msg})") from e
        if n == 1 and isinstance(obj, dict) and str(obj.get("format", "")).startswith("anchorsql-"):
            if obj.get("version") != FORMAT_VERSION:
                raise CliError(f"{path}: unsupported {obj['format']} version {obj.get('version')}")
            head = obj
            continue
        records.append(obj)
    return head, records


def write_records(path: str | None, kind: str, records: Iterable[dict], extra: dict | None = None) -> None:
    lines = [json.dumps({**header(kind), **(extra or {})}, sort_keys=True)]
    lines += [json.dumps(r, sort_keys=True) for r in records]
    _emit(path, "\n".join(lines) + "\n")


def _emit(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _read_lines(path: str | None) -> list[str]:
    if path in (None, "-"):
        return sys.stdin.read().splitlines()
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from e


def gold_of(r: dict) -> str | None:
    return r.get("query", r.get("gold_sql"))


# -- shared context -----------------------------------------------------------

class Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.root = Path(args.data_root) if args.data_root else toy.bundled_dir()
        self._schemas: dict[str, Schema] | None = None

    @property
    def schemas(self) -> dict[str, Schema]:
        if self._schemas is None:
            path = Path(self.args.schemas) if getattr(self.args, "schemas", None) else self.root / "tables.json"
            self._schemas = load_schemas(path)
        return self._schemas

    def schema(self, db_id: str) -> Schema:
        try:
            return self.schemas[db_id]
        except KeyError:
            raise CliError(f"unknown db_id {db_id!r}") from None

    def data_file(self, given: str | None, default: str) -> Path:
        return Path(given) if given else self.root / default

    def pmap(self, fn, items: Sequence):
        jobs = max(1, self.args.jobs)
        if jobs == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(fn, items))


def _match_config(args, base: MatchConfig = MatchConfig()) -> MatchConfig:
    kw = {}
    for name in ("k", "theta_q", "theta_c"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    if getattr(args, "keep_numbers", False):
        kw["exclude_numbers"] = False
    return replace(base, **kw)


def _add_match_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="anchors kept per field (default 2)")
    p.add_argument("--theta-q", type=float, help="question-side threshold (default 0.5)")
    p.add_argument("--theta-c", type=float, help="cell-side threshold (default 0.8)")
    p.add_argument("--keep-numbers", action="store_true", help="also match numeric cell values")


def _anchor_json(a: AnchorMatch, s: Schema) -> dict:
    return {**a.to_json(), "field_name": s.qualified_name(a.field)}


def _anchor_from_json(d: dict) -> AnchorMatch:
    return AnchorMatch(d["field"], d["cell_value"], tuple(d["span"]), d["question_text"], d["matched"], d["beta_q"], d["beta_c"])


# -- commands -----------------------------------------------------------------

def cmd_match_anchors(ctx: Context) -> int:
    a = ctx.args
    cfg = _match_config(a)
    _, recs = read_records(ctx.data_file(a.input, "train.jsonl"))

    def one(r):
        s = ctx.schema(r["db_id"])
        return {"db_id": r["db_id"], "question": r["question"],
                "anchors": [_anchor_json(m, s) for m in select_anchors(r["question"], s, cfg)]}

    write_records(a.output, "anchors", ctx.pmap(one, recs), {"match": asdict(cfg)})
    return 0


def cmd_preprocess(ctx: Context) -> int:
    a = ctx.args
    cfg = _match_config(a)
    mode = "none" if a.no_bridging else ("marker" if a.value_marker_only else "full")
    _, recs = read_records(ctx.data_file(a.input, "train.jsonl"))

    def one(r):
        s = ctx.schema(r["db_id"])
        anchors = select_anchors(r["question"], s, cfg) if mode != "none" else []
        h = serialize(r["question"], s, anchors, mode)
        out = {"db_id": r["db_id"], "question": r["question"], "value_mode": mode, "hybrid": h.to_json(),
               "anchors": [_anchor_json(m, s) for m in anchors]}
        if gold_of(r) is not None:
            out["query"] = gold_of(r)
        return out

    write_records(a.output, "preprocessed", ctx.pmap(one, recs), {"match": asdict(cfg), "value_mode": mode})
    return 0


def cmd_normalize_sql(ctx: Context) -> int:
    a = ctx.args
    s = ctx.schema(a.db)
    out = []
    for n, line in enumerate(_read_lines(a.input), 1):
        if not line.strip():
            continue
        try:
            q = parse(line, s)
            toks = to_exec_order(q, s)
        except SqlError as e:
            raise CliError(f"line {n}: {e}") from e
        if a.check_lemmas:
            l1, l2 = lemma1_scan(toks, s), lemma2_scan(toks)
            out.append(json.dumps({"line": n, "lemma1": not l1, "lemma2": not l2,
                                   "violations": [v.to_json() for v in l1 + l2]}, sort_keys=True))
        elif a.written:
            out.append(to_written(toks, s))
        else:
            out.append(render_tokens(toks))
    _emit(a.output, "".join(x + "\n" for x in out))
    return 0


def cmd_check(ctx: Context) -> int:
    a = ctx.args
    s = ctx.schema(a.db)
    out, bad = [], 0
    for n, line in enumerate(_read_lines(a.input), 1):
        if not line.strip():
            continue
        found = static_check(line, s)
        bad += bool(found)
        out.append(json.dumps({"line": n, "ok": not found, "violations": [v.to_json() for v in found]}, sort_keys=True))
    _emit(a.output, "".join(x + "\n" for x in out))
    if bad:
        print(f"anchorsql: {bad} of {len(out)} sequences violate the schema-consistency rules", file=sys.stderr)
    return 1 if bad else 0


def _samples(ctx: Context, path: Path, mcfg: MatchConfig):
    head, recs = read_records(path)
    if head and head["format"] == "anchorsql-preprocessed":
        samples = make_samples(recs, ctx.schemas, mcfg)
        for x, r in zip(samples, recs):
            x.anchors = [_anchor_from_json(d) for d in r["anchors"]]
        return samples, head.get("value_mode")
    missing = [i for i, r in enumerate(recs) if gold_of(r) is None]
    if missing:
        raise CliError(f"{path}: record {missing[0] + 1} has no gold query")
    return make_samples([{**r, "query": gold_of(r)} for r in recs], ctx.schemas, mcfg), None


def _train_config(a, conf: dict) -> tuple[TrainConfig, ModelConfig, MatchConfig]:
    known = {f.name for f in fields(TrainConfig)}
    tc = {k: v for k, v in conf.items() if k not in ("model", "match")}
    unknown = sorted(set(tc) - known)
    if unknown:
        raise CliError(f"unknown training options in config: {', '.join(unknown)}")
    for name in a.ablate or []:
        tc.update(ABLATIONS[name])
    if a.steps is not None:
        tc["n_max"] = a.steps
    if a.seed is not None:
        tc["seed"] = a.seed
    try:
        return TrainConfig(**tc), ModelConfig(**conf.get("model", {})), MatchConfig(**conf.get("match", {}))
    except TypeError as e:
        raise CliError(f"bad config: {e}") from e


def cmd_train(ctx: Context) -> int:
    a = ctx.args
    conf = {}
    if a.config:
        try:
            conf = json.loads(Path(a.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"{a.config}: cannot read config ({e})") from e
    cfg, model_cfg, match_cfg = _train_config(a, conf)
    train_set, mode = _samples(ctx, ctx.data_file(a.train, "train.jsonl"), match_cfg)
    if mode is not None and mode != cfg.value_mode:
        log.warning("training file was preprocessed with value mode %r; using it", mode)
        cfg = replace(cfg, bridging=mode != "none", value_marker_only=mode == "marker")
    dev_set = _samples(ctx, Path(a.dev), match_cfg)[0] if a.dev else []

    def progress(row):
        if not a.quiet:
            print(json.dumps(row, sort_keys=True), file=sys.stderr)

    res = train(train_set, cfg, dev_set, model_cfg, a.out, progress, header={"match": asdict(match_cfg)})
    print(json.dumps({"checkpoint": str(Path(a.out) / "model.ckpt"), "best_step": res.best_step,
                      "best_dev_esm": res.best_dev_esm, "skipped": res.skipped, "seconds": round(res.seconds, 1)},
                     sort_keys=True))
    return 0


def _load_models(paths: Sequence[str]):
    models, heads = [], []
    for p in paths:
        try:
            heads.append(read_header(p))
            models.append(load(p))
        except (OSError, ValueError) as e:
            raise CliError(f"{p}: cannot load checkpoint ({e})") from e
    first = heads[0]["extra"].get("train", {})
    for p, h in zip(paths[1:], heads[1:]):
        t = h["extra"].get("train", {})
        if (t.get("bridging"), t.get("value_marker_only")) != (first.get("bridging"), first.get("value_marker_only")):
            raise CliError(f"{p}: ensemble members were trained with different value modes")
        if h["config"] != heads[0]["config"]:
            raise CliError(f"{p}: ensemble members have different model configurations")
    return models, heads[0]


def cmd_decode(ctx: Context) -> int:
    a = ctx.args
    paths = [p for p in a.ensemble.split(",") if p] if a.ensemble else ([a.model] if a.model else [])
    if not paths:
        raise CliError("decode needs --model or --ensemble")
    models, head = _load_models(paths)
    tcfg = head["extra"].get("train", {})
    mode = "none" if not tcfg.get("bridging", True) else ("marker" if tcfg.get("value_marker_only") else "full")
    mcfg = _match_config(a, MatchConfig(**head["extra"].get("match", {})))
    guided = not a.no_sc_guided and tcfg.get("sc_guided", True)
    static = not a.no_static_check and tcfg.get("static_check", True)
    model_cfg = models[0].cfg
    _, recs = read_records(ctx.data_file(a.input, "heldout.jsonl"))

    def one(r):
        s = ctx.schema(r["db_id"])
        ex = prepare(r["question"], s, model_cfg, value_mode=mode, match_cfg=mcfg)
        res = beam_search(models if len(models) > 1 else models[0], ex, width=a.beam, max_len=a.max_len,
                          guided=guided, static=static)
        return {"db_id": r["db_id"], "question": r["question"], "predicted_sql": res.sql,
                "beam_rank": res.beam_rank, "fell_back": res.fell_back}

    with torch.no_grad():
        out = ctx.pmap(one, recs)
    write_records(a.output, "predictions", out, {"models": paths, "beam": a.beam})
    return 0


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.1f}"


def cmd_eval(ctx: Context) -> int:
    a = ctx.args
    _, preds = read_records(a.pred)
    _, golds = read_records(ctx.data_file(a.gold, "heldout.jsonl"))
    if len(preds) != len(golds):
        raise CliError(f"{len(preds)} predictions for {len(golds)} gold examples")
    db_dir = Path(a.db_dir) if a.db_dir else None

    def one(pair):
        i, (p, g) = pair
        if p.get("question") is not None and p["question"] != g["question"]:
            raise CliError(f"record {i + 1}: prediction is for a different question")
        s = ctx.schema(g["db_id"])
        db = sqlite_path(db_dir, g["db_id"]) if db_dir else None
        if db is not None and not db.exists():
            db = db_dir / f"{g['db_id']}.sqlite"
        try:
            v = judge(p["predicted_sql"], gold_of(g), s, db if db is not None and db.exists() else None)
        except (SqlError, ValueError) as e:
            raise CliError(f"record {i + 1}: {e}") from e
        return {"index": i, "db_id": g["db_id"], "question": g["question"], **v.to_json()}

    verdicts = ctx.pmap(one, list(enumerate(zip(preds, golds))))
    if a.verdicts:
        write_records(a.verdicts, "verdicts", verdicts)
    n = len(verdicts)

    def pct(key):
        vals = [v[key] for v in verdicts if v[key] is not None]
        return 100.0 * sum(vals) / len(vals) if vals else None

    summary = {"n": n, "em": pct("em"), "esm": pct("esm"), "ea": pct("ea")}
    if a.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"{'n':>6} {'EM':>6} {'E-SM':>6} {'EA':>6}")
        print(f"{n:>6} {_fmt(summary['em']):>6} {_fmt(summary['esm']):>6} {_fmt(summary['ea']):>6}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anchorsql", description="Text-to-SQL with anchor texts and schema-consistent decoding.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=None, help="seed for all randomness (training uses it over the config)")
    p.add_argument("--jobs", type=int, default=1, help="example-level parallelism (default 1)")
    p.add_argument("--data-root", default=None, help=f"data directory (default ${ENV_DATA_ROOT} or the bundled toy corpus)")
    p.add_argument("--schemas", default=None, help="tables.json (default <data root>/tables.json)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    q = sub.add_parser("preprocess", help="serialize examples with anchor texts")
    q.add_argument("--input", help="examples JSONL (default <data root>/train.jsonl)")
    q.add_argument("--output", "-o", help="output JSONL (default stdout)")
    q.add_argument("--no-bridging", action="store_true", help="serialize without anchor texts")
    q.add_argument("--value-marker-only", action="store_true", help="keep [V] markers but drop the values")
    _add_match_flags(q)
    q.set_defaults(run=cmd_preprocess)

    q = sub.add_parser("match-anchors", help="list anchor matches per example")
    q.add_argument("--input", help="examples JSONL (default <data root>/train.jsonl)")
    q.add_argument("--output", "-o")
    _add_match_flags(q)
    q.set_defaults(run=cmd_match_anchors)

    q = sub.add_parser("normalize-sql", help="SQL lines to execution-order token lines")
    q.add_argument("--db", required=True, help="db_id of the schema")
    q.add_argument("--input", help="SQL file, one query per line (default stdin)")
    q.add_argument("--output", "-o")
    g = q.add_mutually_exclusive_group()
    g.add_argument("--written", action="store_true", help="emit round-tripped written-order SQL")
    g.add_argument("--check-lemmas", action="store_true", help="emit per-line field-scope and transition verdicts")
    q.set_defaults(run=cmd_normalize_sql)

    q = sub.add_parser("check", help="static check of execution-order token lines")
    q.add_argument("--db", required=True)
    q.add_argument("--input", help="token lines (default stdin)")
    q.add_argument("--output", "-o")
    q.set_defaults(run=cmd_check)

    q = sub.add_parser("train", help="train one model")
    q.add_argument("--train", help="examples or preprocessed JSONL (default <data root>/train.jsonl)")
    q.add_argument("--dev", help="dev examples for checkpoint selection")
    q.add_argument("--out", required=True, help="output directory for metrics.csv and model.ckpt")
    q.add_argument("--config", help='JSON file with training options plus optional "model" and "match" objects')
    q.add_argument("--ablate", action="append", choices=sorted(ABLATIONS), help="disable a component (repeatable)")
    q.add_argument("--steps", type=int, help="override n_max")
    q.add_argument("--quiet", action="store_true", help="no per-step progress on stderr")
    q.set_defaults(run=cmd_train)

    q = sub.add_parser("decode", help="predict SQL for examples")
    q.add_argument("--model", help="checkpoint")
    q.add_argument("--ensemble", help="comma-separated checkpoints averaged at every step")
    q.add_argument("--input", help="examples JSONL (default <data root>/heldout.jsonl)")
    q.add_argument("--output", "-o")
    q.add_argument("--beam", type=int, default=16)
    q.add_argument("--max-len", type=int, default=200)
    q.add_argument("--no-sc-guided", action="store_true", help="disable field and transition masks")
    q.add_argument("--no-static-check", action="store_true", help="accept the top beam without the static check")
    _add_match_flags(q)
    q.set_defaults(run=cmd_decode)

    q = sub.add_parser("eval", help="score predictions against gold queries")
    q.add_argument("--pred", required=True, help="predictions JSONL from decode")
    q.add_argument("--gold", help="gold examples JSONL (default <data root>/heldout.jsonl)")
    q.add_argument("--db-dir", help="SQLite files as <dir>/database/<db>/<db>.sqlite or <dir>/<db>.sqlite")
    q.add_argument("--verdicts", help="write per-example verdict JSONL here")
    q.add_argument("--json", action="store_true", help="print the aggregate as JSON")
    q.set_defaults(run=cmd_eval)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    import os

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.data_root is None:
        args.data_root = os.environ.get(ENV_DATA_ROOT) or None
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.seed is not None:
        random.seed(args.seed)
        torch.manual_seed(args.seed)
    try:
        return args.run(Context(args))
    except (CliError, SchemaError, SqlError, ValueError, FloatingPointError, OSError) as e:
        print(f"anchorsql: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
