"""Teacher-forced training, the L-inv schedule and finite-difference gradient checks."""

from __future__ import annotations

import copy
import csv
import logging
import random
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import torch

from .anchor import AnchorMatch, MatchConfig, select_anchors
from .evalkit import exact_match, exact_set_match
from .hybrid import SchemaView, shuffle_and_drop
from .model import AnchorNet, ModelConfig, Prepared, beam_search, prepare, save
from .schema import Schema
from .sqlkit import parse, tables_used

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    gamma_0: float = 1e-2
    warmup_steps: int = 200
    n_max: int = 3000
    batch_size: int = 8
    p_drop: float = 0.3
    seed: int = 0
    bridging: bool = True
    metadata: bool = True
    shuffle_drop: bool = True
    value_marker_only: bool = False
    literal_beta: bool = False  # beta = gamma_0 / sqrt(n_max) as printed
    clip_norm: float | None = 5.0
    sc_guided: bool = True  # decoding switches used for dev selection
    static_check: bool = True
    eval_every: int = 250
    eval_beam: int = 4
    log_every: int = 50

    def __post_init__(self):
        if not self.n_max > self.warmup_steps >= 0:
            raise ValueError("need n_max > warmup_steps >= 0")
        if self.gamma_0 <= 0:
            raise ValueError("gamma_0 must be positive")
        if not 0.0 <= self.p_drop <= 1.0:
            raise ValueError("p_drop must lie in [0, 1]")

    @property
    def value_mode(self) -> str:
        if not self.bridging:
            return "none"
        return "marker" if self.value_marker_only else "full"


def linv_lr(n: int, c: TrainConfig) -> float:
    """Linear warmup to gamma_0, then k * (1/sqrt(n) - beta*n) clamped at 0.

    k makes the two pieces meet at the warmup boundary.  beta = n_max^-1.5
    puts the zero exactly at n_max; ``literal_beta`` uses 1/sqrt(n_max)
    instead, which reaches zero near n_max^(1/3) (immediately when the
    warmup already extends past that point).
    """
    if not 0 <= n <= c.n_max:
        raise ValueError(f"step {n} outside [0, {c.n_max}]")
    w = c.warmup_steps
    if n < w:
        return c.gamma_0 * n / w
    beta = c.n_max ** -0.5 if c.literal_beta else c.n_max ** -1.5
    w = max(w, 1)
    at_w = w ** -0.5 - beta * w
    if at_w <= 0:
        return 0.0
    n = max(n, 1)
    return max(0.0, c.gamma_0 / at_w * (n ** -0.5 - beta * n))


def loss(dists: Sequence[torch.Tensor], targets: Sequence[Sequence[int]]) -> torch.Tensor:
    """-sum_t log sum_{p in targets[t]} dists[t][p]."""
    if len(dists) != len(targets):
        raise ValueError(f"{len(dists)} step distributions but {len(targets)} targets")
    total = torch.zeros((), dtype=dists[0].dtype if dists else torch.float64)
    for t, (d, pos) in enumerate(zip(dists, targets)):
        p = d[list(pos)].sum()
        if float(p) <= 0.0:
            raise ValueError(f"target at step {t} has zero probability")
        total = total - torch.log(p)
    return total


# -- data ------------------------------------------------------------------

@dataclass
class Sample:
    """One corpus example with its anchors computed once."""

    question: str
    schema: Schema
    sql: str
    anchors: list[AnchorMatch]
    gold_tables: frozenset[int]
    db_path: str | None = None


def make_samples(records: Sequence[dict], schemas: dict[str, Schema], match_cfg: MatchConfig = MatchConfig(), dbs: dict | None = None) -> list[Sample]:
    out = []
    for r in records:
        s = schemas[r["db_id"]]
        q = parse(r["query"], s)
        out.append(Sample(r["question"], s, r["query"], select_anchors(r["question"], s, match_cfg),
                          frozenset(tables_used(q)), (dbs or {}).get(r["db_id"])))
    return out


def prepare_sample(x: Sample, mcfg: ModelConfig, value_mode: str, view: SchemaView | None = None) -> Prepared:
    return prepare(x.question, x.schema, mcfg, x.sql, anchors=x.anchors if value_mode != "none" else [], view=view, value_mode=value_mode)


# -- evaluation during training ---------------------------------------------

def decode_all(models, samples: Sequence[Sample], mcfg: ModelConfig, value_mode: str, beam: int = 4, **kw) -> list:
    results = []
    for x in samples:
        ex = prepare_sample(x, mcfg, value_mode)
        results.append(beam_search(models, ex, width=beam, **{"max_len": 60, **kw}))
    return results


def score(models, samples: Sequence[Sample], mcfg: ModelConfig, value_mode: str, beam: int = 4, **kw) -> tuple[float, float]:
    """(EM %, E-SM %) of beam decoding on ``samples``."""
    if not samples:
        return 0.0, 0.0
    em = esm = 0
    for x, r in zip(samples, decode_all(models, samples, mcfg, value_mode, beam, **kw)):
        e = exact_match(r.sql, x.sql, x.schema)
        em += e
        esm += e or exact_set_match(r.sql, x.sql, x.schema)
    return 100.0 * em / len(samples), 100.0 * esm / len(samples)


# -- training ----------------------------------------------------------------

@dataclass
class TrainResult:
    model: AnchorNet
    best_step: int
    best_dev_esm: float | None
    metrics: list[dict] = field(default_factory=list)
    skipped: int = 0
    seconds: float = 0.0


def train(
    train_set: Sequence[Sample],
    cfg: TrainConfig = TrainConfig(),
    dev_set: Sequence[Sample] = (),
    mcfg: ModelConfig | None = None,
    out_dir: str | Path | None = None,
    progress: Callable[[dict], None] | None = None,
    header: dict | None = None,
) -> TrainResult:
    """Adam with the L-inv schedule; keeps the parameters with the best dev E-SM.

    Examples whose gold query cannot be produced by the decoder are skipped
    and counted.  With ``out_dir`` a metrics CSV and the best checkpoint are
    written there; ``header`` adds entries to the checkpoint header.
    """
    started = time.perf_counter()
    mcfg = replace(mcfg or ModelConfig(), use_metadata=cfg.metadata)
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    model = AnchorNet(mcfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.gamma_0)
    vm = cfg.value_mode

    usable = [x for x in train_set if prepare_sample(x, mcfg, vm).teacher is not None]
    skipped = len(train_set) - len(usable)
    if not usable:
        raise ValueError("no training example has a producible target")
    static_cache = {} if cfg.shuffle_drop else {id(x): prepare_sample(x, mcfg, vm) for x in usable}

    metrics: list[dict] = []
    best_state, best_step, best_esm = None, 0, None
    order: list[int] = []
    writer = None
    fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = open(out_dir / "metrics.csv", "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=["step", "lr", "loss", "dev_em", "dev_esm"])
        writer.writeheader()
    try:
        for step in range(1, cfg.n_max + 1):
            batch = []
            while len(batch) < cfg.batch_size:
                if not order:
                    order = list(range(len(usable)))
                    rng.shuffle(order)
                x = usable[order.pop()]
                if cfg.shuffle_drop:
                    view = shuffle_and_drop(x.schema, x.gold_tables, cfg.p_drop, rng)
                    ex = prepare_sample(x, mcfg, vm, view)
                else:
                    ex = static_cache[id(x)]
                if ex.teacher is not None:
                    batch.append(ex)
            lr = linv_lr(step, cfg)
            for g in opt.param_groups:
                g["lr"] = lr
            model.train()
            opt.zero_grad()
            value = model.nll([e.encoder_input for e in batch], [e.teacher for e in batch])
            if not torch.isfinite(value):
                raise FloatingPointError(f"non-finite loss at step {step}")
            value.backward()
            if cfg.clip_norm:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            opt.step()

            row = {"step": step, "lr": lr, "loss": value.item(), "dev_em": "", "dev_esm": ""}
            if dev_set and (step % cfg.eval_every == 0 or step == cfg.n_max):
                model.eval()
                dem, desm = score(model, dev_set, mcfg, vm, cfg.eval_beam, guided=cfg.sc_guided, static=cfg.static_check)
                row["dev_em"], row["dev_esm"] = dem, desm
                if best_esm is None or desm > best_esm:
                    best_esm, best_step = desm, step
                    best_state = copy.deepcopy(model.state_dict())
            if step % cfg.log_every == 0 or row["dev_esm"] != "" or step == cfg.n_max:
                metrics.append(row)
                if writer:
                    writer.writerow(row)
                if progress:
                    progress(row)
                log.info("step %d lr %.2e loss %.4f dev %s/%s", step, lr, row["loss"], row["dev_em"], row["dev_esm"])
    finally:
        if fh:
            fh.close()
    if best_state is not None:
        model.load_state_dict(best_state)
    else:
        best_step = cfg.n_max
    model.eval()
    if out_dir is not None:
        save(model, Path(out_dir) / "model.ckpt", {**(header or {}), "train": asdict(cfg), "best_step": best_step, "best_dev_esm": best_esm})
    return TrainResult(model, best_step, best_esm, metrics, skipped, time.perf_counter() - started)


# -- gradient check ----------------------------------------------------------

def grad_errors(model: AnchorNet, examples: Sequence[Prepared], step: float = 1e-4, coords: int = 3, seed: int = 0,
                hooks: Callable[[AnchorNet], None] | None = None) -> dict[str, float]:
    """Autograd versus central differences on a float64 copy, per parameter block.

    For each block the coordinates with the largest analytic gradient plus a
    few random ones are probed; the error is ||g_a - g_n|| / max(||g_a||, ||g_n||)
    over the probed coordinates (0 when both vanish).  A probe whose +/- step
    flips the sign of any fusion pre-activation straddles a ReLU kink, where
    the loss is not differentiable, and is left out.  ``hooks`` may install
    gradient hooks on the copy (used to corrupt a gradient on purpose).
    """
    m = copy.deepcopy(model).double()
    m.eval()
    inputs = [e.encoder_input for e in examples]
    teachers = [e.teacher for e in examples]
    if any(t is None for t in teachers):
        raise ValueError("grad_check needs examples with training targets")
    if hooks:
        hooks(m)
    signs: list[torch.Tensor] = []
    m.encoder.W_g.register_forward_hook(lambda mod, inp, out: signs.append(out.detach() > 0))

    def f() -> tuple[float, torch.Tensor]:
        signs.clear()
        with torch.no_grad():
            value = float(m.nll(inputs, teachers))
        return value, signs[-1]

    m.zero_grad()
    m.nll(inputs, teachers).backward()
    gen = torch.Generator().manual_seed(seed)
    errors = {}
    for name, p in m.named_parameters():
        g = p.grad.detach().clone().flatten() if p.grad is not None else torch.zeros(p.numel(), dtype=p.dtype)
        k = min(coords, p.numel())
        idx = set(torch.topk(g.abs(), k).indices.tolist())
        idx.update(torch.randint(0, p.numel(), (k,), generator=gen).tolist())
        flat = p.data.view(-1)
        kept, numeric = [], []
        for i in sorted(idx):
            old = flat[i].item()
            flat[i] = old + step
            up, s_up = f()
            flat[i] = old - step
            down, s_down = f()
            flat[i] = old
            if not torch.equal(s_up, s_down):
                continue
            kept.append(i)
            numeric.append((up - down) / (2 * step))
        if not kept:
            continue
        ga = g[kept]
        gn = torch.tensor(numeric, dtype=ga.dtype)
        scale = max(ga.norm().item(), gn.norm().item())
        errors[name] = 0.0 if scale < 1e-10 else (ga - gn).norm().item() / scale
    return errors


def grad_check(model: AnchorNet, examples: Prepared | Sequence[Prepared], step: float = 1e-4, **kw) -> float:
    """Largest per-block relative error reported by :func:`grad_errors`."""
    if isinstance(examples, Prepared):
        examples = [examples]
    return max(grad_errors(model, examples, step, **kw).values(), default=0.0)
