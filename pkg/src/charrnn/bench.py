"""Efficiency benchmark: perplexity against sequences seen and training time.

Each run samples ``(k1, k2)``, trains one schedule for a fixed budget of
training sequences (one sequence = one window from one lane) and records a
checkpoint every ``eval_every`` sequences, plus one before training starts.
The stopwatch only runs around training steps; evaluation is excluded.
"""

from __future__ import annotations

import csv
import hashlib
import html
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import Corpus, make_lanes
from .errors import ConfigError, ContractError
from .model import init_params
from .numkernel import Rng, rng_uniform_int
from .optim import ALPHA, BETA1, BETA2, EPS, adam_init
from .schedules import SCHEDULES, ScheduleConfig, ScheduleTrainer, evaluate

K_RANGE = (5, 50)

SCHEDULE_COLORS = {1: "blue", 2: "red", 3: "green", 4: "yellow"}

CSV_COLUMNS = ("run_id", "schedule", "k1", "k2", "seed", "sequences_seen",
               "wall_ms", "train_loss", "test_perplexity")


@dataclass(frozen=True)
class BenchPlan:
    schedules: tuple[int, ...] = SCHEDULES
    runs_per_schedule: int = 100
    sequence_budget: int = 500_000
    k_range: tuple[int, int] = K_RANGE
    batch_lanes: int = 50
    eval_every: int = 2_500
    master_seed: int = 0
    hidden: int = 50
    alpha: float = ALPHA
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS
    eval_cap: int | None = None
    # pins (k1, k2) for every run instead of sampling
    fixed_k: tuple[int, int] | None = None

    def __post_init__(self):
        if self.eval_every <= 0:
            raise ContractError("eval_every must be positive")
        if self.sequence_budget < self.eval_every:
            raise ContractError("sequence_budget must be at least eval_every")
        if self.runs_per_schedule < 1:
            raise ContractError("runs_per_schedule must be positive")
        for s in self.schedules:
            if s not in SCHEDULES:
                raise ContractError(f"unknown schedule {s}")
        lo, hi = self.k_range
        if not 1 <= lo <= hi:
            raise ContractError(f"invalid k range {self.k_range}")
        if self.fixed_k is not None and not 1 <= self.fixed_k[0] <= self.fixed_k[1]:
            raise ContractError(f"need k1 <= k2, got {self.fixed_k}")

    @property
    def max_k2(self) -> int:
        return self.fixed_k[1] if self.fixed_k is not None else self.k_range[1]


@dataclass(frozen=True)
class CheckpointRecord:
    run_id: int
    schedule: int
    k1: int
    k2: int
    seed: int
    sequences_seen: int
    wall_ms: float
    train_loss: float
    test_perplexity: float

    def same_except_wall(self, other: CheckpointRecord) -> bool:
        a, b = asdict(self), asdict(other)
        a.pop("wall_ms"), b.pop("wall_ms")
        return all(_float_eq(a[k], b[k]) for k in a)


def _float_eq(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of ints/strings (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def sample_config(rng: Rng, k_range: tuple[int, int] = K_RANGE) -> tuple[int, int]:
    """``k2`` uniform on the range, then ``k1`` uniform on ``[lo, k2]``."""
    lo, hi = k_range
    k2 = rng_uniform_int(rng, lo, hi)
    k1 = rng_uniform_int(rng, lo, k2)
    return k1, k2


@dataclass(frozen=True)
class RunSpec:
    run_id: int
    schedule: int
    run_index: int
    seed: int
    k1: int
    k2: int


def plan_runs(plan: BenchPlan) -> list[RunSpec]:
    runs = []
    run_id = 0
    for schedule in plan.schedules:
        for r in range(plan.runs_per_schedule):
            seed = derive_seed(plan.master_seed, schedule, r)
            if plan.fixed_k is not None:
                k1, k2 = plan.fixed_k
            else:
                k1, k2 = sample_config(Rng(derive_seed(seed, "k")), plan.k_range)
            runs.append(RunSpec(run_id, schedule, r, seed, k1, k2))
            run_id += 1
    return runs


def train_run(spec: RunSpec, plan: BenchPlan, corpus: Corpus) -> list[CheckpointRecord]:
    """Train one run to budget and return its checkpoints in order."""
    cfg = ScheduleConfig(spec.schedule, spec.k1, spec.k2, plan.batch_lanes, spec.seed)
    lanes = make_lanes(corpus.train, cfg.batch_lanes, cfg.k2)
    test = corpus.test if plan.eval_cap is None else corpus.test[:plan.eval_cap]
    params = init_params(spec.seed, corpus.V, plan.hidden)
    opt = adam_init(params, plan.alpha, plan.beta1, plan.beta2, plan.eps)
    trainer = ScheduleTrainer(cfg, lanes, params, opt)

    n_steps = plan.sequence_budget // cfg.batch_lanes
    elapsed = 0.0
    losses: list[float] = []
    records: list[CheckpointRecord] = []

    def checkpoint():
        train_loss = float(np.mean(losses)) if losses else math.nan
        records.append(CheckpointRecord(
            spec.run_id, spec.schedule, spec.k1, spec.k2, spec.seed,
            trainer.sequences_seen, elapsed * 1000.0, train_loss,
            evaluate(cfg, trainer.params, test),
        ))
        losses.clear()

    checkpoint()
    next_mark = plan.eval_every
    for step in range(n_steps):
        t0 = time.perf_counter()
        losses.append(trainer.step())
        elapsed += time.perf_counter() - t0
        if trainer.sequences_seen >= next_mark or step == n_steps - 1:
            checkpoint()
            while next_mark <= trainer.sequences_seen:
                next_mark += plan.eval_every
    return records


def _train_run_args(args):
    return train_run(*args)


def check_corpus(plan: BenchPlan, corpus: Corpus) -> None:
    make_lanes(corpus.train, plan.batch_lanes, plan.max_k2)
    test_len = len(corpus.test) if plan.eval_cap is None else min(plan.eval_cap, len(corpus.test))
    if test_len <= plan.max_k2:
        raise ConfigError(f"test stream of {test_len} characters must be longer than k2={plan.max_k2}")
    if corpus.V < 2:
        raise ConfigError("corpus needs at least two distinct characters")


def run_benchmark(
    plan: BenchPlan,
    corpus: Corpus,
    out_sink: Callable[[CheckpointRecord], None] | list | None = None,
    workers: int = 1,
) -> list[CheckpointRecord]:
    """Run every (schedule, run) of ``plan``; records come back in run order.

    With ``workers > 1`` runs execute in separate processes. Results do not
    depend on the worker count apart from ``wall_ms``.
    """
    check_corpus(plan, corpus)
    runs = plan_runs(plan)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_run = list(pool.map(_train_run_args, [(r, plan, corpus) for r in runs]))
    else:
        per_run = [train_run(r, plan, corpus) for r in runs]

    records = [rec for recs in per_run for rec in recs]
    if out_sink is not None:
        append = out_sink.append if isinstance(out_sink, list) else out_sink
        for rec in records:
            append(rec)
    return records


def write_csv(records: Sequence[CheckpointRecord], path) -> Path:
    if not records:
        raise ContractError("nothing to write")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            # repr() of a float is the shortest string that round-trips
            w.writerow([r.run_id, r.schedule, r.k1, r.k2, r.seed, r.sequences_seen,
                        repr(float(r.wall_ms)), repr(float(r.train_loss)), repr(float(r.test_perplexity))])
    return path


def read_csv(path) -> list[CheckpointRecord]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        types = {f.name: f.type for f in fields(CheckpointRecord)}
        out = []
        for row in reader:
            out.append(CheckpointRecord(**{
                k: (int(v) if types[k] in (int, "int") else float(v)) for k, v in row.items()
            }))
        return out


def render_curves(records: Iterable[CheckpointRecord], axis: str, path,
                  log_y: bool = False, width: int = 800, height: int = 500) -> Path:
    """Write an SVG with one polyline per run, colored by schedule."""
    if axis not in ("sequences", "wall_ms"):
        raise ContractError(f"axis must be 'sequences' or 'wall_ms', got {axis!r}")
    records = list(records)
    if not records:
        raise ContractError("no records to plot")
    runs: dict[int, list[CheckpointRecord]] = {}
    for r in records:
        runs.setdefault(r.run_id, []).append(r)

    xval = (lambda r: float(r.sequences_seen)) if axis == "sequences" else (lambda r: float(r.wall_ms))
    yval = (lambda r: math.log10(r.test_perplexity)) if log_y else (lambda r: r.test_perplexity)
    xs = [xval(r) for r in records]
    ys = [yval(r) for r in records]
    x_max = max(xs) or 1.0
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    left, right, top, bottom = 70, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + pw * x / x_max

    def py(y):
        return top + ph * (1.0 - (y - y_lo) / (y_hi - y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x_max * k / 4
        yv = y_lo + (y_hi - y_lo) * k / 4
        ylab = 10 ** yv if log_y else yv
        out.append(f'<text x="{px(xv):.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.2f}" font-size="11" text-anchor="end">{ylab:.4g}</text>')
    xlabel = "training sequences" if axis == "sequences" else "training time (ms)"
    ylabel = "test perplexity" + (" (log scale)" if log_y else "")
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" font-size="13" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{ylabel}</text>')

    for run_id, recs in runs.items():
        color = SCHEDULE_COLORS[recs[0].schedule]
        pts = " ".join(f"{px(xval(r)):.2f},{py(yval(r)):.2f}" for r in recs)
        out.append(
            f'<polyline data-run="{run_id}" data-schedule="{recs[0].schedule}" '
            f'data-k1="{recs[0].k1}" data-k2="{recs[0].k2}" fill="none" stroke="{color}" '
            f'stroke-width="1.2" points="{pts}"/>'
        )
        if len(recs) == 1:
            r = recs[0]
            out.append(f'<circle cx="{px(xval(r)):.2f}" cy="{py(yval(r)):.2f}" r="3" fill="{color}"/>')

    present = sorted({r.schedule for r in records})
    for k, s in enumerate(present):
        y = top + 10 + 20 * k
        out.append(f'<g class="legend"><line x1="{left + pw + 15}" y1="{y}" x2="{left + pw + 40}" y2="{y}" '
                   f'stroke="{SCHEDULE_COLORS[s]}" stroke-width="3"/>'
                   f'<text x="{left + pw + 46}" y="{y + 4}" font-size="12">{html.escape(f"schedule {s}")}</text></g>')
    out.append("</svg>")

    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
