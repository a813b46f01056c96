"""Command-line entry point: ``python -m charrnn <command> [flags]``.

Commands::

    train      train one schedule, optionally save a snapshot and a CSV of checkpoints
    eval       test perplexity of a snapshot (or of an all-zero model)
    bench      run the schedule comparison and write CSV (and SVG)
    plot       render curves from a benchmark CSV
    gradcheck  finite-difference check of the analytic gradients
"""

from __future__ import annotations

import argparse
import struct
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bench import BenchPlan, read_csv, render_curves, run_benchmark, write_csv
from .data import Corpus, sample_corpus_path
from .errors import ConfigError, ContractError
from .model import ModelParams, gradient_suite
from .optim import ALPHA, BETA1, BETA2, EPS
from .schedules import ScheduleConfig, evaluate

COMMANDS = ("train", "eval", "bench", "plot", "gradcheck")

SNAPSHOT_MAGIC = b"CRNNSNAP"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sIII")


@dataclass
class CliConfig:
    command: str
    corpus_path: str | None = None
    schedule: int = 1
    schedules: tuple[int, ...] = (1, 2, 3, 4)
    k1: int | None = None
    k2: int | None = None
    hidden: int = 50
    lanes: int = 50
    budget: int = 500_000
    runs: int = 100
    alpha: float = ALPHA
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS
    seed: int = 0
    eval_every: int = 2_500
    out_csv: str | None = None
    out_svg: str | None = None
    out_model: str | None = None
    model: str | None = None
    zero_model: bool = False
    in_csv: str | None = None
    axis: str = "sequences"
    log_y: bool = False
    test_fraction: float = 0.01
    eval_cap: int | None = None
    workers: int = 1
    configs: int = 20


def save_snapshot(params: ModelParams, path) -> Path:
    """Header ``(magic, version, V, H)`` followed by the flat little-endian float64 parameters."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, params.V, params.H))
        fh.write(params.flat.astype("<f8").tobytes())
    return path


def load_snapshot(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, V, H = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a model snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    body = raw[_HEADER.size:]
    n = ModelParams.size_for(V, H)
    if len(body) != 8 * n:
        raise ValueError(f"{path}: expected {n} parameters for V={V}, H={H}, found {len(body) // 8}")
    return ModelParams(V, H, np.frombuffer(body, dtype="<f8").astype(np.float64))


def _schedule_list(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated schedule ids, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--corpus", dest="corpus_path", help="plain-text corpus (default: bundled sample)")
    common.add_argument("--schedule", type=int, default=1)
    common.add_argument("--schedules", type=_schedule_list, default=(1, 2, 3, 4))
    common.add_argument("--k1", type=int)
    common.add_argument("--k2", type=int)
    common.add_argument("--hidden", type=int, default=50)
    common.add_argument("--lanes", type=int, default=50)
    common.add_argument("--budget", type=int, default=500_000, help="training sequences per run")
    common.add_argument("--runs", type=int, default=100, help="runs per schedule (bench)")
    common.add_argument("--alpha", type=float, default=ALPHA)
    common.add_argument("--beta1", type=float, default=BETA1)
    common.add_argument("--beta2", type=float, default=BETA2)
    common.add_argument("--eps", type=float, default=EPS)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eval-every", dest="eval_every", type=int, default=2_500)
    common.add_argument("--out-csv", dest="out_csv")
    common.add_argument("--out-svg", dest="out_svg")
    common.add_argument("--out-model", dest="out_model")
    common.add_argument("--model", help="snapshot to evaluate")
    common.add_argument("--zero-model", dest="zero_model", action="store_true",
                        help="evaluate an all-zero model instead of a snapshot")
    common.add_argument("--csv", dest="in_csv", help="benchmark CSV to plot")
    common.add_argument("--axis", choices=("sequences", "wall_ms"), default="sequences")
    common.add_argument("--log-y", dest="log_y", action="store_true")
    common.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.01)
    common.add_argument("--eval-cap", dest="eval_cap", type=int, help="score only the first N test characters")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--configs", type=int, default=20, help="random configurations (gradcheck)")

    parser = argparse.ArgumentParser(prog="charrnn", description="Character-level LSTM training schedules")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _validate(cfg: CliConfig, parser: argparse.ArgumentParser) -> None:
    def bad(flag, msg):
        parser.error(f"argument {flag}: {msg}")

    if cfg.schedule not in (1, 2, 3, 4):
        bad("--schedule", "must be 1, 2, 3 or 4")
    if not cfg.schedules or any(s not in (1, 2, 3, 4) for s in cfg.schedules):
        bad("--schedules", "must list ids from 1-4")
    for flag, v in (("--k1", cfg.k1), ("--k2", cfg.k2)):
        if v is not None and v < 1:
            bad(flag, "must be positive")
    if cfg.k1 is not None and cfg.k2 is not None and cfg.k1 > cfg.k2:
        bad("--k1", f"k1={cfg.k1} must not exceed k2={cfg.k2}")
    if (cfg.k1 is None) != (cfg.k2 is None) and cfg.command in ("train", "bench"):
        bad("--k1" if cfg.k1 is None else "--k2", "--k1 and --k2 must be given together")
    for flag, v in (("--hidden", cfg.hidden), ("--lanes", cfg.lanes), ("--budget", cfg.budget),
                    ("--runs", cfg.runs), ("--eval-every", cfg.eval_every), ("--workers", cfg.workers),
                    ("--configs", cfg.configs)):
        if v < 1:
            bad(flag, "must be positive")
    if cfg.eval_cap is not None and cfg.eval_cap < 2:
        bad("--eval-cap", "must be at least 2")
    if cfg.budget < cfg.eval_every:
        bad("--budget", "must be at least --eval-every")
    if not cfg.alpha > 0:
        bad("--alpha", "must be positive")
    if not 0 <= cfg.beta1 < 1:
        bad("--beta1", "must lie in [0, 1)")
    if not 0 <= cfg.beta2 < 1:
        bad("--beta2", "must lie in [0, 1)")
    if not cfg.eps > 0:
        bad("--eps", "must be positive")
    if not 0 < cfg.test_fraction < 0.5:
        bad("--test-fraction", "must lie in (0, 0.5)")
    if cfg.command == "train" and cfg.k1 is None:
        bad("--k1", "train needs --k1 and --k2")
    if cfg.command == "eval" and not cfg.zero_model and cfg.model is None:
        bad("--model", "eval needs --model or --zero-model")
    if cfg.command == "eval" and not (cfg.schedule in (3, 4) or cfg.k2 is not None):
        bad("--k2", f"windowed evaluation for schedule {cfg.schedule} needs --k2")
    if cfg.command == "plot" and (cfg.in_csv is None or cfg.out_svg is None):
        bad("--csv" if cfg.in_csv is None else "--out-svg", "plot needs --csv and --out-svg")
    if cfg.command == "bench" and cfg.out_csv is None:
        bad("--out-csv", "bench needs --out-csv")


def parse_args(argv=None) -> CliConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        parser.exit(2, "charrnn: error: a command is required\n")
    cfg = CliConfig(**vars(ns))
    _validate(cfg, parser)
    return cfg


def render_args(cfg: CliConfig) -> list[str]:
    """Inverse of :func:`parse_args`: an argv that reproduces ``cfg``."""
    flag_names = {"corpus_path": "--corpus", "in_csv": "--csv"}
    argv = [cfg.command]
    for f in fields(CliConfig):
        if f.name == "command":
            continue
        v = getattr(cfg, f.name)
        flag = flag_names.get(f.name, "--" + f.name.replace("_", "-"))
        if isinstance(v, bool):
            if v:
                argv.append(flag)
        elif v is None:
            continue
        elif isinstance(v, tuple):
            argv += [flag, ",".join(str(x) for x in v)]
        else:
            argv += [flag, repr(v) if isinstance(v, float) else str(v)]
    return argv


def _corpus(cfg: CliConfig) -> Corpus:
    path = cfg.corpus_path or sample_corpus_path()
    return Corpus.from_path(path, cfg.test_fraction)


def _plan(cfg: CliConfig, schedules, runs) -> BenchPlan:
    return BenchPlan(
        schedules=tuple(schedules), runs_per_schedule=runs, sequence_budget=cfg.budget,
        batch_lanes=cfg.lanes, eval_every=cfg.eval_every, master_seed=cfg.seed, hidden=cfg.hidden,
        alpha=cfg.alpha, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps, eval_cap=cfg.eval_cap,
        fixed_k=None if cfg.k1 is None else (cfg.k1, cfg.k2),
    )


def cmd_train(cfg: CliConfig) -> int:
    from .bench import RunSpec, train_run, derive_seed
    from .data import make_lanes
    from .model import init_params
    from .optim import adam_init
    from .schedules import ScheduleTrainer

    corpus = _corpus(cfg)
    plan = _plan(cfg, (cfg.schedule,), 1)
    seed = derive_seed(cfg.seed, cfg.schedule, 0)
    spec = RunSpec(0, cfg.schedule, 0, seed, cfg.k1, cfg.k2)
    if cfg.out_model is None:
        records = train_run(spec, plan, corpus)
    else:
        # same loop as train_run, keeping hold of the final parameters
        sc = ScheduleConfig(cfg.schedule, cfg.k1, cfg.k2, cfg.lanes, seed)
        params = init_params(seed, corpus.V, cfg.hidden)
        trainer = ScheduleTrainer(sc, make_lanes(corpus.train, cfg.lanes, cfg.k2), params,
                                  adam_init(params, cfg.alpha, cfg.beta1, cfg.beta2, cfg.eps))
        for _ in range(cfg.budget // cfg.lanes):
            trainer.step()
        test = corpus.test if cfg.eval_cap is None else corpus.test[:cfg.eval_cap]
        save_snapshot(trainer.params, cfg.out_model)
        print(f"saved {cfg.out_model}")
        records = None
        print(f"test perplexity {evaluate(sc, trainer.params, test):.6f}")
    if records is not None:
        for r in records:
            print(f"sequences={r.sequences_seen} wall_ms={r.wall_ms:.1f} "
                  f"train_loss={r.train_loss:.4f} test_perplexity={r.test_perplexity:.4f}")
        if cfg.out_csv:
            write_csv(records, cfg.out_csv)
    return 0


def cmd_eval(cfg: CliConfig) -> int:
    corpus = _corpus(cfg)
    params = ModelParams(corpus.V, cfg.hidden) if cfg.zero_model else load_snapshot(cfg.model)
    if params.V != corpus.V:
        raise ConfigError(f"snapshot vocabulary size {params.V} does not match corpus ({corpus.V})")
    k2 = cfg.k2 if cfg.k2 is not None else 1
    sc = ScheduleConfig(cfg.schedule, min(cfg.k1 or k2, k2), k2, 1)
    test = corpus.test if cfg.eval_cap is None else corpus.test[:cfg.eval_cap]
    print(f"perplexity {evaluate(sc, params, test)!r}")
    return 0


def cmd_bench(cfg: CliConfig) -> int:
    corpus = _corpus(cfg)
    plan = _plan(cfg, cfg.schedules, cfg.runs)
    records = run_benchmark(plan, corpus, workers=cfg.workers)
    write_csv(records, cfg.out_csv)
    print(f"wrote {len(records)} records to {cfg.out_csv}")
    if cfg.out_svg:
        render_curves(records, cfg.axis, cfg.out_svg, log_y=cfg.log_y)
        print(f"wrote {cfg.out_svg}")
    return 0


def cmd_plot(cfg: CliConfig) -> int:
    render_curves(read_csv(cfg.in_csv), cfg.axis, cfg.out_svg, log_y=cfg.log_y)
    print(f"wrote {cfg.out_svg}")
    return 0


def cmd_gradcheck(cfg: CliConfig) -> int:
    results = gradient_suite(cfg.configs, cfg.seed)
    worst = max(r["max_rel_error"] for r in results)
    print(f"checked {len(results)} windows, max relative error {worst:.3e}")
    return 0 if worst < 1e-4 else 1


def run(cfg: CliConfig) -> int:
    handlers = {"train": cmd_train, "eval": cmd_eval, "bench": cmd_bench,
                "plot": cmd_plot, "gradcheck": cmd_gradcheck}
    try:
        return handlers[cfg.command](cfg)
    except (ConfigError, ContractError, OSError, ValueError) as exc:
        print(f"charrnn: error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run(parse_args(argv))
