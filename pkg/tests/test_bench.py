import math
import re
from collections import Counter

import numpy as np
import pytest

from charrnn import bench
from charrnn.bench import (
    CSV_COLUMNS,
    BenchPlan,
    CheckpointRecord,
    derive_seed,
    plan_runs,
    read_csv,
    render_curves,
    run_benchmark,
    sample_config,
    write_csv,
)
from charrnn.data import Corpus, load_corpus, sample_corpus_path
from charrnn.errors import ConfigError, ContractError
from charrnn.model import ModelParams
from charrnn.numkernel import Rng


@pytest.fixture(scope="module")
def small_corpus():
    return Corpus.from_text(load_corpus(sample_corpus_path())[:12_000], 0.05)


def tiny_plan(**kw):
    base = dict(schedules=(1, 2, 3, 4), runs_per_schedule=1, sequence_budget=200, batch_lanes=5,
                eval_every=50, hidden=8, k_range=(3, 8), eval_cap=120, master_seed=7)
    base.update(kw)
    return BenchPlan(**base)


# -- sampler -----------------------------------------------------------------

def test_sample_config_bounds():
    rng = Rng(1)
    for _ in range(20_000):
        k1, k2 = sample_config(rng)
        assert 5 <= k1 <= k2 <= 50


def test_sample_config_seeded_value():
    # first draw 13679457532755275413 % 46 -> k2 = 6, second draw is odd -> k1 = 6
    assert sample_config(Rng(42)) == (6, 6)
    assert sample_config(Rng(42)) == sample_config(Rng(42))


def test_k2_marginal_is_uniform():
    rng = Rng(2016)
    n = 100_000
    counts = Counter(sample_config(rng)[1] for _ in range(n))
    expected = n / 46
    chi2 = sum((counts[k] - expected) ** 2 / expected for k in range(5, 51))
    # 99.9th percentile of chi-square with 45 degrees of freedom
    assert chi2 < 80.08


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, 1, 0) == derive_seed(0, 1, 0)
    assert len({derive_seed(0, s, r) for s in range(1, 5) for r in range(10)}) == 40
    assert 0 <= derive_seed(123, 4, 99) < 2**63


def test_plan_runs_order_and_ranges():
    runs = plan_runs(BenchPlan(runs_per_schedule=3, schedules=(2, 4)))
    assert [r.run_id for r in runs] == list(range(6))
    assert [r.schedule for r in runs] == [2, 2, 2, 4, 4, 4]
    assert all(5 <= r.k1 <= r.k2 <= 50 for r in runs)


def test_plan_validation():
    with pytest.raises(ContractError):
        BenchPlan(eval_every=0)
    with pytest.raises(ContractError):
        BenchPlan(sequence_budget=100, eval_every=200)
    with pytest.raises(ContractError):
        BenchPlan(schedules=(5,))


# -- harness -----------------------------------------------------------------

def test_budget_equal_to_cadence_gives_two_checkpoints(small_corpus):
    recs = run_benchmark(tiny_plan(sequence_budget=50, eval_every=50, schedules=(1,)), small_corpus)
    assert [r.sequences_seen for r in recs] == [0, 50]


def test_zero_model_initial_checkpoint_is_vocab_size(small_corpus, monkeypatch):
    monkeypatch.setattr(bench, "init_params", lambda seed, V, H: ModelParams(V, H))
    recs = run_benchmark(tiny_plan(sequence_budget=50), small_corpus)
    for r in recs:
        if r.sequences_seen == 0:
            assert abs(r.test_perplexity - small_corpus.V) <= 1e-9
            assert math.isnan(r.train_loss)


def test_checkpoints_are_well_formed(small_corpus):
    sink = []
    recs = run_benchmark(tiny_plan(sequence_budget=230), small_corpus, sink)
    assert sink == recs
    by_run = {}
    for r in recs:
        by_run.setdefault(r.run_id, []).append(r)
    assert len(by_run) == 4
    for rs in by_run.values():
        seen = [r.sequences_seen for r in rs]
        assert seen == sorted(seen) and seen[0] == 0
        # budget rounded down to whole batch steps of 5
        assert seen[-1] == 230
        assert seen == [0, 50, 100, 150, 200, 230]
        walls = [r.wall_ms for r in rs]
        assert walls == sorted(walls)
        # a random model can be slightly worse than uniform, so V is not a hard cap
        assert abs(rs[0].test_perplexity - small_corpus.V) < 0.05 * small_corpus.V
        for r in rs:
            assert r.test_perplexity >= 1.0
            assert 3 <= r.k1 <= r.k2 <= 8


def test_fixed_k(small_corpus):
    recs = run_benchmark(tiny_plan(fixed_k=(4, 6), schedules=(2,)), small_corpus)
    assert {(r.k1, r.k2) for r in recs} == {(4, 6)}


def test_repeat_runs_differ_only_in_wall_time(small_corpus):
    a = run_benchmark(tiny_plan(), small_corpus)
    b = run_benchmark(tiny_plan(), small_corpus)
    assert len(a) == len(b)
    assert all(x.same_except_wall(y) for x, y in zip(a, b))


def test_parallel_matches_serial(small_corpus):
    serial = run_benchmark(tiny_plan(runs_per_schedule=2), small_corpus, workers=1)
    parallel = run_benchmark(tiny_plan(runs_per_schedule=2), small_corpus, workers=2)
    assert len(serial) == len(parallel)
    assert all(x.same_except_wall(y) for x, y in zip(serial, parallel))


def test_corpus_too_small_fails_before_running():
    c = Corpus.from_text(("abcdefgh" * 40), 0.2)
    with pytest.raises(ConfigError):
        run_benchmark(BenchPlan(runs_per_schedule=1, sequence_budget=100, eval_every=50), c)


# -- CSV ---------------------------------------------------------------------

def record(**kw):
    base = dict(run_id=0, schedule=1, k1=5, k2=9, seed=12345678901234, sequences_seen=2500,
                wall_ms=1234.5678901234567, train_loss=2.0 / 3.0, test_perplexity=math.pi * 3)
    base.update(kw)
    return CheckpointRecord(**base)


def test_csv_one_record(tmp_path):
    path = write_csv([record()], tmp_path / "r.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[0] == "run_id,schedule,k1,k2,seed,sequences_seen,wall_ms,train_loss,test_perplexity"
    assert tuple(lines[0].split(",")) == CSV_COLUMNS


def test_csv_round_trip_exact(tmp_path):
    recs = [record(), record(run_id=1, schedule=4, train_loss=float("nan"), sequences_seen=0),
            record(wall_ms=1e-300, test_perplexity=64.99999999999999)]
    back = read_csv(write_csv(recs, tmp_path / "r.csv"))
    assert len(back) == 3
    for a, b in zip(recs, back):
        assert a.same_except_wall(b) and a.wall_ms == b.wall_ms
        assert type(b.run_id) is int and type(b.test_perplexity) is float


def test_csv_empty(tmp_path):
    with pytest.raises(ContractError, match="nothing to write"):
        write_csv([], tmp_path / "r.csv")


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_csv([record()], tmp_path / "missing-dir" / "r.csv")


# -- SVG ---------------------------------------------------------------------

def polylines(svg):
    return re.findall(r"<polyline ([^>]*)/>", svg)


def attr(tag, name):
    return re.search(fr'{name}="([^"]*)"', tag).group(1)


def two_runs():
    return [
        record(run_id=0, schedule=1, sequences_seen=0, test_perplexity=65.0),
        record(run_id=0, schedule=1, sequences_seen=1000, test_perplexity=20.0),
        record(run_id=0, schedule=1, sequences_seen=2000, test_perplexity=10.0),
        record(run_id=1, schedule=4, sequences_seen=0, test_perplexity=65.0),
        record(run_id=1, schedule=4, sequences_seen=500, test_perplexity=30.0),
    ]


def test_svg_one_polyline_per_run_with_legend(tmp_path):
    svg = render_curves(two_runs(), "sequences", tmp_path / "c.svg").read_text()
    lines = polylines(svg)
    assert len(lines) == 2
    assert [attr(p, "stroke") for p in lines] == ["blue", "yellow"]
    assert "schedule 1" in svg and "schedule 4" in svg
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_svg_schedule_colours(tmp_path):
    recs = [record(run_id=s, schedule=s, sequences_seen=n, test_perplexity=10.0 + s + n / 100)
            for s in (1, 2, 3, 4) for n in (0, 100)]
    svg = render_curves(recs, "sequences", tmp_path / "c.svg").read_text()
    colours = {attr(p, "data-schedule"): attr(p, "stroke") for p in polylines(svg)}
    assert colours == {"1": "blue", "2": "red", "3": "green", "4": "yellow"}


def test_svg_x_proportional_to_sequences(tmp_path):
    svg = render_curves(two_runs(), "sequences", tmp_path / "c.svg").read_text()
    pts = [tuple(map(float, p.split(","))) for p in attr(polylines(svg)[0], "points").split()]
    x0 = pts[0][0]
    # 0, 1000, 2000 sequences -> equally spaced
    assert pts[1][0] - x0 == pytest.approx(pts[2][0] - pts[1][0])
    assert pts[1][0] - x0 > 0


def test_svg_wall_axis_and_log_scale(tmp_path):
    recs = [record(sequences_seen=0, wall_ms=0.0, test_perplexity=60.0),
            record(sequences_seen=10, wall_ms=30.0, test_perplexity=6.0),
            record(sequences_seen=20, wall_ms=60.0, test_perplexity=0.6 * 10)]
    svg = render_curves(recs, "wall_ms", tmp_path / "c.svg", log_y=True).read_text()
    assert "training time (ms)" in svg and "log scale" in svg
    assert len(polylines(svg)) == 1


def test_svg_single_checkpoint_is_a_mark(tmp_path):
    svg = render_curves([record()], "sequences", tmp_path / "c.svg").read_text()
    assert len(polylines(svg)) == 1
    assert "<circle" in svg


def test_svg_bad_axis(tmp_path):
    with pytest.raises(ContractError):
        render_curves(two_runs(), "epochs", tmp_path / "c.svg")
