import re

import numpy as np
import pytest

from charrnn.bench import read_csv
from charrnn.cli import load_snapshot, main, parse_args, render_args, save_snapshot
from charrnn.data import Corpus
from charrnn.model import init_params


@pytest.fixture
def corpus_file(tmp_path):
    f = tmp_path / "corpus.txt"
    text = "".join("the quick brown fox jumps over the lazy dog. "[i % 45] for i in range(6000))
    f.write_text(text, encoding="utf-8")
    return f


def test_bench_flags_map_to_desk_plan():
    cfg = parse_args(["bench", "--corpus", "sample.txt", "--runs", "2", "--budget", "50000", "--out-csv", "x.csv"])
    assert cfg.command == "bench" and cfg.runs == 2 and cfg.budget == 50_000
    assert cfg.corpus_path == "sample.txt"


def test_defaults_follow_the_experiment():
    cfg = parse_args(["gradcheck"])
    assert (cfg.hidden, cfg.lanes, cfg.budget, cfg.runs) == (50, 50, 500_000, 100)
    assert cfg.test_fraction == 0.01 and cfg.eval_every == 2500


def test_k1_greater_than_k2_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        parse_args(["train", "--k1", "10", "--k2", "5"])
    assert exc.value.code != 0
    assert "--k1" in capsys.readouterr().err


def test_no_command(capsys):
    with pytest.raises(SystemExit) as exc:
        parse_args([])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        parse_args(["gradcheck", "--bogus", "1"])
    assert exc.value.code != 0


@pytest.mark.parametrize("flag,value", [("--hidden", "0"), ("--test-fraction", "0.7"),
                                        ("--alpha", "0"), ("--schedule", "5"), ("--schedules", "1,9")])
def test_bad_values_rejected(flag, value, capsys):
    with pytest.raises(SystemExit):
        parse_args(["gradcheck", flag, value])
    assert flag in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["gradcheck"],
    ["bench", "--corpus", "c.txt", "--runs", "2", "--budget", "50000", "--out-csv", "o.csv",
     "--out-svg", "o.svg", "--schedules", "1,3", "--alpha", "0.002", "--log-y", "--eval-cap", "2000"],
    ["train", "--k1", "5", "--k2", "9", "--schedule", "4", "--out-model", "m.bin", "--eps", "1e-07"],
    ["plot", "--csv", "o.csv", "--out-svg", "o.svg", "--axis", "wall_ms"],
])
def test_flags_round_trip(argv):
    cfg = parse_args(argv)
    again = parse_args(render_args(cfg))
    assert again == cfg
    assert render_args(again) == render_args(cfg)


def test_snapshot_round_trip(tmp_path):
    p = init_params(3, 11, 7)
    p.flat[:] += np.linspace(-1, 1, p.flat.size)
    back = load_snapshot(save_snapshot(p, tmp_path / "m.bin"))
    assert back.shape == (11, 7)
    np.testing.assert_array_equal(back.flat, p.flat)
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:8] == b"CRNNSNAP"


def test_snapshot_rejects_garbage(tmp_path):
    f = tmp_path / "bad.bin"
    f.write_bytes(b"not a model at all")
    with pytest.raises(ValueError):
        load_snapshot(f)


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--configs", "4"]) == 0
    out = capsys.readouterr().out
    err = float(re.search(r"max relative error (\S+)", out).group(1))
    assert err < 1e-4


def test_eval_zero_model_prints_vocab_size(corpus_file, capsys):
    for extra in (["--schedule", "3"], ["--schedule", "1", "--k2", "10"]):
        assert main(["eval", "--corpus", str(corpus_file), "--zero-model", *extra]) == 0
        ppl = float(re.search(r"perplexity (\S+)", capsys.readouterr().out).group(1))
        V = Corpus.from_path(corpus_file).V
        assert abs(ppl - V) <= 1e-9


def test_train_then_eval_snapshot(corpus_file, tmp_path, capsys):
    model = tmp_path / "m.bin"
    assert main(["train", "--corpus", str(corpus_file), "--k1", "5", "--k2", "8", "--lanes", "5",
                 "--hidden", "8", "--budget", "100", "--eval-every", "50", "--out-model", str(model)]) == 0
    trained = float(re.search(r"test perplexity (\S+)", capsys.readouterr().out).group(1))
    assert main(["eval", "--corpus", str(corpus_file), "--model", str(model), "--k2", "8"]) == 0
    ppl = float(re.search(r"perplexity (\S+)", capsys.readouterr().out).group(1))
    assert ppl == pytest.approx(trained, rel=1e-5)


def test_bench_and_plot(corpus_file, tmp_path):
    out_csv, out_svg, wall_svg = tmp_path / "b.csv", tmp_path / "b.svg", tmp_path / "w.svg"
    assert main(["bench", "--corpus", str(corpus_file), "--runs", "1", "--budget", "100",
                 "--eval-every", "50", "--lanes", "5", "--hidden", "6", "--k1", "5", "--k2", "6",
                 "--out-csv", str(out_csv), "--out-svg", str(out_svg)]) == 0
    recs = read_csv(out_csv)
    assert len(recs) == 4 * 3
    assert out_svg.read_text().count("<polyline") == 4
    assert main(["plot", "--csv", str(out_csv), "--axis", "wall_ms", "--out-svg", str(wall_svg)]) == 0
    assert wall_svg.exists()


def test_module_error_gives_nonzero_exit(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert main(["eval", "--corpus", str(missing), "--zero-model", "--schedule", "3"]) == 1
    assert "error" in capsys.readouterr().err
