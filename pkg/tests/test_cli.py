"""Command-line surface: exit codes, output files, and formats."""

import numpy as np
import pytest

from colearn.cli import main
from colearn.data import write_idx

TINY_CONFIG = """
mode: CL
montecarlo_runs: 1
master_seed: 3
metric_stride: 10
max_iterations: 20
dataset:
  kind: synth
  n_per_class: 60
  num_classes: 3
  dim: 5
  separation: 3.0
  test_n_per_class: 20
agents:
  architectures: [HL1, SHL]
partition:
  train_size: 10
  val_size: 10
training:
  alpha: 0.003
  self_train_epochs: 2
collective:
  gamma: 1.0
  score_refresh_period: 10
  review_period: 15
  epochs_over_shared: 1
graph:
  kind: complete
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_CONFIG)
    return path


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("run", "montecarlo", "sweep", "graph-dump", "data-check", "plot"):
        assert cmd in out


def test_unknown_flag_rejected(tiny_config):
    with pytest.raises(SystemExit) as exc:
        main(["run", str(tiny_config), "--frobnicate"])
    assert exc.value.code == 2


def test_run_missing_config_exits_1(tmp_path, capsys):
    missing = tmp_path / "absent.yaml"
    code = main(["run", str(missing)])
    assert code == 1
    assert str(missing) in capsys.readouterr().err


def test_run_writes_outputs(tiny_config, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", str(tiny_config), "--out", str(out)])
    assert code == 0
    for name in ("metrics.csv", "plot.svg", "summary.txt", "manifest.txt"):
        assert (out / name).is_file(), name
    stdout = capsys.readouterr().out
    assert "mean" in stdout


def test_montecarlo_writes_outputs(tiny_config, tmp_path):
    out = tmp_path / "mc"
    code = main(["montecarlo", str(tiny_config), "--out", str(out)])
    assert code == 0
    assert (out / "metrics.csv").is_file()
    assert (out / "manifests" / "run_000.txt").is_file()


def test_sweep_emits_one_table_per_value(tiny_config, tmp_path, capsys):
    out = tmp_path / "sweep"
    code = main([
        "sweep", str(tiny_config), "--param", "gamma",
        "--values", "0,1,10,100,1000", "--out", str(out),
    ])
    assert code == 0
    stdout = capsys.readouterr().out
    assert stdout.count("== gamma =") == 5
    for value in (0, 1, 10, 100, 1000):
        assert (out / f"gamma_{value}" / "summary.txt").is_file()


def test_sweep_unknown_param_exits_1(tiny_config, tmp_path, capsys):
    code = main(["sweep", str(tiny_config), "--param", "nonsense", "--values", "1,2",
                 "--out", str(tmp_path / "s")])
    assert code == 1
    assert "nonsense" in capsys.readouterr().err


def test_graph_dump_static(tiny_config, capsys):
    code = main(["graph-dump", str(tiny_config), "--iter", "0"])
    assert code == 0
    out = capsys.readouterr().out.strip().split("\n")
    assert out == ["0 1", "1 0"]


def test_graph_dump_er_changes_between_rounds(tmp_path, capsys):
    config = tmp_path / "er.yaml"
    config.write_text(TINY_CONFIG.replace(
        "graph:\n  kind: complete",
        "graph:\n  kind: erdos-renyi\n  p: 0.5\n  period: 10",
    ).replace("architectures: [HL1, SHL]", "architectures: [HL1, SHL, SHL, SHL, SHL]")
     .replace("train_size: 10", "train_size: 5").replace("val_size: 10", "val_size: 5"))
    assert main(["graph-dump", str(config), "--iter", "0"]) == 0
    first = capsys.readouterr().out
    assert main(["graph-dump", str(config), "--iter", "5"]) == 0
    same_round = capsys.readouterr().out
    assert main(["graph-dump", str(config), "--iter", "10"]) == 0
    next_round = capsys.readouterr().out
    assert first == same_round
    assert first != next_round
    for line in first.strip().split("\n"):
        j, i = line.split()
        assert j != i


def test_data_check_counts(tmp_path, capsys):
    rng = np.random.default_rng(0)
    names = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
    write_idx(rng.integers(0, 255, (50, 28, 28)).astype(np.uint8),
              rng.integers(0, 10, 50).astype(np.uint8),
              tmp_path / names[0], tmp_path / names[1])
    write_idx(rng.integers(0, 255, (20, 28, 28)).astype(np.uint8),
              rng.integers(0, 10, 20).astype(np.uint8),
              tmp_path / names[2], tmp_path / names[3])
    code = main(["data-check", str(tmp_path)])
    assert code == 0
    assert capsys.readouterr().out.strip() == "50 train / 20 test"
    # same result with the four files listed explicitly
    code = main(["data-check"] + [str(tmp_path / n) for n in names])
    assert code == 0


def test_data_check_bad_magic_exits_1(tmp_path, capsys):
    bad = tmp_path / "train-images-idx3-ubyte"
    bad.write_bytes(b"\x00\x00\x08\x01" + b"\x00" * 16)
    names = ["train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
    for n in names:
        (tmp_path / n).write_bytes(b"")
    code = main(["data-check", str(tmp_path)])
    assert code == 1
    assert "magic" in capsys.readouterr().err


def test_plot_command_roundtrip(tiny_config, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(tiny_config), "--out", str(out)]) == 0
    svg = tmp_path / "replot.svg"
    assert main(["plot", str(out / "metrics.csv"), str(svg)]) == 0
    assert svg.read_text().startswith("<svg")


def test_plot_missing_csv_exits_1(tmp_path, capsys):
    code = main(["plot", str(tmp_path / "no.csv"), str(tmp_path / "o.svg")])
    assert code == 1
