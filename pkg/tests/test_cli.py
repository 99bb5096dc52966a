import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sffp import cli
from sffp.data import save_csv
from sffp.model import load_model

from conftest import make_panel

TINY = ["--set", "data.synthetic.t_len=240",
        "--set", "data.synthetic.f_bands=2",
        "--set", "model.m=16", "--set", "model.p=4",
        "--set", "train.max_epochs=2", "--set", "train.patience=2"]


def run_cli(argv, capsys=None):
    rc = cli.main(argv)
    return rc


def test_train_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(["train", "--out", str(out), *TINY])
    assert rc == 0
    names = sorted(os.listdir(out))
    assert names == ["checkpoint.json", "config.json", "history.csv"]
    model = load_model(out / "checkpoint.json")
    assert model.m == 16 and model.p == 4 and model.f == 2
    with open(out / "history.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "train_mse", "val_mse", "alpha",
                       "walltime_seconds"]
    assert len(rows) == 3
    assert rows[1][4] == "0.0"
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["model"]["m"] == 16


def test_train_runs_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["train", "--out", str(out1), *TINY]) == 0
    assert cli.main(["train", "--out", str(out2), *TINY]) == 0
    for name in ("checkpoint.json", "history.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_predict_extends_timestamps(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train", "--out", str(out), *TINY]) == 0
    panel = make_panel(t_len=240, f_bands=2)
    csv_in = tmp_path / "series.csv"
    save_csv(panel, csv_in)
    pout = tmp_path / "pred"
    rc = cli.main(["predict", "--checkpoint", str(out / "checkpoint.json"),
                   "--out", str(pout), "--set", f"data.csv={csv_in}",
                   "--set", "model.m=16", "--set", "model.p=4"])
    assert rc == 0
    with open(pout / "forecast.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["timestamp", "b0", "b1"]
    assert len(rows) == 5
    stamps = [float(r[0]) for r in rows[1:]]
    assert stamps == [240.0, 241.0, 242.0, 243.0]


def test_unknown_config_key_names_offender(tmp_path, capsys):
    rc = cli.main(["train", "--out", str(tmp_path / "x"),
                   "--set", "data.wavelength=5"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "data.wavelength" in err or "'data.wavelength'" in err

    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"modle": {}}))
    rc = cli.main(["train", "--config", str(cfg),
                   "--out", str(tmp_path / "y")])
    assert rc == 1
    assert "modle" in capsys.readouterr().err


def test_missing_csv_path_in_error(tmp_path, capsys):
    rc = cli.main(["train", "--out", str(tmp_path / "x"),
                   "--set", "data.csv=/nonexistent/file.csv"])
    assert rc == 1
    assert "/nonexistent/file.csv" in capsys.readouterr().err


def test_out_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT_ROOT, str(tmp_path / "root"))
    monkeypatch.chdir(tmp_path)
    assert cli.main(["train", *TINY]) == 0
    assert (tmp_path / "root" / "train" / "checkpoint.json").exists()


def test_config_file_with_set_precedence(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        {"model": {"m": 16, "p": 4},
         "data": {"synthetic": {"t_len": 240, "f_bands": 2}},
         "train": {"max_epochs": 2, "patience": 2}}))
    out = tmp_path / "run"
    rc = cli.main(["train", "--config", str(cfg_path), "--out", str(out),
                   "--set", "model.p=8"])
    assert rc == 0
    model = load_model(out / "checkpoint.json")
    assert model.p == 8


def test_gradcheck_command(tmp_path):
    out = tmp_path / "g"
    rc = cli.main(["gradcheck", "--out", str(out), *TINY])
    assert rc == 0
    doc = json.loads((out / "gradcheck.json").read_text())
    assert doc["passed"] is True
    assert doc["max_rel_error"] < 1e-4


def test_analyze_command(tmp_path):
    out = tmp_path / "an"
    rc = cli.main(["analyze", "--out", str(out), *TINY])
    assert rc == 0
    with open(out / "periodogram.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["frequency", "power"]
    assert len(rows) > 10
    with open(out / "concentration.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["order", "entropy"]
    assert len(rows) == 202
    ents = [float(r[1]) for r in rows[1:]]
    assert all(0.0 <= e <= 1.0 for e in ents)


def test_ablate_command(tmp_path):
    out = tmp_path / "ab"
    rc = cli.main(["ablate", "--out", str(out), *TINY,
                   "--set", "eval.repeats=1"])
    assert rc == 0
    with open(out / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 4
    tags = {r[0] for r in rows[1:]}
    assert tags == {"no", "fft", "frft"}
    doc = json.loads((out / "report.json").read_text())
    assert len(doc) == 3


def test_sweep_commands(tmp_path):
    out = tmp_path / "sa"
    rc = cli.main(["sweep-alpha", "--out", str(out), *TINY,
                   "--set", "eval.repeats=1",
                   "--set", "eval.alpha_grid=[0.5,1.0]"])
    assert rc == 0
    with open(out / "sweep_alpha.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["alpha", "mse"]
    assert len(rows) == 3

    out = tmp_path / "sf"
    rc = cli.main(["sweep-filter", "--out", str(out), *TINY,
                   "--set", "eval.repeats=1",
                   "--set", "eval.cutoff_grid=[2,16]",
                   "--set", 'eval.strategies=["lowpass","hybrid"]'])
    assert rc == 0
    for strategy in ("lowpass", "hybrid"):
        with open(out / f"sweep_filter_{strategy}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["cutoff", "mse"]
        assert len(rows) == 3


def test_console_entry_point(tmp_path):
    out = tmp_path / "run"
    proc = subprocess.run(
        [sys.executable, "-m", "sffp.cli", "train", "--out", str(out), *TINY],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "checkpoint.json").exists()


def test_tones_synthetic_kind(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(["train", "--out", str(out), *TINY,
                   "--set", "data.synthetic.kind=tones",
                   "--set", "data.synthetic.tone_freqs=[0.0625]"])
    assert rc == 0


def test_unknown_synthetic_kind(tmp_path, capsys):
    rc = cli.main(["train", "--out", str(tmp_path / "x"),
                   "--set", "data.synthetic.kind=wavelet"])
    assert rc == 1
    assert "wavelet" in capsys.readouterr().err
