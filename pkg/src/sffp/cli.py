"""Command line entry points.

Every subcommand reads one JSON configuration (defaults, then an optional
--config file, then repeatable --set key=value overrides), writes its
artifacts into an output directory, and serializes the effective
configuration next to them.  The output directory comes from --out, the
config's out_dir, or the SFFP_OUT_ROOT environment variable, in that order.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from typing import Any

import numpy as np

from . import data as data_mod
from . import eval as eval_mod
from .errors import ConfigError
from .fracfourier import canonical_order, concentration_profile
from .model import ModelConfig, init_model, load_model, save_model
from .train import GradientTape, TrainConfig, backward, gradient_check, train

ENV_OUT_ROOT = "SFFP_OUT_ROOT"

DEFAULT_CONFIG: dict[str, Any] = {
    "data": {
        "csv": None,
        "timestamp_column": None,
        "bands": None,
        "synthetic": {
            "kind": "chirp",
            "t_len": 2000,
            "f_bands": 3,
            "chirp_rate": 0.002,
            "f0": 0.01,
            "noise_sigma": 0.3,
            "trend_slope": 0.0,
            "trend_kind": "linear",
            "trend_scale": 1.0,
            "ar1_phi": 0.8,
            "tone_freqs": [0.01, 0.22, 0.31, 0.38],
            "tone_amps": None,
            "seed": 7,
        },
    },
    "model": {
        "m": 96,
        "p": 24,
        "alpha_init": 0.5,
        "lowpass_cutoff": None,
        "random_high_count": None,
        "sampling_seed": 0,
        "init_seed": 0,
        "per_channel_head": False,
        "revin_eps": 1e-5,
    },
    "train": {
        "learning_rate": 1e-3,
        "alpha_learning_rate": 1e-2,
        "batch_size": 32,
        "max_epochs": 50,
        "patience": 5,
        "seed": 0,
        "learn_alpha": True,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_eps": 1e-8,
        "record_walltime": False,
    },
    "eval": {
        "alpha_grid": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
        "cutoff_grid": [4, 8, 16, 32, 96],
        "strategies": ["lowpass", "random", "hybrid"],
        "repeats": 5,
        "band": 0,
        "dataset_tag": "",
    },
    "gradcheck": {
        "batch_windows": 4,
        "step": 1e-5,
        "tolerance": 1e-4,
    },
    "out_dir": None,
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown configuration key {key!r}")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"unknown configuration key {key!r}")
    node[parts[-1]] = value


def build_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        cfg = _merge(cfg, file_cfg)
    for assignment in args.set or []:
        _apply_set(cfg, assignment)
    return cfg


def resolve_out_dir(args: argparse.Namespace, cfg: dict, command: str) -> str:
    if args.out:
        return args.out
    if cfg.get("out_dir"):
        return str(cfg["out_dir"])
    root = os.environ.get(ENV_OUT_ROOT)
    if root:
        return os.path.join(root, command)
    return os.path.join("sffp_out", command)


def load_panel(cfg: dict) -> data_mod.SeriesPanel:
    dcfg = cfg["data"]
    if dcfg["csv"]:
        panel, report = data_mod.load_csv(
            dcfg["csv"], timestamp_column=dcfg["timestamp_column"],
            band_columns=dcfg["bands"])
        if report.repaired_cells:
            print(f"repaired {report.repaired_cells} missing cells "
                  f"in {report.rows} rows")
        return panel
    s = dcfg["synthetic"]
    if s["kind"] == "chirp":
        panel, _ = data_mod.synth_chirp(
            t_len=int(s["t_len"]), f_bands=int(s["f_bands"]),
            chirp_rate=float(s["chirp_rate"]), f0=float(s["f0"]),
            noise_sigma=float(s["noise_sigma"]),
            trend_slope=float(s["trend_slope"]), seed=int(s["seed"]))
        return panel
    if s["kind"] == "trend":
        return data_mod.synth_trend_noise(
            t_len=int(s["t_len"]), f_bands=int(s["f_bands"]),
            trend_kind=s["trend_kind"], ar1_phi=float(s["ar1_phi"]),
            noise_sigma=float(s["noise_sigma"]),
            trend_scale=float(s["trend_scale"]), seed=int(s["seed"]))
    if s["kind"] == "tones":
        return data_mod.synth_tones(
            t_len=int(s["t_len"]), f_bands=int(s["f_bands"]),
            freqs=s["tone_freqs"], amps=s["tone_amps"],
            noise_sigma=float(s["noise_sigma"]), seed=int(s["seed"]))
    raise ConfigError(f"unknown synthetic kind {s['kind']!r}")


def model_config(cfg: dict) -> ModelConfig:
    m = cfg["model"]
    return ModelConfig(
        m=int(m["m"]), p=int(m["p"]), alpha_init=float(m["alpha_init"]),
        lowpass_cutoff=None if m["lowpass_cutoff"] is None else int(m["lowpass_cutoff"]),
        random_high_count=None if m["random_high_count"] is None else int(m["random_high_count"]),
        sampling_seed=int(m["sampling_seed"]), init_seed=int(m["init_seed"]),
        per_channel_head=bool(m["per_channel_head"]),
        revin_eps=float(m["revin_eps"]))


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        learning_rate=float(t["learning_rate"]),
        alpha_learning_rate=float(t["alpha_learning_rate"]),
        batch_size=int(t["batch_size"]), max_epochs=int(t["max_epochs"]),
        patience=int(t["patience"]), seed=int(t["seed"]),
        learn_alpha=bool(t["learn_alpha"]),
        adam_beta1=float(t["adam_beta1"]), adam_beta2=float(t["adam_beta2"]),
        adam_eps=float(t["adam_eps"]),
        record_walltime=bool(t["record_walltime"]))


def write_config(cfg: dict, out_dir: str) -> None:
    path = os.path.join(out_dir, "config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")


def _write_history(history: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "val_mse", "alpha",
                         "walltime_seconds"])
        for row in history:
            writer.writerow([int(row["epoch"]), repr(row["train_mse"]),
                             repr(row["val_mse"]), repr(row["alpha"]),
                             repr(row["walltime_seconds"])])
    print(f"wrote {path}")


def cmd_train(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "train")
    os.makedirs(out_dir, exist_ok=True)
    panel = load_panel(cfg)
    model, history = train(panel, model_config(cfg), train_config(cfg))
    ckpt = os.path.join(out_dir, "checkpoint.json")
    save_model(model, ckpt)
    print(f"wrote {ckpt}")
    _write_history(history, os.path.join(out_dir, "history.csv"))
    write_config(cfg, out_dir)
    test = data_mod.sliding_windows(panel, model.m, model.p, split="test")
    report = eval_mod.evaluate(model, test, model_tag="trained",
                               dataset_tag=cfg["eval"]["dataset_tag"])
    best_val = min(row["val_mse"] for row in history)
    print(f"epochs={len(history)} best_val_mse={best_val:.6g} "
          f"alpha={canonical_order(model.alpha):.4f}")
    print(f"test: mse={report.mse:.6g} mae={report.mae:.6g} "
          f"({report.n_windows} windows)")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "predict")
    os.makedirs(out_dir, exist_ok=True)
    model = load_model(args.checkpoint)
    panel = load_panel(cfg)
    if panel.values.shape[1] != model.f:
        raise ConfigError(f"checkpoint expects {model.f} bands, data has "
                          f"{panel.values.shape[1]}")
    if panel.values.shape[0] < model.m:
        raise ConfigError(f"need at least {model.m} rows to forecast")
    from .model import forward
    window = panel.values[-model.m:]
    pred, diag = forward(window, model)
    dt = panel.sample_interval
    t0 = float(panel.timestamps[-1])
    path = os.path.join(out_dir, "forecast.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"] + list(panel.band_labels))
        for i in range(model.p):
            writer.writerow([data_mod._format_number(t0 + (i + 1) * dt)]
                            + [repr(float(v)) for v in pred[i]])
    print(f"wrote {path}")
    write_config(cfg, out_dir)
    print(f"forecast horizon={model.p} alpha={diag['alpha']:.4f}")
    return 0


def _emit_both(reports, out_dir: str) -> None:
    for fmt in ("csv", "json"):
        path = os.path.join(out_dir, f"report.{fmt}")
        eval_mod.emit_report(reports, path, fmt)
        print(f"wrote {path}")


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "ablate")
    os.makedirs(out_dir, exist_ok=True)
    panel = load_panel(cfg)
    reports = eval_mod.run_transformation_ablation(
        panel, model_config(cfg), train_config(cfg),
        dataset_tag=cfg["eval"]["dataset_tag"],
        repeats=int(cfg["eval"]["repeats"]))
    _emit_both(reports, out_dir)
    write_config(cfg, out_dir)
    for rep in reports:
        print(f"{rep.model_tag:>5}: mse={rep.mse:.6g} mae={rep.mae:.6g}")
    return 0


def cmd_sweep_alpha(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "sweep-alpha")
    os.makedirs(out_dir, exist_ok=True)
    panel = load_panel(cfg)
    sweep = eval_mod.run_alpha_sweep(
        panel, cfg["eval"]["alpha_grid"], model_config(cfg), train_config(cfg),
        dataset_tag=cfg["eval"]["dataset_tag"],
        repeats=int(cfg["eval"]["repeats"]))
    reports = sweep.reports + [sweep.adaptive_report]
    _emit_both(reports, out_dir)
    points = os.path.join(out_dir, "sweep_alpha.csv")
    eval_mod.write_sweep_points(sweep, points)
    print(f"wrote {points}")
    write_config(cfg, out_dir)
    best = min(sweep.reports, key=lambda r: r.mse)
    print(f"grid best {best.model_tag} mse={best.mse:.6g}; adaptive "
          f"alpha={sweep.adaptive_alpha:.4f} mse={sweep.adaptive_report.mse:.6g}")
    return 0


def cmd_sweep_filter(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "sweep-filter")
    os.makedirs(out_dir, exist_ok=True)
    panel = load_panel(cfg)
    sweeps = eval_mod.run_filter_sweep(
        panel, cfg["eval"]["cutoff_grid"], cfg["eval"]["strategies"],
        model_config(cfg), train_config(cfg),
        dataset_tag=cfg["eval"]["dataset_tag"],
        repeats=int(cfg["eval"]["repeats"]))
    reports = [rep for sweep in sweeps for rep in sweep.reports]
    _emit_both(reports, out_dir)
    for sweep in sweeps:
        path = os.path.join(out_dir, f"sweep_filter_{sweep.strategy_tag}.csv")
        eval_mod.write_sweep_points(sweep, path)
        print(f"wrote {path}")
    write_config(cfg, out_dir)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "analyze")
    os.makedirs(out_dir, exist_ok=True)
    panel = load_panel(cfg)
    band = int(cfg["eval"]["band"])
    freqs, power = data_mod.periodogram(panel, band)
    path = os.path.join(out_dir, "periodogram.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frequency", "power"])
        for fr, pw in zip(freqs, power):
            writer.writerow([repr(float(fr)), repr(float(pw))])
    print(f"wrote {path}")
    m = int(cfg["model"]["m"])
    if panel.values.shape[0] < m:
        raise ConfigError(f"need at least {m} rows for the concentration table")
    window = panel.values[-m:, band]
    grid = np.arange(0.0, 2.0 + 1e-12, 0.01)
    entropy = concentration_profile(window, grid)
    path = os.path.join(out_dir, "concentration.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["order", "entropy"])
        for a, h in zip(grid, entropy):
            writer.writerow([repr(float(a)), repr(float(h))])
    print(f"wrote {path}")
    write_config(cfg, out_dir)
    best = float(grid[int(np.argmin(entropy))])
    print(f"most concentrated order for band {band}: {best:.2f}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    out_dir = resolve_out_dir(args, cfg, "gradcheck")
    os.makedirs(out_dir, exist_ok=True)
    panel = load_panel(cfg)
    mcfg = model_config(cfg)
    model = init_model(mcfg, panel.values.shape[1])
    windows = data_mod.sliding_windows(panel, mcfg.m, mcfg.p, split="train")
    take = min(int(cfg["gradcheck"]["batch_windows"]), windows.inputs.shape[0])
    batch = (windows.inputs[:take], windows.targets[:take])
    # one optimizer-free backward so the tape under test is the live one
    tape = GradientTape.zeros(model)
    backward(model, batch, tape)
    report = gradient_check(model, batch, h=float(cfg["gradcheck"]["step"]),
                            tol=float(cfg["gradcheck"]["tolerance"]), tape=tape)
    path = os.path.join(out_dir, "gradcheck.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")
    print(f"wrote {path}")
    write_config(cfg, out_dir)
    verdict = "PASS" if report["passed"] else "FAIL"
    print(f"{verdict} max_rel_error={report['max_rel_error']:.3g} "
          f"worst={report['worst_group']}")
    return 0 if report["passed"] else 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration entry (repeatable)")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sffp",
        description="Train and probe fractional-spectrum forecasters.")
    sub = parser.add_subparsers(dest="command", required=True)

    handlers = {
        "train": (cmd_train, "train a model and write checkpoint/history"),
        "predict": (cmd_predict, "forecast from a saved checkpoint"),
        "ablate": (cmd_ablate, "compare no/fft/frft transformations"),
        "sweep-alpha": (cmd_sweep_alpha, "grid the transform order"),
        "sweep-filter": (cmd_sweep_filter, "grid the filter cutoff per strategy"),
        "analyze": (cmd_analyze, "periodogram and concentration tables"),
        "gradcheck": (cmd_gradcheck, "compare gradients to finite differences"),
    }
    for name, (fn, help_text) in handlers.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "predict":
            p.add_argument("--checkpoint", required=True,
                           help="model checkpoint JSON")
        p.set_defaults(handler=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # surfaced as a message, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
