"""Held-out evaluation, ablations, sweeps, and report emission.

Every comparison runner trains its variants under one fixed epoch budget
(early stopping disabled by setting patience to max_epochs) and then checks
the recorded histories really did run equally long; unequal budgets raise
instead of producing a misleading table.  Repeated runs shift the init and
shuffle seeds together and report the mean metric with its spread.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SeriesPanel, WindowBatch, sliding_windows
from .errors import BudgetMismatchError, ConfigError
from .fracfourier import build_operator, canonical_order
from .model import ModelConfig, SffpModel, _forward_cached
from .train import TrainConfig, train

FILTER_STRATEGIES = ("lowpass", "random", "hybrid")


@dataclass
class MetricReport:
    """Pooled held-out metrics for one trained variant."""

    model_tag: str
    dataset_tag: str
    p: int
    mse: float
    mae: float
    n_windows: int
    runtime_seconds: float = 0.0
    mse_std: float = 0.0
    mae_std: float = 0.0


@dataclass
class SweepResult:
    """Metrics along one swept axis for one strategy."""

    axis_label: str
    axis_values: list[float]
    reports: list[MetricReport]
    strategy_tag: str
    budget_epochs: int = 0
    adaptive_report: MetricReport | None = None
    adaptive_alpha: float | None = None
    adaptive_alpha_values: list[float] = field(default_factory=list)


def evaluate(model: SffpModel, windows: WindowBatch, model_tag: str = "",
             dataset_tag: str = "", record_walltime: bool = False) -> MetricReport:
    """Pooled MSE/MAE of the model over a window batch."""
    started = time.monotonic()
    op_m = build_operator(model.m, model.alpha)
    op_p = build_operator(model.p, model.alpha)
    sq = 0.0
    ab = 0.0
    count = 0
    for lo in range(0, windows.inputs.shape[0], 256):
        xb = windows.inputs[lo:lo + 256]
        yb = windows.targets[lo:lo + 256]
        cache = _forward_cached(xb, model, op_m, op_p)
        d = cache["pred"] - yb
        sq += float(np.sum(d * d))
        ab += float(np.sum(np.abs(d)))
        count += d.size
    elapsed = time.monotonic() - started
    return MetricReport(
        model_tag=model_tag, dataset_tag=dataset_tag, p=model.p,
        mse=sq / count, mae=ab / count,
        n_windows=int(windows.inputs.shape[0]),
        runtime_seconds=elapsed if record_walltime else 0.0)


def _fixed_budget(train_cfg: TrainConfig, learn_alpha: bool) -> TrainConfig:
    return replace(train_cfg, patience=train_cfg.max_epochs,
                   learn_alpha=learn_alpha)


def _check_equal_budgets(epoch_counts: list[int]) -> int:
    distinct = set(epoch_counts)
    if len(distinct) > 1:
        raise BudgetMismatchError(
            f"variants trained under unequal epoch budgets: {sorted(distinct)}")
    return epoch_counts[0]


def _train_eval_repeated(panel: SeriesPanel, model_cfg: ModelConfig,
                         train_cfg: TrainConfig, repeats: int, model_tag: str,
                         dataset_tag: str) -> tuple[MetricReport, list[int], list[float]]:
    """Train ``repeats`` models under shifted seeds; mean/std the metrics.

    Returns the aggregated report, per-repeat epoch counts, and the learned
    transform orders (canonical)."""
    if repeats < 1:
        raise ConfigError("repeats must be at least 1")
    test = sliding_windows(panel, model_cfg.m, model_cfg.p, split="test")
    mses, maes, alphas, epochs = [], [], [], []
    runtime = 0.0
    for r in range(repeats):
        mc = replace(model_cfg, init_seed=model_cfg.init_seed + r)
        tc = replace(train_cfg, seed=train_cfg.seed + r)
        started = time.monotonic()
        model, history = train(panel, mc, tc)
        runtime += time.monotonic() - started
        rep = evaluate(model, test)
        mses.append(rep.mse)
        maes.append(rep.mae)
        alphas.append(canonical_order(model.alpha))
        epochs.append(len(history))
    report = MetricReport(
        model_tag=model_tag, dataset_tag=dataset_tag, p=model_cfg.p,
        mse=float(np.mean(mses)), mae=float(np.mean(maes)),
        n_windows=int(test.inputs.shape[0]),
        runtime_seconds=runtime if train_cfg.record_walltime else 0.0,
        mse_std=float(np.std(mses)), mae_std=float(np.std(maes)))
    return report, epochs, alphas


def run_transformation_ablation(panel: SeriesPanel, model_cfg: ModelConfig,
                                train_cfg: TrainConfig, dataset_tag: str = "",
                                repeats: int = 1) -> list[MetricReport]:
    """Train the no-transform, plain-Fourier, and fractional variants of the
    same linear predictor under one budget and evaluate each on the test
    split.  Returns reports tagged no / fft / frft, in that order."""
    variants = [
        ("no", replace(model_cfg, alpha_init=0.0, lowpass_cutoff=model_cfg.m,
                       random_high_count=0, real_head=True), False),
        ("fft", replace(model_cfg, alpha_init=1.0), False),
        ("frft", model_cfg, True),
    ]
    reports: list[MetricReport] = []
    budgets: list[int] = []
    for tag, mc, learn in variants:
        rep, epochs, _ = _train_eval_repeated(
            panel, mc, _fixed_budget(train_cfg, learn), repeats, tag, dataset_tag)
        reports.append(rep)
        budgets.extend(epochs)
    _check_equal_budgets(budgets)
    return reports


def run_alpha_sweep(panel: SeriesPanel, alpha_grid, model_cfg: ModelConfig,
                    train_cfg: TrainConfig, dataset_tag: str = "",
                    repeats: int = 1) -> SweepResult:
    """Train one frozen-order model per grid value plus one adaptive-order
    model, all under the same budget."""
    grid = [float(a) for a in np.asarray(alpha_grid, dtype=float).ravel()]
    if not grid:
        raise ConfigError("alpha grid is empty")
    if any(abs(a) > 2.0 for a in grid):
        raise ConfigError("alpha grid values must lie in [-2, 2]")
    reports: list[MetricReport] = []
    budgets: list[int] = []
    for a in grid:
        mc = replace(model_cfg, alpha_init=a)
        rep, epochs, _ = _train_eval_repeated(
            panel, mc, _fixed_budget(train_cfg, False), repeats,
            f"alpha={a:g}", dataset_tag)
        reports.append(rep)
        budgets.extend(epochs)
    adaptive, epochs, alphas = _train_eval_repeated(
        panel, model_cfg, _fixed_budget(train_cfg, True), repeats,
        "alpha=adaptive", dataset_tag)
    budgets.extend(epochs)
    budget = _check_equal_budgets(budgets)
    return SweepResult(
        axis_label="alpha", axis_values=grid, reports=reports,
        strategy_tag="frozen-alpha", budget_epochs=budget,
        adaptive_report=adaptive, adaptive_alpha=float(np.mean(alphas)),
        adaptive_alpha_values=alphas)


def run_filter_sweep(panel: SeriesPanel, cutoff_grid, strategies,
                     model_cfg: ModelConfig, train_cfg: TrainConfig,
                     dataset_tag: str = "", repeats: int = 1) -> list[SweepResult]:
    """Sweep the kept-bin budget for each filter strategy.

    At each cutoff c the strategies keep the same number of bins: the c
    lowest (lowpass), c sampled from everywhere above the lowest (random),
    or the c lowest plus the model's default random complement (hybrid).
    """
    cutoffs = [int(c) for c in np.asarray(cutoff_grid).ravel()]
    if not cutoffs:
        raise ConfigError("cutoff grid is empty")
    if any(c < 0 or c > model_cfg.m for c in cutoffs):
        raise ConfigError(f"cutoffs must lie in [0, m={model_cfg.m}]")
    bad = [s for s in strategies if s not in FILTER_STRATEGIES]
    if bad:
        raise ConfigError(f"unknown filter strategies: {bad}")
    _, s_default = model_cfg.resolved_cutoffs()
    results: list[SweepResult] = []
    budgets: list[int] = []
    for strategy in strategies:
        reports = []
        for c in cutoffs:
            if strategy == "lowpass":
                mc = replace(model_cfg, lowpass_cutoff=c, random_high_count=0)
            elif strategy == "random":
                mc = replace(model_cfg, lowpass_cutoff=0, random_high_count=c)
            else:
                mc = replace(model_cfg, lowpass_cutoff=c,
                             random_high_count=s_default)
            rep, epochs, _ = _train_eval_repeated(
                panel, mc, _fixed_budget(train_cfg, train_cfg.learn_alpha),
                repeats, f"{strategy}-c{c}", dataset_tag)
            reports.append(rep)
            budgets.extend(epochs)
        results.append(SweepResult(
            axis_label="cutoff", axis_values=[float(c) for c in cutoffs],
            reports=reports, strategy_tag=strategy))
    budget = _check_equal_budgets(budgets)
    for res in results:
        res.budget_epochs = budget
    return results


_REPORT_FIELDS = ("model_tag", "dataset_tag", "p", "mse", "mae",
                  "n_windows", "runtime_seconds", "mse_std", "mae_std")


def _report_row(rep: MetricReport) -> dict:
    return {name: getattr(rep, name) for name in _REPORT_FIELDS}


def emit_report(reports: list[MetricReport], path: str | os.PathLike,
                fmt: str = "csv") -> None:
    """Write reports sorted by (model_tag, dataset_tag, p) as CSV or JSON.

    Output is a pure function of the report contents, so identical runs
    produce identical bytes."""
    if not reports:
        raise ConfigError("no reports to emit")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    rows = sorted(reports, key=lambda r: (r.model_tag, r.dataset_tag, r.p))
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([_report_row(r) for r in rows], fh, indent=1)
            fh.write("\n")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_REPORT_FIELDS)
        for rep in rows:
            row = _report_row(rep)
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in (row[k] for k in _REPORT_FIELDS)])


def write_sweep_points(sweep: SweepResult, path: str | os.PathLike) -> None:
    """Two-column (axis value, mse) file, one row per swept point, ready for
    plotting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([sweep.axis_label, "mse"])
        for value, rep in zip(sweep.axis_values, sweep.reports):
            writer.writerow([repr(float(value)), repr(rep.mse)])
