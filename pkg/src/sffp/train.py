"""Loss, reverse-mode gradients, Adam, and the training loop.

Gradients are derived by hand.  Complex parameters are optimized as real
(Re, Im) pairs; for a complex quantity C the stored adjoint is
dL/dRe(C) + i*dL/dIm(C), so a chain step through C = M Z pulls back as
Z_adj = M^H C_adj, and the transform-order sensitivity of C = M(a) Z is
Re(vdot(C_adj, dM/da @ Z)).
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data import SeriesPanel, WindowBatch, sliding_windows
from .errors import ConfigError, ShapeError
from .fracfourier import build_operator, canonical_order, operator_order_derivative
from .model import (ModelConfig, SffpModel, _forward_cached, _check_window,
                    effective_filter, head_matrices, init_model)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    alpha_learning_rate: float = 1e-2
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    learn_alpha: bool = True
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    record_walltime: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0 or self.alpha_learning_rate <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be at least 1")
        if not 1 <= self.patience <= self.max_epochs:
            raise ConfigError("patience must lie in [1, max_epochs]")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ConfigError("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ConfigError("adam_eps must be positive")


@dataclass
class GradientTape:
    """Accumulated gradients for every learnable group."""

    d_alpha: float
    d_filter_weights: np.ndarray   # complex: dRe + i dIm
    d_lin_real: np.ndarray
    d_lin_imag: np.ndarray
    d_bias_real: np.ndarray
    d_bias_imag: np.ndarray
    d_revin_gamma: np.ndarray
    d_revin_beta: np.ndarray

    @classmethod
    def zeros(cls, model: SffpModel) -> "GradientTape":
        return cls(
            d_alpha=0.0,
            d_filter_weights=np.zeros(model.m, dtype=np.complex128),
            d_lin_real=np.zeros_like(model.lin_real),
            d_lin_imag=np.zeros_like(model.lin_imag),
            d_bias_real=np.zeros_like(model.bias_real),
            d_bias_imag=np.zeros_like(model.bias_imag),
            d_revin_gamma=np.zeros_like(model.revin_gamma),
            d_revin_beta=np.zeros_like(model.revin_beta))


def mse_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared error over every element of the batch."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match "
                         f"target shape {truth.shape}")
    d = pred - truth
    return float(np.mean(d * d))


def _unpack_batch(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, WindowBatch):
        return batch.inputs, batch.targets
    inputs, targets = batch
    return np.asarray(inputs, dtype=np.float64), np.asarray(targets, dtype=np.float64)


def pipeline_loss(model: SffpModel, batch) -> float:
    """Forward pass plus MSE, as one differentiable-by-hand scalar."""
    inputs, targets = _unpack_batch(batch)
    inputs = _check_window(inputs, model.m, model.f, "inputs")
    if inputs.ndim == 2:
        inputs, targets = inputs[None], targets[None]
    op_m = build_operator(model.m, model.alpha)
    op_p = build_operator(model.p, model.alpha)
    cache = _forward_cached(inputs, model, op_m, op_p)
    return mse_loss(cache["pred"], targets)


def backward(model: SffpModel, batch, tape: GradientTape) -> float:
    """Fill ``tape`` with dLoss/dParam for one batch and return the loss."""
    inputs, targets = _unpack_batch(batch)
    inputs = _check_window(inputs, model.m, model.f, "inputs")
    if inputs.ndim == 2:
        inputs, targets = inputs[None], targets[None]
    targets = _check_window(targets, model.p, model.f, "targets")
    if targets.ndim == 2:
        targets = targets[None]
    if targets.shape[0] != inputs.shape[0]:
        raise ShapeError("inputs and targets disagree on batch size")

    op_m = build_operator(model.m, model.alpha)
    op_p = build_operator(model.p, model.alpha)
    cache = _forward_cached(inputs, model, op_m, op_p)
    pred, stats = cache["pred"], cache["stats"]
    loss = mse_loss(pred, targets)

    gamma, beta = model.revin_gamma, model.revin_beta
    std_b = stats.std[:, None, :]        # (b, 1, f)
    mean_b = stats.mean[:, None, :]

    g_pred = (2.0 / pred.size) * (pred - targets)          # (b, p, f)

    # denormalize: pred = (y_real - beta) / gamma * std + mean
    g_y_real = g_pred * std_b / gamma
    d_gamma = -np.sum(g_pred * (cache["y_real"] - beta) * std_b, axis=(0, 1)) / gamma**2
    d_beta = -np.sum(g_pred * std_b, axis=(0, 1)) / gamma

    # y = Kp^H u, y_real = Re(y)
    y_adj = g_y_real.astype(np.complex128)
    u_adj = op_p.kernel @ y_adj
    dkp = operator_order_derivative(op_p)
    d_alpha = float(np.real(np.vdot(y_adj, dkp.conj().T @ cache["u"])))

    # u = lin @ x_f + bias
    x_f = cache["x_f"]
    lin, _ = head_matrices(model)
    if model.per_channel_head:
        lin_adj = np.einsum("bpc,bmc->cpm", u_adj, x_f.conj())
        bias_adj = u_adj.sum(axis=0).T
        xf_adj = np.einsum("cpm,bpc->bmc", lin.conj(), u_adj)
    else:
        lin_adj = np.einsum("bpc,bmc->pm", u_adj, x_f.conj())
        bias_adj = u_adj.sum(axis=(0, 2))
        xf_adj = lin.conj().T @ u_adj
    tape.d_lin_real = lin_adj.real
    tape.d_lin_imag = lin_adj.imag
    tape.d_bias_real = bias_adj.real
    tape.d_bias_imag = bias_adj.imag

    # x_f = w_eff * z_fr; masked bins contribute nothing either way
    w_eff = effective_filter(model)
    z_fr = cache["z_fr"]
    w_adj = np.sum(z_fr.conj() * xf_adj, axis=(0, 2))
    tape.d_filter_weights = np.where(model.filter_cfg.keep_mask, w_adj, 0.0 + 0.0j)
    zfr_adj = w_eff.conj()[None, :, None] * xf_adj

    # z_fr = Km @ z
    z_c = cache["z"].astype(np.complex128)
    dkm = operator_order_derivative(op_m)
    d_alpha += float(np.real(np.vdot(zfr_adj, dkm @ z_c)))
    z_adj = np.real(op_m.kernel.conj().T @ zfr_adj)         # z itself is real

    # z = gamma * (x - mean) / std + beta
    centered = (cache["x"] - mean_b) / std_b
    d_gamma += np.sum(z_adj * centered, axis=(0, 1))
    d_beta += np.sum(z_adj, axis=(0, 1))

    tape.d_alpha = d_alpha
    tape.d_revin_gamma = d_gamma
    tape.d_revin_beta = d_beta
    return loss


_ARRAY_GROUPS = ("filter_weights_real", "filter_weights_imag",
                 "lin_real", "lin_imag", "bias_real", "bias_imag",
                 "revin_gamma", "revin_beta")


def _group_shapes(model: SffpModel) -> dict[str, tuple[int, ...]]:
    return {
        "filter_weights_real": (model.m,),
        "filter_weights_imag": (model.m,),
        "lin_real": model.lin_real.shape,
        "lin_imag": model.lin_imag.shape,
        "bias_real": model.bias_real.shape,
        "bias_imag": model.bias_imag.shape,
        "revin_gamma": model.revin_gamma.shape,
        "revin_beta": model.revin_beta.shape,
    }


def _group_gradients(tape: GradientTape) -> dict[str, np.ndarray]:
    return {
        "filter_weights_real": tape.d_filter_weights.real,
        "filter_weights_imag": tape.d_filter_weights.imag,
        "lin_real": tape.d_lin_real, "lin_imag": tape.d_lin_imag,
        "bias_real": tape.d_bias_real, "bias_imag": tape.d_bias_imag,
        "revin_gamma": tape.d_revin_gamma, "revin_beta": tape.d_revin_beta,
    }


def _get_group(model: SffpModel, name: str) -> np.ndarray:
    if name == "filter_weights_real":
        return model.filter_weights.real.copy()
    if name == "filter_weights_imag":
        return model.filter_weights.imag.copy()
    return getattr(model, name)


def _set_group(model: SffpModel, name: str, value: np.ndarray) -> None:
    if name == "filter_weights_real":
        model.filter_weights = value + 1j * model.filter_weights.imag
    elif name == "filter_weights_imag":
        model.filter_weights = model.filter_weights.real + 1j * value
    else:
        setattr(model, name, value)


@dataclass
class AdamState:
    """First/second moment estimates per parameter group plus a step count."""

    step: int = 0
    m: dict[str, Any] = field(default_factory=dict)
    v: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def init(cls, model: SffpModel) -> "AdamState":
        state = cls()
        state.m["alpha"] = 0.0
        state.v["alpha"] = 0.0
        for name, shape in _group_shapes(model).items():
            state.m[name] = np.zeros(shape)
            state.v[name] = np.zeros(shape)
        return state


def adam_step(model: SffpModel, tape: GradientTape, state: AdamState,
              config: TrainConfig) -> SffpModel:
    """One Adam update in place.  The transform order has its own learning
    rate and is skipped entirely when frozen."""
    state.step += 1
    t = state.step
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t

    def stepped(name: str, grad, lr: float):
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * grad
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * grad * grad
        m_hat = state.m[name] / c1
        v_hat = state.v[name] / c2
        return lr * m_hat / (np.sqrt(v_hat) + eps)

    if config.learn_alpha:
        model.alpha -= float(stepped("alpha", tape.d_alpha,
                                     config.alpha_learning_rate))
    grads = _group_gradients(tape)
    for name in _ARRAY_GROUPS:
        value = _get_group(model, name)
        _set_group(model, name, value - stepped(name, grads[name],
                                                config.learning_rate))
    return model


def _pooled_mse(model: SffpModel, windows: WindowBatch, chunk: int = 256) -> float:
    op_m = build_operator(model.m, model.alpha)
    op_p = build_operator(model.p, model.alpha)
    total = 0.0
    count = 0
    for lo in range(0, windows.inputs.shape[0], chunk):
        xb = windows.inputs[lo:lo + chunk]
        yb = windows.targets[lo:lo + chunk]
        cache = _forward_cached(xb, model, op_m, op_p)
        d = cache["pred"] - yb
        total += float(np.sum(d * d))
        count += d.size
    return total / count


def train(panel: SeriesPanel, model_cfg: ModelConfig,
          train_cfg: TrainConfig) -> tuple[SffpModel, list[dict[str, float]]]:
    """Fit a model on the panel's chronological train split, early-stopping
    on the validation split.  Returns the best-validation model and the
    per-epoch history."""
    tr = sliding_windows(panel, model_cfg.m, model_cfg.p, split="train")
    va = sliding_windows(panel, model_cfg.m, model_cfg.p, split="val")
    sliding_windows(panel, model_cfg.m, model_cfg.p, split="test")

    model = init_model(model_cfg, panel.values.shape[1])
    state = AdamState.init(model)
    tape = GradientTape.zeros(model)
    rng = np.random.default_rng(train_cfg.seed)

    history: list[dict[str, float]] = []
    best_val = np.inf
    best_model = model.copy()
    epochs_since_best = 0
    n_train = tr.inputs.shape[0]

    for epoch in range(1, train_cfg.max_epochs + 1):
        started = time.monotonic()
        perm = rng.permutation(n_train)
        sq_sum = 0.0
        n_elems = 0
        for lo in range(0, n_train, train_cfg.batch_size):
            take = perm[lo:lo + train_cfg.batch_size]
            batch = (tr.inputs[take], tr.targets[take])
            loss = backward(model, batch, tape)
            adam_step(model, tape, state, train_cfg)
            n_batch = take.size * model.p * model.f
            sq_sum += loss * n_batch
            n_elems += n_batch
        train_mse = sq_sum / n_elems
        val_mse = _pooled_mse(model, va)
        elapsed = time.monotonic() - started
        history.append({
            "epoch": float(epoch),
            "train_mse": train_mse,
            "val_mse": val_mse,
            "alpha": canonical_order(model.alpha),
            "walltime_seconds": elapsed if train_cfg.record_walltime else 0.0,
        })
        if val_mse < best_val:
            best_val = val_mse
            best_model = model.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= train_cfg.patience:
                break
    return best_model, history


def gradient_check(model: SffpModel, batch, h: float = 1e-5,
                   tol: float = 1e-4, tape: GradientTape | None = None) -> dict[str, Any]:
    """Compare analytic gradients against central finite differences.

    Every parameter group is perturbed elementwise; relative error uses a
    floored denominator max(|fd| + |analytic|, 1e-6).  A precomputed tape may
    be passed in (useful for fault injection); otherwise one is computed.
    """
    work = copy.deepcopy(model)
    if tape is None:
        tape = GradientTape.zeros(work)
        backward(work, batch, tape)

    def rel(a: float, b: float) -> float:
        return abs(a - b) / max(abs(a) + abs(b), 1e-6)

    per_group: dict[str, float] = {}
    worst = ("", ())
    worst_err = 0.0

    work.alpha = model.alpha + h
    plus = pipeline_loss(work, batch)
    work.alpha = model.alpha - h
    minus = pipeline_loss(work, batch)
    work.alpha = model.alpha
    fd = (plus - minus) / (2.0 * h)
    err = rel(fd, tape.d_alpha)
    per_group["alpha"] = err
    if err > worst_err:
        worst_err, worst = err, ("alpha", ())

    analytic = _group_gradients(tape)
    for name in _ARRAY_GROUPS:
        base = _get_group(work, name).copy()
        grads = analytic[name]
        group_worst = 0.0
        it = np.nditer(base, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            bumped = base.copy()
            bumped[idx] = base[idx] + h
            _set_group(work, name, bumped)
            plus = pipeline_loss(work, batch)
            bumped[idx] = base[idx] - h
            _set_group(work, name, bumped)
            minus = pipeline_loss(work, batch)
            fd = (plus - minus) / (2.0 * h)
            err = rel(fd, float(grads[idx]))
            if err > group_worst:
                group_worst = err
            if err > worst_err:
                worst_err, worst = err, (name, idx)
        _set_group(work, name, base)
        per_group[name] = group_worst

    return {"passed": worst_err < tol, "max_rel_error": worst_err,
            "worst_group": worst[0], "worst_index": worst[1],
            "per_group": per_group, "h": h, "tol": tol}
