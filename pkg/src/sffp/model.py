"""Forecasting model: instance normalization, fractional-domain filtering,
and a complex linear head.

Pipeline for one window x of shape (m, f):

    z    = gamma * (x - mean) / max(std, eps) + beta      per channel
    Z    = K_m(alpha) z                                   fractional transform
    Xf   = keep_mask * weights * Z                        hybrid filter
    U    = lin @ Xf + bias                                complex linear head
    Y    = K_p(alpha)^H U                                 inverse transform
    xhat = (Re(Y) - beta) / gamma * std + mean            denormalize

All arrays are float64/complex128.  Batches stack windows on a leading axis.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (ConfigError, DegenerateAffineError, DivergedForwardError,
                     ShapeError)
from .fracfourier import build_operator, canonical_order

CHECKPOINT_FORMAT = "sffp-checkpoint"
CHECKPOINT_VERSION = 1


def lowpass_band(m: int, cutoff: int) -> np.ndarray:
    """Indices of the ``cutoff`` lowest-frequency bins of an m-point spectrum,
    split between the leading edge and the wrapped negative-frequency tail."""
    cutoff = min(int(cutoff), int(m))
    head = (cutoff + 1) // 2
    tail = cutoff // 2
    return np.concatenate([np.arange(head), np.arange(m - tail, m)])


@dataclass(frozen=True)
class FilterConfig:
    """Which of the m transform bins pass through the filter.

    ``keep_mask`` keeps the ``lowpass_cutoff`` lowest bins plus
    ``random_high_count`` bins sampled without replacement from the rest;
    the sample count is clamped so the total never exceeds m.
    """

    lowpass_cutoff: int
    random_high_count: int
    sampling_seed: int
    keep_mask: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, m: int, lowpass_cutoff: int, random_high_count: int,
              sampling_seed: int = 0) -> "FilterConfig":
        if m < 1:
            raise ConfigError(f"filter length must be positive, got {m}")
        if lowpass_cutoff < 0 or random_high_count < 0:
            raise ConfigError("filter bin counts must be non-negative")
        mask = np.zeros(m, dtype=bool)
        low = lowpass_band(m, lowpass_cutoff)
        mask[low] = True
        rest = np.flatnonzero(~mask)
        take = min(random_high_count, rest.size)
        if take > 0:
            rng = np.random.default_rng(sampling_seed)
            mask[rng.choice(rest, size=take, replace=False)] = True
        mask.setflags(write=False)
        return cls(lowpass_cutoff=int(lowpass_cutoff),
                   random_high_count=int(random_high_count),
                   sampling_seed=int(sampling_seed), keep_mask=mask)


@dataclass
class InstanceStats:
    """Per-channel location/scale remembered between the normalize and
    denormalize ends of the pipeline.  ``std`` is already floored at eps."""

    mean: np.ndarray
    std: np.ndarray


@dataclass
class ModelConfig:
    """Hyperparameters fixed before training."""

    m: int = 96
    p: int = 24
    alpha_init: float = 0.5
    lowpass_cutoff: int | None = None
    random_high_count: int | None = None
    sampling_seed: int = 0
    init_seed: int = 0
    per_channel_head: bool = False
    revin_eps: float = 1e-5
    real_head: bool = False

    def resolved_cutoffs(self) -> tuple[int, int]:
        c = self.m // 4 if self.lowpass_cutoff is None else self.lowpass_cutoff
        s = self.m // 8 if self.random_high_count is None else self.random_high_count
        return int(c), int(s)


@dataclass
class SffpModel:
    """All learnable state plus the fixed shape/filter choices."""

    m: int
    p: int
    f: int
    alpha: float
    filter_cfg: FilterConfig
    filter_weights: np.ndarray      # complex (m,)
    lin_real: np.ndarray            # (p, m) or (f, p, m)
    lin_imag: np.ndarray
    bias_real: np.ndarray           # (p,) or (f, p)
    bias_imag: np.ndarray
    revin_gamma: np.ndarray         # (f,)
    revin_beta: np.ndarray          # (f,)
    revin_eps: float = 1e-5
    per_channel_head: bool = False

    def copy(self) -> "SffpModel":
        return SffpModel(
            m=self.m, p=self.p, f=self.f, alpha=self.alpha,
            filter_cfg=self.filter_cfg,
            filter_weights=self.filter_weights.copy(),
            lin_real=self.lin_real.copy(), lin_imag=self.lin_imag.copy(),
            bias_real=self.bias_real.copy(), bias_imag=self.bias_imag.copy(),
            revin_gamma=self.revin_gamma.copy(),
            revin_beta=self.revin_beta.copy(),
            revin_eps=self.revin_eps, per_channel_head=self.per_channel_head)


def init_model(cfg: ModelConfig, n_bands: int) -> SffpModel:
    """Build a freshly initialized model for ``n_bands`` input channels.

    Linear head entries are uniform on [-1/sqrt(m), 1/sqrt(m)], biases zero,
    filter weights one, gamma one, beta zero.
    """
    if cfg.m < 1 or cfg.p < 1 or n_bands < 1:
        raise ConfigError(
            f"window sizes and band count must be positive, got "
            f"m={cfg.m} p={cfg.p} f={n_bands}")
    if cfg.revin_eps <= 0.0:
        raise ConfigError("revin_eps must be positive")
    c, s = cfg.resolved_cutoffs()
    fcfg = FilterConfig.build(cfg.m, c, s, cfg.sampling_seed)
    rng = np.random.default_rng(cfg.init_seed)
    k = 1.0 / math.sqrt(cfg.m)
    if cfg.per_channel_head:
        lin_shape: tuple[int, ...] = (n_bands, cfg.p, cfg.m)
        bias_shape: tuple[int, ...] = (n_bands, cfg.p)
    else:
        lin_shape = (cfg.p, cfg.m)
        bias_shape = (cfg.p,)
    lin_real = rng.uniform(-k, k, lin_shape)
    lin_imag = rng.uniform(-k, k, lin_shape)
    if cfg.real_head:
        # same rng consumption as the complex head, so inits stay comparable
        lin_imag = np.zeros(lin_shape)
    return SffpModel(
        m=cfg.m, p=cfg.p, f=n_bands, alpha=float(cfg.alpha_init),
        filter_cfg=fcfg,
        filter_weights=np.ones(cfg.m, dtype=np.complex128),
        lin_real=lin_real,
        lin_imag=lin_imag,
        bias_real=np.zeros(bias_shape),
        bias_imag=np.zeros(bias_shape),
        revin_gamma=np.ones(n_bands),
        revin_beta=np.zeros(n_bands),
        revin_eps=cfg.revin_eps,
        per_channel_head=cfg.per_channel_head)


def _check_window(x: np.ndarray, m: int, f: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        want = (m, f)
    elif x.ndim == 3:
        want = (x.shape[0], m, f)
    else:
        raise ShapeError(f"{what} must be (m, f) or (batch, m, f), "
                         f"got shape {x.shape}")
    if x.shape != want:
        raise ShapeError(f"{what} must have shape {want}, got {x.shape}")
    return x


def revin_normalize(x: np.ndarray, model: SffpModel) -> tuple[np.ndarray, InstanceStats]:
    """Standardize each channel of each window by its own mean/std (ddof 0,
    std floored at revin_eps), then apply the learned affine gamma/beta."""
    x = _check_window(x, model.m, model.f, "window")
    axis = x.ndim - 2
    mean = x.mean(axis=axis)
    std = np.maximum(x.std(axis=axis), model.revin_eps)
    stats = InstanceStats(mean=mean, std=std)
    centered = (x - np.expand_dims(mean, axis)) / np.expand_dims(std, axis)
    z = model.revin_gamma * centered + model.revin_beta
    return z, stats


def revin_denormalize(y: np.ndarray, stats: InstanceStats,
                      model: SffpModel) -> np.ndarray:
    """Invert the affine map and restore the remembered location/scale."""
    if np.any(model.revin_gamma == 0.0):
        raise DegenerateAffineError(
            "revin gamma has a zero entry; denormalization is undefined")
    y = np.asarray(y, dtype=np.float64)
    axis = y.ndim - 2
    centered = (y - model.revin_beta) / model.revin_gamma
    return centered * np.expand_dims(stats.std, axis) + np.expand_dims(stats.mean, axis)


def effective_filter(model: SffpModel) -> np.ndarray:
    """Complex per-bin gain actually applied: weights on kept bins, hard 0.0
    elsewhere."""
    return np.where(model.filter_cfg.keep_mask, model.filter_weights,
                    0.0 + 0.0j)


def apply_filter(x_fr: np.ndarray, model: SffpModel) -> np.ndarray:
    """Multiply transform-domain coefficients (leading axis m, or batched
    (batch, m, f)) by the masked learnable weights."""
    x_fr = np.asarray(x_fr, dtype=np.complex128)
    w = effective_filter(model)
    if x_fr.ndim == 1:
        if x_fr.shape[0] != model.m:
            raise ShapeError(f"expected length {model.m}, got {x_fr.shape}")
        return w * x_fr
    if x_fr.ndim == 3 and x_fr.shape[1] == model.m:
        return w[None, :, None] * x_fr
    if x_fr.ndim == 2 and x_fr.shape[0] == model.m:
        return w[:, None] * x_fr
    raise ShapeError(f"coefficients must have axis of length {model.m}, "
                     f"got shape {x_fr.shape}")


def head_matrices(model: SffpModel) -> tuple[np.ndarray, np.ndarray]:
    """Complex head weight and bias assembled from their real pairs."""
    lin = model.lin_real + 1j * model.lin_imag
    bias = model.bias_real + 1j * model.bias_imag
    return lin, bias


def complex_linear(x_f: np.ndarray, model: SffpModel, channel: int = 0) -> np.ndarray:
    """Standard complex matrix-vector product lin @ x + bias for one
    channel's filtered coefficients."""
    x_f = np.asarray(x_f, dtype=np.complex128)
    if x_f.shape != (model.m,):
        raise ShapeError(f"expected a length-{model.m} vector, got {x_f.shape}")
    lin, bias = head_matrices(model)
    if model.per_channel_head:
        return lin[channel] @ x_f + bias[channel]
    return lin @ x_f + bias


def _apply_head(x_f: np.ndarray, model: SffpModel) -> np.ndarray:
    """Head applied to a (batch, m, f) stack, giving (batch, p, f)."""
    lin, bias = head_matrices(model)
    if model.per_channel_head:
        out = np.einsum("cpm,bmc->bpc", lin, x_f)
        return out + bias.T[None, :, :]
    return lin @ x_f + bias[None, :, None]


def _forward_cached(xb: np.ndarray, model: SffpModel, op_m, op_p) -> dict[str, Any]:
    """Run the full pipeline on a (batch, m, f) stack, keeping every
    intermediate needed by backpropagation."""
    z, stats = revin_normalize(xb, model)
    z_c = z.astype(np.complex128)
    z_fr = op_m.kernel @ z_c
    x_f = apply_filter(z_fr, model)
    u = _apply_head(x_f, model)
    y = op_p.kernel.conj().T @ u
    y_real = y.real
    pred = revin_denormalize(y_real, stats, model)
    if not np.all(np.isfinite(pred)):
        raise DivergedForwardError("forward pass produced non-finite values")
    return {"x": xb, "stats": stats, "z": z, "z_fr": z_fr, "x_f": x_f,
            "u": u, "y": y, "y_real": y_real, "pred": pred,
            "op_m": op_m, "op_p": op_p}


def forward_batch(xb: np.ndarray, model: SffpModel) -> tuple[np.ndarray, dict[str, float]]:
    """Predict (batch, p, f) from (batch, m, f)."""
    xb = _check_window(xb, model.m, model.f, "window batch")
    if xb.ndim == 2:
        xb = xb[None]
    op_m = build_operator(model.m, model.alpha)
    op_p = build_operator(model.p, model.alpha)
    cache = _forward_cached(xb, model, op_m, op_p)
    diag = {"alpha": canonical_order(model.alpha),
            "max_imag_residual": float(np.abs(cache["y"].imag).max())}
    return cache["pred"], diag


def forward(x: np.ndarray, model: SffpModel) -> tuple[np.ndarray, dict[str, float]]:
    """Predict a (p, f) continuation of one (m, f) window."""
    x = _check_window(x, model.m, model.f, "window")
    if x.ndim != 2:
        raise ShapeError("forward takes a single window; use forward_batch")
    pred, diag = forward_batch(x[None], model)
    return pred[0], diag


def model_to_dict(model: SffpModel) -> dict[str, Any]:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "m": model.m, "p": model.p, "f": model.f,
        "alpha": model.alpha,
        "per_channel_head": model.per_channel_head,
        "revin_eps": model.revin_eps,
        "filter": {
            "lowpass_cutoff": model.filter_cfg.lowpass_cutoff,
            "random_high_count": model.filter_cfg.random_high_count,
            "sampling_seed": model.filter_cfg.sampling_seed,
        },
        "params": {
            "filter_weights_real": model.filter_weights.real.tolist(),
            "filter_weights_imag": model.filter_weights.imag.tolist(),
            "lin_real": model.lin_real.tolist(),
            "lin_imag": model.lin_imag.tolist(),
            "bias_real": model.bias_real.tolist(),
            "bias_imag": model.bias_imag.tolist(),
            "revin_gamma": model.revin_gamma.tolist(),
            "revin_beta": model.revin_beta.tolist(),
        },
    }


def model_from_dict(doc: dict[str, Any]) -> SffpModel:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"not a model checkpoint: format={doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    m, p, f = int(doc["m"]), int(doc["p"]), int(doc["f"])
    filt = doc["filter"]
    fcfg = FilterConfig.build(m, int(filt["lowpass_cutoff"]),
                              int(filt["random_high_count"]),
                              int(filt["sampling_seed"]))
    prm = doc["params"]
    per_channel = bool(doc["per_channel_head"])
    lin_shape = (f, p, m) if per_channel else (p, m)
    bias_shape = (f, p) if per_channel else (p,)

    def arr(name: str, shape: tuple[int, ...]) -> np.ndarray:
        a = np.asarray(prm[name], dtype=np.float64)
        if a.shape != shape:
            raise ConfigError(f"checkpoint field {name} has shape {a.shape}, "
                              f"expected {shape}")
        return a

    weights = arr("filter_weights_real", (m,)) + 1j * arr("filter_weights_imag", (m,))
    return SffpModel(
        m=m, p=p, f=f, alpha=float(doc["alpha"]), filter_cfg=fcfg,
        filter_weights=weights,
        lin_real=arr("lin_real", lin_shape), lin_imag=arr("lin_imag", lin_shape),
        bias_real=arr("bias_real", bias_shape), bias_imag=arr("bias_imag", bias_shape),
        revin_gamma=arr("revin_gamma", (f,)), revin_beta=arr("revin_beta", (f,)),
        revin_eps=float(doc["revin_eps"]),
        per_channel_head=per_channel)


def save_model(model: SffpModel, path: str | os.PathLike) -> None:
    """Write the model as JSON.  repr-based float serialization round-trips
    float64 values bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> SffpModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
