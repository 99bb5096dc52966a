"""Forecasting toolkit built around a learnable-order fractional Fourier
domain: eigenbasis transform, hybrid bin filter, complex linear head, and a
hand-rolled gradient descent loop that also learns the transform order."""

from .data import (SeriesPanel, WindowBatch, load_csv, periodogram, save_csv,
                   sliding_windows, synth_chirp, synth_tones,
                   synth_trend_noise)
from .eval import (MetricReport, SweepResult, emit_report, evaluate,
                   run_alpha_sweep, run_filter_sweep,
                   run_transformation_ablation)
from .forecaster import FractionalSpectrumTransformer, SffpForecaster
from .fracfourier import (FrftOperator, build_eigenbasis, build_operator,
                          canonical_order, concentration_profile, frft, ifrft,
                          operator_order_derivative, spectral_entropy)
from .model import (FilterConfig, InstanceStats, ModelConfig, SffpModel,
                    apply_filter, complex_linear, forward, forward_batch,
                    init_model, load_model, revin_denormalize,
                    revin_normalize, save_model)
from .train import (AdamState, GradientTape, TrainConfig, adam_step, backward,
                    gradient_check, mse_loss, train)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "FilterConfig", "FractionalSpectrumTransformer",
    "FrftOperator", "GradientTape", "InstanceStats", "MetricReport",
    "ModelConfig", "SeriesPanel", "SffpForecaster", "SffpModel",
    "SweepResult", "TrainConfig", "WindowBatch", "adam_step", "apply_filter",
    "backward", "build_eigenbasis", "build_operator", "canonical_order",
    "complex_linear", "concentration_profile", "emit_report", "evaluate",
    "forward", "forward_batch", "frft", "gradient_check", "ifrft",
    "init_model", "load_csv", "load_model", "mse_loss",
    "operator_order_derivative", "periodogram", "revin_denormalize",
    "revin_normalize", "run_alpha_sweep", "run_filter_sweep",
    "run_transformation_ablation", "save_csv", "save_model",
    "sliding_windows", "spectral_entropy", "synth_chirp", "synth_tones",
    "synth_trend_noise",
    "train",
]
