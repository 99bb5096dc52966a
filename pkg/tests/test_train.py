import numpy as np
import pytest

from sffp.data import synth_chirp
from sffp.errors import ConfigError, ShapeError
from sffp.fracfourier import concentration_profile
from sffp.model import ModelConfig, init_model
from sffp.train import (AdamState, GradientTape, TrainConfig, adam_step,
                        backward, gradient_check, mse_loss, pipeline_loss,
                        train)


def test_mse_loss_hand_arithmetic():
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])
    truth = np.array([[1.0, 0.0], [0.0, 4.0]])
    assert mse_loss(pred, truth) == (0.0 + 4.0 + 9.0 + 0.0) / 4.0
    with pytest.raises(ShapeError):
        mse_loss(np.zeros(3), np.zeros(4))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(patience=6, max_epochs=5)
    with pytest.raises(ConfigError):
        TrainConfig(adam_beta1=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(adam_eps=0.0)


def test_backward_matches_finite_differences(tiny_model, tiny_batch):
    report = gradient_check(tiny_model, tiny_batch)
    assert report["passed"], report
    assert report["max_rel_error"] < 1e-4
    expected_groups = {"alpha", "filter_weights_real", "filter_weights_imag",
                       "lin_real", "lin_imag", "bias_real", "bias_imag",
                       "revin_gamma", "revin_beta"}
    assert set(report["per_group"]) == expected_groups


def test_backward_per_channel_head_gradients(tiny_batch):
    cfg = ModelConfig(m=8, p=4, alpha_init=0.9, lowpass_cutoff=4,
                      random_high_count=2, per_channel_head=True, init_seed=3)
    model = init_model(cfg, 2)
    rng = np.random.default_rng(9)
    model.bias_real = rng.normal(0.0, 0.1, (2, 4))
    report = gradient_check(model, tiny_batch)
    assert report["passed"], report


def test_gradient_check_detects_corrupted_tape(tiny_model, tiny_batch):
    tape = GradientTape.zeros(tiny_model)
    backward(tiny_model, tiny_batch, tape)
    tape.d_alpha += 1.0
    report = gradient_check(tiny_model, tiny_batch, tape=tape)
    assert not report["passed"]
    assert report["worst_group"] == "alpha"


def test_backward_returns_pipeline_loss(tiny_model, tiny_batch):
    tape = GradientTape.zeros(tiny_model)
    loss = backward(tiny_model, tiny_batch, tape)
    assert loss == pytest.approx(pipeline_loss(tiny_model, tiny_batch),
                                 rel=1e-12)


def test_adam_first_step_is_sign_scaled(tiny_model, tiny_batch):
    cfg = TrainConfig(learning_rate=1e-2, alpha_learning_rate=1e-3,
                      adam_eps=1e-8)
    state = AdamState.init(tiny_model)
    tape = GradientTape.zeros(tiny_model)
    backward(tiny_model, tiny_batch, tape)
    before_bias = tiny_model.bias_real.copy()
    before_alpha = tiny_model.alpha
    adam_step(tiny_model, tape, state, cfg)
    g = tape.d_bias_real
    want = before_bias - cfg.learning_rate * g / (np.abs(g) + cfg.adam_eps)
    assert np.allclose(tiny_model.bias_real, want, atol=1e-12)
    ga = tape.d_alpha
    assert tiny_model.alpha == pytest.approx(
        before_alpha - cfg.alpha_learning_rate * ga / (abs(ga) + cfg.adam_eps))


def test_adam_skips_alpha_when_frozen(tiny_model, tiny_batch):
    cfg = TrainConfig(learn_alpha=False)
    state = AdamState.init(tiny_model)
    tape = GradientTape.zeros(tiny_model)
    backward(tiny_model, tiny_batch, tape)
    before = tiny_model.alpha
    adam_step(tiny_model, tape, state, cfg)
    assert tiny_model.alpha == before


def test_train_early_stops_on_flat_loss(small_panel):
    mcfg = ModelConfig(m=16, p=4, alpha_init=0.5)
    tcfg = TrainConfig(learning_rate=1e-300, alpha_learning_rate=1e-300,
                       max_epochs=10, patience=1, seed=0)
    _, history = train(small_panel, mcfg, tcfg)
    # epoch 1 sets the best; epoch 2 fails to improve and exhausts patience
    assert len(history) == 2


def test_train_returns_best_validation_model(small_panel):
    mcfg = ModelConfig(m=16, p=4, alpha_init=0.5)
    tcfg = TrainConfig(max_epochs=6, patience=6, seed=1)
    best, history = train(small_panel, mcfg, tcfg)
    vals = [h["val_mse"] for h in history]
    from sffp.data import sliding_windows
    from sffp.train import _pooled_mse
    va = sliding_windows(small_panel, 16, 4, split="val")
    assert _pooled_mse(best, va) == pytest.approx(min(vals), rel=1e-12)


def test_train_history_schema(small_panel):
    mcfg = ModelConfig(m=16, p=4)
    tcfg = TrainConfig(max_epochs=2, patience=2, seed=0)
    _, history = train(small_panel, mcfg, tcfg)
    assert [h["epoch"] for h in history] == [1.0, 2.0]
    for h in history:
        assert set(h) == {"epoch", "train_mse", "val_mse", "alpha",
                          "walltime_seconds"}
        assert h["walltime_seconds"] == 0.0


def test_learned_alpha_tracks_concentration_argmin():
    # folded sweep panel: the adaptive order settles near the argmin of the
    # clean mid-series window's concentration profile
    panel, _ = synth_chirp(1600, 3, 2.5e-3, f0=0.05, noise_sigma=0.4,
                           trend_slope=0.002, seed=11)
    clean, _ = synth_chirp(1600, 1, 2.5e-3, f0=0.05, noise_sigma=0.0,
                           trend_slope=0.0, seed=11)
    grid = np.arange(0.0, 1.0 + 1e-12, 0.01)
    ent = concentration_profile(clean.values[760:856, 0], grid)
    ref = float(grid[np.argmin(ent)])
    mcfg = ModelConfig(m=96, p=24, alpha_init=1.0)
    tcfg = TrainConfig(max_epochs=15, patience=15, seed=0,
                       alpha_learning_rate=2e-2)
    _, history = train(panel, mcfg, tcfg)
    assert abs(history[-1]["alpha"] - ref) <= 0.15
