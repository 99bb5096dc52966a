import numpy as np
import pytest

from sffp.errors import (ConfigError, DegenerateAffineError,
                         DivergedForwardError, ShapeError)
from sffp.fracfourier import build_operator, canonical_order
from sffp.model import (FilterConfig, ModelConfig, SffpModel, apply_filter,
                        complex_linear, effective_filter, forward,
                        forward_batch, head_matrices, init_model, load_model,
                        lowpass_band, model_from_dict, model_to_dict,
                        revin_denormalize, revin_normalize, save_model)


def test_lowpass_band_enumeration():
    assert lowpass_band(6, 3).tolist() == [0, 1, 5]
    assert lowpass_band(8, 4).tolist() == [0, 1, 6, 7]
    assert lowpass_band(8, 1).tolist() == [0]
    assert lowpass_band(8, 0).tolist() == []
    assert sorted(lowpass_band(4, 9).tolist()) == [0, 1, 2, 3]


def test_filter_config_mask_properties():
    fc = FilterConfig.build(16, 4, 3, sampling_seed=9)
    mask = fc.keep_mask
    low = lowpass_band(16, 4)
    assert mask[low].all()
    assert int(mask.sum()) == 4 + 3
    high = np.setdiff1d(np.flatnonzero(mask), low)
    assert np.all(~np.isin(high, low))
    again = FilterConfig.build(16, 4, 3, sampling_seed=9)
    assert np.array_equal(mask, again.keep_mask)
    other = FilterConfig.build(16, 4, 3, sampling_seed=10)
    assert not np.array_equal(mask, other.keep_mask)


def test_filter_config_clamps_and_validates():
    fc = FilterConfig.build(8, 6, 10, sampling_seed=0)
    assert int(fc.keep_mask.sum()) == 8
    assert FilterConfig.build(8, 0, 0).keep_mask.sum() == 0
    with pytest.raises(ConfigError):
        FilterConfig.build(0, 1, 1)
    with pytest.raises(ConfigError):
        FilterConfig.build(8, -1, 0)
    with pytest.raises(ValueError):
        fc.keep_mask[0] = False


def test_resolved_cutoffs_defaults():
    cfg = ModelConfig(m=96, p=24)
    assert cfg.resolved_cutoffs() == (24, 12)
    cfg = ModelConfig(m=96, p=24, lowpass_cutoff=5, random_high_count=0)
    assert cfg.resolved_cutoffs() == (5, 0)


def test_init_model_shapes_and_ranges():
    cfg = ModelConfig(m=8, p=4, init_seed=2)
    model = init_model(cfg, 3)
    k = 1.0 / np.sqrt(8)
    assert model.lin_real.shape == (4, 8)
    assert np.abs(model.lin_real).max() <= k
    assert np.abs(model.lin_imag).max() <= k
    assert np.all(model.bias_real == 0) and np.all(model.bias_imag == 0)
    assert np.all(model.filter_weights == 1.0 + 0.0j)
    assert np.all(model.revin_gamma == 1.0) and np.all(model.revin_beta == 0.0)

    per = init_model(ModelConfig(m=8, p=4, per_channel_head=True), 3)
    assert per.lin_real.shape == (3, 4, 8)
    assert per.bias_real.shape == (3, 4)

    with pytest.raises(ConfigError):
        init_model(ModelConfig(m=0, p=4), 1)
    with pytest.raises(ConfigError):
        init_model(ModelConfig(m=8, p=4, revin_eps=0.0), 1)


def test_real_head_consumes_same_rng():
    base = init_model(ModelConfig(m=8, p=4, init_seed=7), 2)
    real = init_model(ModelConfig(m=8, p=4, init_seed=7, real_head=True), 2)
    assert np.array_equal(base.lin_real, real.lin_real)
    assert np.all(real.lin_imag == 0.0)


def test_revin_round_trip(tiny_model):
    rng = np.random.default_rng(0)
    x = rng.normal(3.0, 2.0, (5, 8, 2))
    z, stats = revin_normalize(x, tiny_model)
    back = revin_denormalize(z, stats, tiny_model)
    assert np.allclose(back, x, atol=1e-12)


def test_revin_constant_window_uses_floor(tiny_model):
    x = np.full((8, 2), 4.2)
    z, stats = revin_normalize(x, tiny_model)
    assert np.all(stats.std == tiny_model.revin_eps)
    assert np.all(np.isfinite(z))
    back = revin_denormalize(z, stats, tiny_model)
    assert np.allclose(back, x, atol=1e-12)


def test_revin_degenerate_gamma(tiny_model):
    x = np.zeros((8, 2))
    z, stats = revin_normalize(x, tiny_model)
    tiny_model.revin_gamma = np.array([1.0, 0.0])
    with pytest.raises(DegenerateAffineError):
        revin_denormalize(z, stats, tiny_model)


def test_complex_linear_brute_force(tiny_model):
    rng = np.random.default_rng(3)
    lin, bias = head_matrices(tiny_model)
    for _ in range(50):
        x = rng.normal(size=8) + 1j * rng.normal(size=8)
        got = complex_linear(x, tiny_model)
        want = np.array([sum(lin[i, j] * x[j] for j in range(8)) + bias[i]
                         for i in range(4)])
        assert np.max(np.abs(got - want)) < 1e-12


def test_complex_linear_per_channel():
    model = init_model(ModelConfig(m=6, p=3, per_channel_head=True,
                                   init_seed=1), 2)
    rng = np.random.default_rng(4)
    model.bias_imag = rng.normal(size=(2, 3))
    x = rng.normal(size=6) + 1j * rng.normal(size=6)
    lin, bias = head_matrices(model)
    for c in (0, 1):
        want = lin[c] @ x + bias[c]
        assert np.allclose(complex_linear(x, model, channel=c), want,
                           atol=1e-13)
    with pytest.raises(ShapeError):
        complex_linear(np.zeros(5, dtype=complex), model)


def test_apply_filter_masks_bins(tiny_model):
    w = effective_filter(tiny_model)
    dropped = ~tiny_model.filter_cfg.keep_mask
    assert np.all(w[dropped] == 0.0)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(3, 8, 2)) + 1j * rng.normal(size=(3, 8, 2))
    got = apply_filter(x, tiny_model)
    assert np.all(got[:, dropped, :] == 0.0)
    kept = tiny_model.filter_cfg.keep_mask
    assert np.allclose(got[:, kept, :],
                       tiny_model.filter_weights[None, kept, None] * x[:, kept, :])
    with pytest.raises(ShapeError):
        apply_filter(np.zeros((7, 2)), tiny_model)


def test_forward_matches_stagewise_oracle(tiny_model):
    rng = np.random.default_rng(6)
    xb = rng.normal(1.0, 0.5, (4, 8, 2))
    got, diag = forward_batch(xb, tiny_model)

    km = build_operator(8, tiny_model.alpha).kernel
    kp = build_operator(4, tiny_model.alpha).kernel
    lin, bias = head_matrices(tiny_model)
    gain = np.where(tiny_model.filter_cfg.keep_mask,
                    tiny_model.filter_weights, 0.0)
    want = np.empty((4, 4, 2))
    for b in range(4):
        for c in range(2):
            col = xb[b, :, c]
            mu, sd = col.mean(), max(col.std(), tiny_model.revin_eps)
            z = tiny_model.revin_gamma[c] * (col - mu) / sd \
                + tiny_model.revin_beta[c]
            u = lin @ (gain * (km @ z)) + bias
            y = (kp.conj().T @ u).real
            want[b, :, c] = (y - tiny_model.revin_beta[c]) \
                / tiny_model.revin_gamma[c] * sd + mu
    assert np.max(np.abs(got - want)) < 1e-10
    assert diag["alpha"] == canonical_order(tiny_model.alpha)
    assert diag["max_imag_residual"] >= 0.0


def test_forward_single_window(tiny_model):
    rng = np.random.default_rng(8)
    x = rng.normal(size=(8, 2))
    one, _ = forward(x, tiny_model)
    stacked, _ = forward_batch(x[None], tiny_model)
    assert np.array_equal(one, stacked[0])
    with pytest.raises(ShapeError):
        forward(rng.normal(size=(2, 8, 2)), tiny_model)
    with pytest.raises(ShapeError):
        forward_batch(rng.normal(size=(8, 3)), tiny_model)


@pytest.mark.filterwarnings("ignore:invalid value encountered")
def test_forward_diverged(tiny_model):
    tiny_model.lin_real = tiny_model.lin_real.copy()
    tiny_model.lin_real[0, 0] = np.inf
    with pytest.raises(DivergedForwardError):
        forward_batch(np.ones((2, 8, 2)), tiny_model)


def test_checkpoint_round_trip(tmp_path, tiny_model):
    path = tmp_path / "model.json"
    save_model(tiny_model, path)
    loaded = load_model(path)
    assert loaded.alpha == tiny_model.alpha
    assert loaded.m == tiny_model.m and loaded.p == tiny_model.p
    assert loaded.f == tiny_model.f
    assert loaded.revin_eps == tiny_model.revin_eps
    for name in ("filter_weights", "lin_real", "lin_imag", "bias_real",
                 "bias_imag", "revin_gamma", "revin_beta"):
        assert np.array_equal(getattr(loaded, name), getattr(tiny_model, name))
    assert np.array_equal(loaded.filter_cfg.keep_mask,
                          tiny_model.filter_cfg.keep_mask)


def test_checkpoint_rejects_bad_documents(tiny_model):
    doc = model_to_dict(tiny_model)
    bad = dict(doc, format="something-else")
    with pytest.raises(ConfigError):
        model_from_dict(bad)
    bad = dict(doc, version=99)
    with pytest.raises(ConfigError):
        model_from_dict(bad)
    bad = dict(doc, params=dict(doc["params"], revin_gamma=[1.0, 2.0, 3.0]))
    with pytest.raises(ConfigError):
        model_from_dict(bad)


def test_model_copy_is_deep(tiny_model):
    dup = tiny_model.copy()
    dup.lin_real[0, 0] += 1.0
    dup.filter_weights[0] = 0.0
    assert dup.lin_real[0, 0] != tiny_model.lin_real[0, 0]
    assert tiny_model.filter_weights[0] != 0.0
