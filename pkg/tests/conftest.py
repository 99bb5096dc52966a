import numpy as np
import pytest

from sffp.data import SeriesPanel
from sffp.model import ModelConfig, init_model


@pytest.fixture
def tiny_model():
    """Small random-ish model for shape and oracle tests: m=8, p=4, f=2."""
    cfg = ModelConfig(m=8, p=4, alpha_init=0.7, lowpass_cutoff=4,
                      random_high_count=2, sampling_seed=3, init_seed=5)
    model = init_model(cfg, 2)
    rng = np.random.default_rng(11)
    model.filter_weights = (rng.normal(size=8) + 1j * rng.normal(size=8))
    model.revin_gamma = rng.uniform(0.5, 1.5, 2)
    model.revin_beta = rng.normal(0.0, 0.3, 2)
    model.bias_real = rng.normal(0.0, 0.2, 4)
    model.bias_imag = rng.normal(0.0, 0.2, 4)
    return model


@pytest.fixture
def tiny_batch():
    rng = np.random.default_rng(7)
    xb = rng.normal(0.0, 1.0, (3, 8, 2))
    yb = rng.normal(0.0, 1.0, (3, 4, 2))
    return xb, yb


def make_panel(t_len=240, f_bands=2, seed=0):
    """Smooth panel with enough rows for windowed splits in fast tests."""
    rng = np.random.default_rng(seed)
    t = np.arange(t_len, dtype=np.float64)
    values = np.stack(
        [np.sin(2.0 * np.pi * 0.05 * t + rng.uniform(0, 2 * np.pi))
         + 0.1 * rng.normal(size=t_len) for _ in range(f_bands)], axis=1)
    return SeriesPanel(values=values, timestamps=t,
                       band_labels=[f"b{i}" for i in range(f_bands)])


@pytest.fixture
def small_panel():
    return make_panel()
