"""scikit-learn style wrappers around the training loop and the transform."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .fracfourier import build_operator
from .model import ModelConfig
from .train import TrainConfig, train
from .validation import as_panel, as_window_stack


class SffpForecaster(BaseEstimator):
    """Forecast the next ``p`` rows of a multivariate series from the last
    ``m``, through a learned fractional-domain filter and linear head.

    fit(X) takes the full history as a (t, f) array or SeriesPanel and trains
    on its chronological train/val splits.  predict(X) maps windows to
    forecasts: (n, m, f) -> (n, p, f), and a single (m, f) window or longer
    (t, f) history -> (p, f).
    """

    def __init__(self, m: int = 96, p: int = 24, alpha_init: float = 0.5,
                 learn_alpha: bool = True, lowpass_cutoff: int | None = None,
                 random_high_count: int | None = None, sampling_seed: int = 0,
                 init_seed: int = 0, per_channel_head: bool = False,
                 revin_eps: float = 1e-5, learning_rate: float = 1e-3,
                 alpha_learning_rate: float = 1e-2, batch_size: int = 32,
                 max_epochs: int = 50, patience: int = 5, seed: int = 0):
        self.m = m
        self.p = p
        self.alpha_init = alpha_init
        self.learn_alpha = learn_alpha
        self.lowpass_cutoff = lowpass_cutoff
        self.random_high_count = random_high_count
        self.sampling_seed = sampling_seed
        self.init_seed = init_seed
        self.per_channel_head = per_channel_head
        self.revin_eps = revin_eps
        self.learning_rate = learning_rate
        self.alpha_learning_rate = alpha_learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def fit(self, X, y=None):
        panel = as_panel(X)
        model_cfg = ModelConfig(
            m=self.m, p=self.p, alpha_init=self.alpha_init,
            lowpass_cutoff=self.lowpass_cutoff,
            random_high_count=self.random_high_count,
            sampling_seed=self.sampling_seed, init_seed=self.init_seed,
            per_channel_head=self.per_channel_head, revin_eps=self.revin_eps)
        train_cfg = TrainConfig(
            learning_rate=self.learning_rate,
            alpha_learning_rate=self.alpha_learning_rate,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            patience=self.patience, seed=self.seed,
            learn_alpha=self.learn_alpha)
        self.model_, self.history_ = train(panel, model_cfg, train_cfg)
        self.n_features_in_ = panel.values.shape[1]
        self.alpha_ = self.model_.alpha
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this SffpForecaster is not fitted yet")

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        from .model import forward_batch
        arr = X.values if hasattr(X, "values") else np.asarray(X)
        windows = as_window_stack(X, self.m, self.n_features_in_)
        pred, _ = forward_batch(windows, self.model_)
        return pred if arr.ndim == 3 else pred[0]


class FractionalSpectrumTransformer(TransformerMixin, BaseEstimator):
    """Stateless feature map: each (m,)-row becomes the real and imaginary
    parts of its order-``alpha`` fractional Fourier coefficients, giving a
    (n, 2m) real matrix."""

    def __init__(self, alpha: float = 0.5):
        self.alpha = alpha

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"expected (n, m), got shape {X.shape}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != getattr(self, "n_features_in_", X.shape[1]):
            raise ValueError(f"expected (n, {self.n_features_in_}), "
                             f"got shape {X.shape}")
        op = build_operator(X.shape[1], self.alpha)
        coeffs = (op.kernel @ X.T).T
        return np.hstack([coeffs.real, coeffs.imag])
