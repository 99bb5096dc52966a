"""Input validation shared by the estimator layer and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .data import SeriesPanel
from .errors import ShapeError


def as_panel(X) -> SeriesPanel:
    """Accept a SeriesPanel or a (t, f) array-like; arrays get unit-spaced
    integer timestamps and generated band labels."""
    if isinstance(X, SeriesPanel):
        return X
    values = check_array(X, dtype=np.float64, ensure_all_finite=True)
    t, f = values.shape
    return SeriesPanel(values=values,
                       timestamps=np.arange(t, dtype=np.float64),
                       band_labels=[f"band{b}" for b in range(f)])


def as_window_stack(X, m: int, f: int) -> np.ndarray:
    """Coerce input into a (n, m, f) window stack.

    Accepts a (n, m, f) stack, a single (m, f) window, or a longer (t, f)
    history whose trailing m rows become the window.
    """
    if isinstance(X, SeriesPanel):
        X = X.values
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ShapeError("input contains non-finite values")
    if X.ndim == 3:
        if X.shape[1:] != (m, f):
            raise ShapeError(f"window stack must be (n, {m}, {f}), "
                             f"got {X.shape}")
        return X
    if X.ndim == 2:
        if X.shape[1] != f:
            raise ShapeError(f"expected {f} columns, got {X.shape[1]}")
        if X.shape[0] < m:
            raise ShapeError(f"need at least {m} rows, got {X.shape[0]}")
        return X[-m:][None]
    raise ShapeError(f"expected a 2-d or 3-d array, got shape {X.shape}")
