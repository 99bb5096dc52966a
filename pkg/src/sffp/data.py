"""Panel container, CSV ingestion, windowing, and synthetic generators."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import (CsvParseError, InsufficientDataError, ShapeError,
                     TimestampOrderError)

SPLIT_FRACTIONS = (0.8, 0.9)   # chronological train/val/test boundaries
_MISSING_TOKENS = {"", "nan", "na", "null", "none"}


@dataclass
class SeriesPanel:
    """A regularly sampled multivariate series.

    values: (t, f) float64; timestamps: (t,) seconds (float64, strictly
    increasing); band_labels: one name per column.
    """

    values: np.ndarray
    timestamps: np.ndarray
    band_labels: list[str]
    sample_interval: float = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"values must be 2-d, got shape {self.values.shape}")
        t, f = self.values.shape
        if t < 2:
            raise InsufficientDataError("a panel needs at least two rows")
        if self.timestamps.shape != (t,):
            raise ShapeError("timestamps length does not match values rows")
        if len(self.band_labels) != f:
            raise ShapeError("band_labels length does not match value columns")
        diffs = np.diff(self.timestamps)
        if np.any(diffs <= 0):
            bad = int(np.argmax(diffs <= 0)) + 1
            raise TimestampOrderError(
                f"timestamps must be strictly increasing (row {bad})")
        self.sample_interval = float(diffs[0])


@dataclass
class WindowBatch:
    """Stacked sliding windows: inputs (n, m, f), targets (n, p, f), and the
    panel row index where each input window starts."""

    inputs: np.ndarray
    targets: np.ndarray
    origin_indices: np.ndarray


@dataclass
class ParseReport:
    rows: int
    repaired_cells: int


def _parse_timestamp(token: str, line: int) -> float:
    token = token.strip()
    try:
        return float(token)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(token)
    except ValueError:
        raise CsvParseError(f"cannot parse timestamp {token!r}", line) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_csv(path: str | os.PathLike,
             timestamp_column: str | None = None,
             band_columns: list[str] | None = None) -> tuple[SeriesPanel, ParseReport]:
    """Read a headered CSV into a panel.

    Missing cells (empty or nan-like) are forward-filled from the previous
    row; leading gaps take the first observed value in that column.  Malformed
    rows raise CsvParseError naming the 1-based line.  Returns the panel and
    a report with the row count and how many cells were repaired.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("file is empty", 1) from None
        header = [h.strip() for h in header]
        ts_col = header[0] if timestamp_column is None else timestamp_column
        if ts_col not in header:
            raise CsvParseError(f"timestamp column {ts_col!r} not in header", 1)
        ts_idx = header.index(ts_col)
        if band_columns is None:
            band_columns = [h for i, h in enumerate(header) if i != ts_idx]
        if not band_columns:
            raise CsvParseError("no band columns", 1)
        col_idx = []
        for name in band_columns:
            if name not in header:
                raise CsvParseError(f"band column {name!r} not in header", 1)
            col_idx.append(header.index(name))

        timestamps: list[float] = []
        rows: list[list[float]] = []
        missing: list[list[bool]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"expected {len(header)} fields, found {len(row)}", line_no)
            ts = _parse_timestamp(row[ts_idx], line_no)
            if timestamps and ts <= timestamps[-1]:
                raise TimestampOrderError(
                    f"timestamp {row[ts_idx].strip()!r} does not increase", line_no)
            vals: list[float] = []
            gaps: list[bool] = []
            for j in col_idx:
                token = row[j].strip()
                if token.lower() in _MISSING_TOKENS:
                    vals.append(math.nan)
                    gaps.append(True)
                    continue
                try:
                    v = float(token)
                except ValueError:
                    raise CsvParseError(
                        f"cannot parse value {token!r} in column "
                        f"{header[j]!r}", line_no) from None
                if math.isnan(v):
                    gaps.append(True)
                else:
                    gaps.append(False)
                vals.append(v)
            timestamps.append(ts)
            rows.append(vals)
            missing.append(gaps)

    if len(rows) < 2:
        raise InsufficientDataError(f"{path}: need at least two data rows")
    values = np.array(rows)
    gaps = np.array(missing)
    repaired = int(gaps.sum())
    for c in range(values.shape[1]):
        col_gap = gaps[:, c]
        if col_gap.all():
            raise CsvParseError(
                f"column {band_columns[c]!r} has no observed values")
        if not col_gap.any():
            continue
        first = int(np.argmin(col_gap))
        values[:first, c] = values[first, c]
        for r in range(first + 1, values.shape[0]):
            if col_gap[r]:
                values[r, c] = values[r - 1, c]
    panel = SeriesPanel(values=values, timestamps=np.array(timestamps),
                        band_labels=list(band_columns))
    return panel, ParseReport(rows=len(rows), repaired_cells=repaired)


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 2 ** 53:
        return str(int(x))
    return repr(float(x))


def save_csv(panel: SeriesPanel, path: str | os.PathLike) -> None:
    """Write a panel back out.  Floats use repr so a reload is bit-exact."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"] + list(panel.band_labels))
        for i in range(panel.values.shape[0]):
            row = [_format_number(panel.timestamps[i])]
            row += [repr(float(v)) for v in panel.values[i]]
            writer.writerow(row)


def split_bounds(t: int) -> tuple[int, int]:
    """Row indices closing the train and validation splits."""
    return int(SPLIT_FRACTIONS[0] * t), int(SPLIT_FRACTIONS[1] * t)


def sliding_windows(panel: SeriesPanel, m: int, p: int, stride: int = 1,
                    split: str = "train") -> WindowBatch:
    """Cut (input, target) window pairs wholly contained in one chronological
    split.  Windows start every ``stride`` rows."""
    if split not in ("train", "val", "test"):
        raise ValueError(f"split must be train, val, or test, got {split!r}")
    if m < 1 or p < 1 or stride < 1:
        raise ValueError("m, p, and stride must be positive")
    t = panel.values.shape[0]
    b1, b2 = split_bounds(t)
    lo, hi = {"train": (0, b1), "val": (b1, b2), "test": (b2, t)}[split]
    span = hi - lo
    n = (span - m - p) // stride + 1 if span >= m + p else 0
    if n < 1:
        raise InsufficientDataError(
            f"split {split!r} has {span} rows, too few for m={m} p={p}")
    starts = lo + stride * np.arange(n)
    inputs = np.stack([panel.values[s:s + m] for s in starts])
    targets = np.stack([panel.values[s + m:s + m + p] for s in starts])
    return WindowBatch(inputs=inputs, targets=targets, origin_indices=starts)


def _default_timestamps(t_len: int) -> np.ndarray:
    return np.arange(t_len, dtype=np.float64)


def synth_chirp(t_len: int, f_bands: int, chirp_rate: float, f0: float = 0.0,
                noise_sigma: float = 0.0, trend_slope: float = 0.0,
                seed: int = 0) -> tuple[SeriesPanel, float]:
    """Linear-frequency cosine sweep per band with optional trend and noise.

    Bands share the sweep but carry rng-drawn phase offsets.  Also returns an
    oracle transform order: the argmin of the clean band-0 signal's
    concentration profile over a dense grid (step 0.01 on [0, 1]).  Real
    signals have profiles symmetric about order 1 (the transform at 2 - a is
    the parity-flipped conjugate of the transform at a), so the sweep covers
    one half and the oracle is the canonical representative in [0, 1].
    """
    from .fracfourier import concentration_profile

    if t_len < 2 or f_bands < 1:
        raise ShapeError("t_len must be >= 2 and f_bands >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(t_len, dtype=np.float64)
    phases = rng.uniform(0.0, 2.0 * np.pi, f_bands)
    sweep_arg = np.pi * chirp_rate * t * t + 2.0 * np.pi * f0 * t
    values = np.empty((t_len, f_bands))
    for b in range(f_bands):
        values[:, b] = np.cos(sweep_arg + phases[b]) + trend_slope * t
    values += rng.normal(0.0, noise_sigma, (t_len, f_bands))
    clean = np.cos(sweep_arg + phases[0]) + trend_slope * t
    grid = np.arange(0.0, 1.0 + 1e-12, 0.01)
    entropy = concentration_profile(clean, grid)
    oracle_order = float(grid[int(np.argmin(entropy))])
    panel = SeriesPanel(values=values, timestamps=_default_timestamps(t_len),
                        band_labels=[f"band{b}" for b in range(f_bands)])
    return panel, oracle_order


def synth_tones(t_len: int, f_bands: int, freqs, amps=None,
                noise_sigma: float = 0.0, seed: int = 0) -> SeriesPanel:
    """Sum of fixed-frequency cosines per band with rng-drawn phases.

    freqs are in cycles per sample; amps defaults to all ones and must match
    freqs in length.  Each band gets its own phase per tone, so bands share
    the spectral support but not the waveform.
    """
    if t_len < 2 or f_bands < 1:
        raise ShapeError("t_len must be >= 2 and f_bands >= 1")
    freqs = np.asarray(freqs, dtype=np.float64).ravel()
    if freqs.size == 0:
        raise ValueError("freqs must be non-empty")
    amps = (np.ones_like(freqs) if amps is None
            else np.asarray(amps, dtype=np.float64).ravel())
    if amps.shape != freqs.shape:
        raise ShapeError(f"amps length {amps.size} != freqs length {freqs.size}")
    rng = np.random.default_rng(seed)
    t = np.arange(t_len, dtype=np.float64)
    phases = rng.uniform(0.0, 2.0 * np.pi, (f_bands, freqs.size))
    values = np.zeros((t_len, f_bands))
    for b in range(f_bands):
        for a, f, ph in zip(amps, freqs, phases[b]):
            values[:, b] += a * np.cos(2.0 * np.pi * f * t + ph)
    if noise_sigma > 0.0:
        values += rng.normal(0.0, noise_sigma, (t_len, f_bands))
    return SeriesPanel(values=values, timestamps=_default_timestamps(t_len),
                       band_labels=[f"band{b}" for b in range(f_bands)])


def synth_trend_noise(t_len: int, f_bands: int, trend_kind: str = "linear",
                      ar1_phi: float = 0.0, noise_sigma: float = 1.0,
                      trend_scale: float = 1.0, seed: int = 0) -> SeriesPanel:
    """Deterministic trend plus AR(1) noise, one draw per band.

    linear: scale * t / t_len;  quadratic: scale * (t / t_len)^2.
    """
    if t_len < 2 or f_bands < 1:
        raise ShapeError("t_len must be >= 2 and f_bands >= 1")
    if not -1.0 < ar1_phi < 1.0:
        raise ValueError("ar1_phi must lie in (-1, 1)")
    t = np.arange(t_len, dtype=np.float64)
    if trend_kind == "linear":
        trend = trend_scale * t / t_len
    elif trend_kind == "quadratic":
        trend = trend_scale * (t / t_len) ** 2
    else:
        raise ValueError(f"trend_kind must be linear or quadratic, got {trend_kind!r}")
    rng = np.random.default_rng(seed)
    shocks = rng.normal(0.0, noise_sigma, (t_len, f_bands))
    noise = np.empty_like(shocks)
    noise[0] = shocks[0]
    for i in range(1, t_len):
        noise[i] = ar1_phi * noise[i - 1] + shocks[i]
    values = trend[:, None] + noise
    return SeriesPanel(values=values, timestamps=_default_timestamps(t_len),
                       band_labels=[f"band{b}" for b in range(f_bands)])


def periodogram(panel: SeriesPanel, band: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean-removed power spectrum of one band over the rfft bins, with bin
    frequencies in cycles per second of the panel's sample interval."""
    if not 0 <= band < panel.values.shape[1]:
        raise IndexError(f"band {band} out of range "
                         f"[0, {panel.values.shape[1]})")
    x = panel.values[:, band]
    x = x - x.mean()
    spectrum = np.fft.rfft(x)
    power = np.abs(spectrum) ** 2
    freqs = np.fft.rfftfreq(x.shape[0], d=panel.sample_interval)
    return freqs, power
