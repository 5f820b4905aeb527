"""Uniformly sampled signals and the preprocessing applied to them.

Every process parameter and melt-pool signature in this package travels as a
:class:`TimeSeries`: a start time, a fixed sample step, and a vector of
values with a free-form unit tag.  The functions here cover the whole
preprocessing vocabulary of the pipeline: moving-average and zero-phase
low-pass filtering, resampling onto a common grid, mean removal, min-max
normalization, the natural-log output transform, and regression metrics.

All operations are pure: they never mutate their inputs and always return
fresh series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyOverlapError

DEFAULT_DT = 0.03  # s, the acquisition rate all channels are synchronized to
DEFAULT_SMOOTH_WINDOW = 8  # samples, melt-pool signal smoothing
DEFAULT_LOWPASS_HZ = 13.0  # Hz, multi-layer identification prefilter

__all__ = [
    "DEFAULT_DT",
    "DEFAULT_SMOOTH_WINDOW",
    "DEFAULT_LOWPASS_HZ",
    "TimeSeries",
    "FitMetrics",
    "moving_average",
    "lowpass",
    "resample_sync",
    "remove_mean",
    "normalize_minmax",
    "denormalize_minmax",
    "log_transform",
    "exp_transform",
    "fit_metrics",
    "metrics_from_arrays",
    "read_timeseries_csv",
    "write_timeseries_csv",
]


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled scalar signal.

    Sample ``k`` occurs at ``t0 + k * dt`` exactly.  Values are held in a
    read-only float array so instances can be shared freely across threads.
    """

    t0: float
    dt: float
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("all samples must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.values.size - 1)

    def with_values(self, values, unit=None) -> "TimeSeries":
        """New series on the same grid with different samples."""
        return TimeSeries(self.t0, self.dt, values,
                          self.unit if unit is None else unit)


@dataclass(frozen=True)
class FitMetrics:
    """Prediction-quality summary: RMSE, MAE, R², and best fit (R² in %)."""

    rmse: float
    mae: float
    r2: float
    bf_percent: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.bf_percent is None:
            object.__setattr__(self, "bf_percent", 100.0 * self.r2)

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae,
                "r2": self.r2, "bf_percent": self.bf_percent}


def moving_average(s: TimeSeries, window: int) -> TimeSeries:
    """Centered moving average with truncated edges.

    The window covers ``(window - 1) // 2`` samples before and
    ``window // 2`` samples after each point; near the edges only the
    available neighbors are averaged, so length, ``t0``, and ``dt`` are
    preserved.  The default melt-pool smoothing uses
    ``DEFAULT_SMOOTH_WINDOW`` (8 samples).
    """
    n = len(s)
    window = int(window)
    if window < 1 or window > n:
        raise ValueError(f"window must be in [1, {n}], got {window}")
    lo = (window - 1) // 2
    hi = window // 2
    # cumulative-sum formulation: mean over [k - lo, k + hi] clipped to range
    csum = np.concatenate(([0.0], np.cumsum(s.values)))
    k = np.arange(n)
    a = np.maximum(k - lo, 0)
    b = np.minimum(k + hi, n - 1)
    out = (csum[b + 1] - csum[a]) / (b - a + 1)
    return s.with_values(out)


def _ema_alpha(cutoff_hz: float, dt: float) -> float:
    # -3 dB of the forward-backward pair at the cutoff; single pass is
    # H(z) = a / (1 - (1-a) z^-1), combined magnitude |H|^2.
    r = 2.0 ** -0.5
    c = math.cos(2.0 * math.pi * cutoff_hz * dt)
    beta = ((1.0 - r * c) - math.sqrt((1.0 - r * c) ** 2 - (1.0 - r) ** 2)) / (1.0 - r)
    return 1.0 - beta


def lowpass(s: TimeSeries, cutoff_hz: float = DEFAULT_LOWPASS_HZ) -> TimeSeries:
    """Zero-phase first-order low-pass filter.

    A single-pole exponential filter is applied forward and then backward,
    which cancels the phase shift; the pole is placed so the combined
    response is -3 dB at ``cutoff_hz``.  The cutoff must lie strictly below
    the Nyquist frequency ``1 / (2 dt)``.
    """
    nyquist = 0.5 / s.dt
    if not (0.0 < cutoff_hz < nyquist):
        raise ValueError(
            f"cutoff must be in (0, {nyquist:g}) Hz for dt={s.dt:g}, got {cutoff_hz:g}")
    alpha = _ema_alpha(cutoff_hz, s.dt)
    fwd = _ema_pass(s.values, alpha)
    bwd = _ema_pass(fwd[::-1], alpha)[::-1]
    return s.with_values(bwd)


def _ema_pass(x: np.ndarray, alpha: float) -> np.ndarray:
    from scipy.signal import lfilter

    # y[0] = x[0] via the filter's initial condition
    b = [alpha]
    a = [1.0, -(1.0 - alpha)]
    zi = np.array([(1.0 - alpha) * x[0]])
    y, _ = lfilter(b, a, x, zi=zi)
    return y


def resample_sync(series_list: list[TimeSeries],
                  dt_target: float = DEFAULT_DT) -> list[TimeSeries]:
    """Linearly resample several series onto one shared grid.

    The common grid starts at the latest ``t0``, steps by ``dt_target``, and
    ends at the earliest final sample, so every output shares
    ``(t0, dt, length)`` exactly.
    """
    if not series_list:
        return []
    if not (dt_target > 0):
        raise ValueError("dt_target must be positive")
    t0 = max(s.t0 for s in series_list)
    t_end = min(s.t_end for s in series_list)
    if t_end < t0 - 1e-12:
        raise EmptyOverlapError(
            f"series do not overlap in time (common start {t0:g} s is after "
            f"common end {t_end:g} s)")
    n = int(math.floor((t_end - t0) / dt_target + 1e-9)) + 1
    grid = t0 + dt_target * np.arange(n)
    out = []
    for s in series_list:
        vals = np.interp(grid, s.times, s.values)
        out.append(TimeSeries(t0, dt_target, vals, s.unit))
    return out


def remove_mean(s: TimeSeries) -> tuple[TimeSeries, float]:
    """Subtract the sample mean; returns the centered series and the mean."""
    m = float(np.mean(s.values))
    return s.with_values(s.values - m), m


def normalize_minmax(s: TimeSeries) -> tuple[TimeSeries, float, float]:
    """Affinely map the series into [0, 1].

    Returns ``(normalized, min, max)``.  A constant series maps to all
    zeros (min equals max marks the degenerate case); the recorded bounds
    still restore the original through :func:`denormalize_minmax`.
    """
    lo = float(np.min(s.values))
    hi = float(np.max(s.values))
    if hi == lo:
        return s.with_values(np.zeros(len(s)), unit=""), lo, hi
    return s.with_values((s.values - lo) / (hi - lo), unit=""), lo, hi


def denormalize_minmax(s: TimeSeries, lo: float, hi: float,
                       unit: str = "") -> TimeSeries:
    """Invert :func:`normalize_minmax` given the recorded bounds."""
    return s.with_values(s.values * (hi - lo) + lo, unit=unit)


def log_transform(s: TimeSeries) -> TimeSeries:
    """Elementwise natural logarithm; requires strictly positive samples."""
    bad = np.flatnonzero(s.values <= 0)
    if bad.size:
        raise ValueError(
            f"log transform requires positive samples; sample {bad[0]} "
            f"is {s.values[bad[0]]!r}")
    return s.with_values(np.log(s.values), unit=f"ln({s.unit})" if s.unit else "")


def exp_transform(s: TimeSeries, unit: str = "") -> TimeSeries:
    """Elementwise exponential, the inverse of :func:`log_transform`."""
    return s.with_values(np.exp(s.values), unit=unit)


def metrics_from_arrays(predicted, actual) -> FitMetrics:
    """RMSE / MAE / R² / best-fit for two equal-length vectors.

    Best fit is the R-squared value expressed as a percentage.  The actual
    vector must not be constant (R² is undefined then).
    """
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.size != a.size:
        raise ValueError(f"length mismatch: {p.size} vs {a.size}")
    if p.size < 2:
        raise ValueError("need at least 2 samples for fit metrics")
    sst = float(np.sum((a - a.mean()) ** 2))
    err = p - a
    sse = float(np.sum(err ** 2))
    if sst == 0.0:
        if sse == 0.0:
            return FitMetrics(rmse=0.0, mae=0.0, r2=1.0)  # exact reproduction
        raise ValueError("actual series is constant; R² is undefined")
    rmse = math.sqrt(sse / a.size)
    mae = float(np.mean(np.abs(err)))
    r2 = 1.0 - sse / sst
    return FitMetrics(rmse=rmse, mae=mae, r2=r2)


def fit_metrics(predicted: TimeSeries, actual: TimeSeries) -> FitMetrics:
    """Metrics for a predicted series against the measured one."""
    return metrics_from_arrays(predicted.values, actual.values)


# --- CSV interchange ---------------------------------------------------

def write_timeseries_csv(path, s: TimeSeries, name: str) -> None:
    """Write ``t,<name>[unit]`` rows, one sample per line."""
    header = f"t,{name}[{s.unit}]" if s.unit else f"t,{name}"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for t, v in zip(s.times, s.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


def read_timeseries_csv(path) -> tuple[TimeSeries, str]:
    """Read a ``t,<name>[unit]`` CSV; returns ``(series, name)``.

    The time column must be uniform within 1e-9 relative tolerance.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if len(cols) != 2 or cols[0] != "t":
            raise ValueError(f"expected header 't,<name>[unit]', got {header!r}")
        name, unit = _parse_channel_header(cols[1])
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no samples")
    t = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    dt = _validate_uniform(t, str(path))
    return TimeSeries(float(t[0]), dt, v, unit), name


def _parse_channel_header(col: str) -> tuple[str, str]:
    col = col.strip()
    if col.endswith("]") and "[" in col:
        name, unit = col[:-1].split("[", 1)
        return name, unit
    return col, ""


def _validate_uniform(t: np.ndarray, label: str) -> float:
    if t.size == 1:
        raise ValueError(f"{label}: cannot infer dt from a single sample")
    steps = np.diff(t)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError(f"{label}: time column is not uniformly sampled")
    return dt
