"""Dynamic models between process parameters and melt-pool signatures.

Four single-input structures are supported: a first-order transfer function
with dead time (the workhorse), a second-order linear model, a linear ARX
model, and a Hammerstein-Wiener model (a linear block between two static
piecewise-linear maps).  The multi-layer composite adds a static
millimeter-per-layer gain on top of the laser-power transfer function, so
the melt-pool width responds to both the power command and the layer
count.

Fitting minimizes free-run simulation error: dead time is searched on the
integer-sample grid while the continuous parameters are refined with a
derivative-free simplex from least-squares initial guesses.  The ARX model
is the exception; it is linear in its coefficients and solved in one least
squares pass, then reported on its free-run simulation like the others.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.signal import cont2discrete, lfilter, lfiltic

from .errors import NonConvergenceError, UnidentifiableError
from .signals import (
    DEFAULT_LOWPASS_HZ,
    FitMetrics,
    TimeSeries,
    lowpass,
    metrics_from_arrays,
    remove_mean,
)

__all__ = [
    "FirstOrderDelayModel",
    "SecondOrderDelayModel",
    "ArxModel",
    "PiecewiseLinear",
    "HammersteinWienerModel",
    "CompositeF1",
    "simulate_first_order",
    "simulate_second_order",
    "simulate_arx",
    "simulate_hammerstein_wiener",
    "simulate_composite_f1",
    "composite_for_raw",
    "fit_first_order",
    "fit_second_order",
    "fit_arx",
    "fit_hammerstein_wiener",
    "fit_composite_f1",
    "compare_models",
    "prepare_multilayer_data",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]


# --- model structures ----------------------------------------------------

@dataclass(frozen=True)
class FirstOrderDelayModel:
    """K / (1 + tw s) * exp(-td s): steady-state gain, time constant, dead time."""

    k_gain: float
    tw: float
    td: float

    def __post_init__(self):
        if not (self.tw > 0):
            raise ValueError(f"time constant must be positive, got {self.tw}")
        if self.td < 0:
            raise ValueError(f"dead time must be non-negative, got {self.td}")


@dataclass(frozen=True)
class SecondOrderDelayModel:
    """(b0 + b1 s) / (1 + a1 s + a2 s^2) * exp(-td s)."""

    b0: float
    b1: float
    a1: float
    a2: float
    td: float

    def __post_init__(self):
        if self.td < 0:
            raise ValueError("dead time must be non-negative")

    @property
    def stable(self) -> bool:
        roots = np.roots([self.a2, self.a1, 1.0])
        return bool(np.all(np.real(roots) < 0))


@dataclass(frozen=True)
class ArxModel:
    """A(q) y = B(q) u with na output lags, nb input lags, nk input delay."""

    na: int
    nb: int
    nk: int
    a_coeffs: tuple  # a1..a_na
    b_coeffs: tuple  # b1..b_nb

    def __post_init__(self):
        if self.na < 1 or self.nb < 1 or self.nk < 0:
            raise ValueError("need na, nb >= 1 and nk >= 0")
        if len(self.a_coeffs) != self.na or len(self.b_coeffs) != self.nb:
            raise ValueError("coefficient counts must match the declared orders")


@dataclass(frozen=True)
class PiecewiseLinear:
    """Monotone piecewise-linear map; clamps outside the breakpoint range."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing, length >= 2")
        if len(self.values) != bp.size:
            raise ValueError("one value per breakpoint required")
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in bp))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def inverse(self, y):
        vals = np.asarray(self.values)
        if np.any(np.diff(vals) <= 0):
            raise ValueError("map is not strictly increasing; cannot invert")
        return np.interp(y, vals, self.breakpoints)

    @classmethod
    def identity(cls, lo: float, hi: float, count: int = 2) -> "PiecewiseLinear":
        bp = np.linspace(lo, hi, count)
        return cls(tuple(bp), tuple(bp))


@dataclass(frozen=True)
class HammersteinWienerModel:
    input_nl: PiecewiseLinear
    linear_block: FirstOrderDelayModel
    output_nl: PiecewiseLinear


@dataclass(frozen=True)
class CompositeF1:
    """Multi-layer model: MPW = G_LP(s) LP + g_n * n (+ bias).

    ``g_n`` is the static millimeter-per-layer gain; it is expected to be
    negative since the pool narrows as layers stack up.  ``bias`` absorbs
    the constant offset left over when the fitted signals were centered but
    the layer channel was not.
    """

    g_lp: FirstOrderDelayModel
    g_n: float
    bias: float = 0.0


# --- simulation ----------------------------------------------------------

def _delay_steps(td: float, dt: float) -> int:
    return int(round(td / dt))


def _delayed(u: np.ndarray, d: int) -> np.ndarray:
    """Input shifted right by d samples; zero before the first sample."""
    if d == 0:
        return u
    out = np.zeros_like(u)
    if d < u.size:
        out[d:] = u[:-d]
    return out


def _sim_first_order(u: np.ndarray, dt: float, k_gain: float, tw: float,
                     d: int, y0: float) -> np.ndarray:
    a = math.exp(-dt / tw)
    v = np.empty_like(u)
    v[0] = 0.0
    v[1:] = _delayed(u, d)[:-1]
    y, _ = lfilter([(1.0 - a) * k_gain], [1.0, -a], v, zi=np.array([y0]))
    return y


def simulate_first_order(m: FirstOrderDelayModel, u: TimeSeries,
                         y0: float = 0.0) -> TimeSeries:
    """Exact zero-order-hold response of the first-order-plus-dead-time model.

    The dead time is rounded to whole samples.  The output starts at ``y0``
    and the input is treated as zero before the first sample, so a step
    contained in ``u`` produces the textbook delayed exponential rise.
    """
    d = _delay_steps(m.td, u.dt)
    return u.with_values(_sim_first_order(u.values, u.dt, m.k_gain, m.tw, d, y0),
                         unit="")


def _discretize_second_order(m_params, dt: float):
    b0, b1, a1, a2 = m_params
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # tiny numerators are fine here
        num, den, _ = cont2discrete(([b1, b0], [a2, a1, 1.0]), dt, method="zoh")
    return np.atleast_1d(np.squeeze(num)), np.atleast_1d(den)


def _sim_second_order(u: np.ndarray, dt: float, params, d: int,
                      y0: float) -> np.ndarray:
    num, den = _discretize_second_order(params, dt)
    u_d = _delayed(u, d)
    if y0 == 0.0:
        y = lfilter(num, den, u_d)
    else:
        zi = lfiltic(num, den, y=[y0, y0], x=[0.0, 0.0])
        y, _ = lfilter(num, den, u_d, zi=zi)
    return y


def simulate_second_order(m: SecondOrderDelayModel, u: TimeSeries,
                          y0: float = 0.0) -> TimeSeries:
    """ZOH response of the second-order model; starts at rest at ``y0``."""
    d = _delay_steps(m.td, u.dt)
    y = _sim_second_order(u.values, u.dt, (m.b0, m.b1, m.a1, m.a2), d, y0)
    return u.with_values(y, unit="")


def simulate_arx(m: ArxModel, u: TimeSeries) -> TimeSeries:
    """Free-run (simulation-mode) ARX response from zero initial conditions."""
    num = np.concatenate([np.zeros(m.nk), np.asarray(m.b_coeffs)])
    den = np.concatenate([[1.0], np.asarray(m.a_coeffs)])
    return u.with_values(lfilter(num, den, u.values), unit="")


def simulate_hammerstein_wiener(m: HammersteinWienerModel,
                                u: TimeSeries) -> TimeSeries:
    v = m.input_nl(u.values)
    d = _delay_steps(m.linear_block.td, u.dt)
    z = _sim_first_order(v, u.dt, m.linear_block.k_gain, m.linear_block.tw, d, 0.0)
    return u.with_values(m.output_nl(z), unit="")


def simulate_composite_f1(m: CompositeF1, lp: TimeSeries, layer: TimeSeries,
                          start: str = "rest") -> TimeSeries:
    """Melt-pool width from laser power plus the static layer gain.

    ``start="rest"`` begins with zero transfer-function state (the exact
    counterpart of a record that opens mid-rise); ``start="steady"``
    pre-settles the dynamics at the first power sample, which is the right
    choice when replaying a record that was already depositing at t0.
    """
    _require_synchronized(lp, layer)
    if start == "steady":
        dev = lp.with_values(lp.values - lp.values[0])
        base_vals = (m.g_lp.k_gain * lp.values[0]
                     + simulate_first_order(m.g_lp, dev, y0=0.0).values)
    elif start == "rest":
        base_vals = simulate_first_order(m.g_lp, lp, y0=0.0).values
    else:
        raise ValueError("start must be 'rest' or 'steady'")
    return lp.with_values(base_vals + m.g_n * layer.values + m.bias, unit="mm")


def composite_for_raw(m: CompositeF1, preprocessing: dict) -> CompositeF1:
    """Re-bias a model fitted on mean-removed signals for raw-unit replay.

    ``preprocessing`` is the record produced by
    :func:`prepare_multilayer_data` (it carries the removed means), so a
    stored model can be simulated directly against unprocessed power and
    width channels.
    """
    bias = (m.bias + preprocessing["mpw_mean"]
            - m.g_lp.k_gain * preprocessing["lp_mean"])
    return replace(m, bias=bias)


def _require_synchronized(*series: TimeSeries) -> None:
    s0 = series[0]
    for s in series[1:]:
        if (len(s) != len(s0) or abs(s.t0 - s0.t0) > 1e-9
                or abs(s.dt - s0.dt) > 1e-12):
            raise ValueError("series must share t0, dt, and length exactly")


# --- fitting -------------------------------------------------------------

def _check_fit_data(u: TimeSeries, y: TimeSeries) -> None:
    _require_synchronized(u, y)
    if len(u) < 8:
        raise UnidentifiableError("need at least 8 samples to fit a model")
    if np.ptp(u.values) == 0:
        raise UnidentifiableError("input signal is constant; gain is unidentifiable")


def _delay_grid(n: int, dt: float, delay_max_s: float) -> range:
    return range(0, min(int(round(delay_max_s / dt)), n // 3) + 1)


def _arx11_start(u: np.ndarray, y: np.ndarray, d: int):
    """ARX(1,1) least squares at a fixed delay, mapped to (K, tw) guesses."""
    k0 = d + 1
    if y.size - k0 < 4:
        return None
    phi = np.column_stack([y[k0 - 1:-1], u[k0 - 1 - d:y.size - 1 - d]])
    theta, *_ = np.linalg.lstsq(phi, y[k0:], rcond=None)
    a_hat, b_hat = float(theta[0]), float(theta[1])
    if not (0.0 < a_hat < 1.0):
        return None
    tw0 = -1.0 / math.log(a_hat)  # in samples
    k_gain0 = b_hat / (1.0 - a_hat)
    return k_gain0, tw0


def _step_start(u: np.ndarray, y: np.ndarray):
    """Gain and time-constant guesses from endpoint averages (step-like data)."""
    n = y.size
    head = slice(0, max(n // 10, 2))
    tail = slice(n - max(n // 10, 2), n)
    du = float(np.mean(u[tail]) - np.mean(u[head]))
    dy = float(np.mean(y[tail]) - np.mean(y[head]))
    if du == 0.0:
        return None
    return dy / du, max(n / 20.0, 2.0)


def _fit_first_order_arrays(u: np.ndarray, y: np.ndarray, dt: float,
                            delay_grid, maxfev: int = 300):
    best = (np.inf, None, None)  # sse, (k, tw), d
    for d in delay_grid:
        starts = []
        arx = _arx11_start(u, y, d)
        if arx is not None:
            starts.append(arx)
        step = _step_start(u, y)
        if step is not None:
            starts.append(step)
        if not starts:
            starts.append((1.0, max(y.size / 20.0, 2.0)))
        for k0, tw0_samples in starts:
            tw0 = max(tw0_samples * dt, dt * 0.5)
            if k0 == 0.0:
                k0 = 1e-6

            def sse(x):
                k_gain, ln_tw = x
                yhat = _sim_first_order(u, dt, k_gain, math.exp(ln_tw), d, y[0])
                with np.errstate(over="ignore", invalid="ignore"):
                    val = float(np.sum((yhat - y) ** 2))
                return val if math.isfinite(val) else np.inf

            res = minimize(sse, [k0, math.log(tw0)], method="Nelder-Mead",
                           options={"maxfev": maxfev, "xatol": 1e-8, "fatol": 1e-12})
            if res.fun < best[0]:
                best = (res.fun, (float(res.x[0]), math.exp(float(res.x[1]))), d)
    sse, (k_gain, tw), d = best
    return FirstOrderDelayModel(k_gain=k_gain, tw=tw, td=d * dt), sse


def fit_first_order(u: TimeSeries, y: TimeSeries, *,
                    delay_max_s: float = 1.0) -> tuple[FirstOrderDelayModel, FitMetrics]:
    """Fit gain, time constant, and dead time by free-run simulation error.

    Dead time is scanned over the integer-sample grid up to ``delay_max_s``;
    for each candidate the gain and time constant start from an ARX(1,1)
    least-squares guess (plus a step-response guess) and are refined with a
    Nelder-Mead simplex on the simulation sum of squares.
    """
    _check_fit_data(u, y)
    model, _ = _fit_first_order_arrays(u.values, y.values, u.dt,
                                       _delay_grid(len(u), u.dt, delay_max_s))
    yhat = simulate_first_order(model, u, y0=float(y.values[0]))
    return model, metrics_from_arrays(yhat.values, y.values)


def fit_second_order(u: TimeSeries, y: TimeSeries, *,
                     delay_max_s: float = 1.0) -> tuple[SecondOrderDelayModel, FitMetrics]:
    """Fit the second-order structure; contains first order as a special case.

    The simplex starts from the best first-order fit (b1 = 0 and a small
    second pole), and the denominator is parameterized through logs so the
    fitted model is always stable.
    """
    _check_fit_data(u, y)
    uv, yv, dt = u.values, y.values, u.dt
    fo, fo_sse = _fit_first_order_arrays(uv, yv, dt,
                                         _delay_grid(len(u), dt, delay_max_s))
    d_fo = _delay_steps(fo.td, dt)
    # the dead time is a physical transport delay shared by both structures,
    # so only a small window around the first-order estimate is rescanned
    d_top = _delay_grid(len(u), dt, delay_max_s).stop - 1
    best = (np.inf, None, None)
    for d in range(max(d_fo - 3, 0), min(d_fo + 3, d_top) + 1):

        def sse(x):
            b0, b1, ln_a1, ln_a2 = x
            yhat = _sim_second_order(uv, dt, (b0, b1, math.exp(ln_a1),
                                              math.exp(ln_a2)), d, yv[0])
            with np.errstate(over="ignore", invalid="ignore"):
                val = float(np.sum((yhat - yv) ** 2))
            return val if math.isfinite(val) else np.inf

        x0 = [fo.k_gain, 0.0, math.log(fo.tw), math.log(max(fo.tw / 10.0, dt / 4))]
        res = minimize(sse, x0, method="Nelder-Mead",
                       options={"maxfev": 400, "xatol": 1e-8, "fatol": 1e-12})
        if res.fun < best[0]:
            best = (res.fun, res.x, d)
    sse_best, x, d = best
    # never report a fit worse than the nested first-order solution
    if sse_best > fo_sse:
        x = [fo.k_gain, 0.0, math.log(fo.tw), math.log(dt / 4)]
        d = d_fo
    model = SecondOrderDelayModel(b0=float(x[0]), b1=float(x[1]),
                                  a1=math.exp(float(x[2])),
                                  a2=math.exp(float(x[3])), td=d * dt)
    yhat = simulate_second_order(model, u, y0=float(yv[0]))
    return model, metrics_from_arrays(yhat.values, yv)


def fit_arx(u: TimeSeries, y: TimeSeries, na: int = 2, nb: int = 2,
            nk: int = 1) -> tuple[ArxModel, FitMetrics]:
    """One-step-ahead least squares for the ARX coefficients.

    The regression is linear, so no iteration is involved; the reported
    metrics still come from the free-run simulation to stay comparable with
    the other structures.
    """
    _require_synchronized(u, y)
    uv, yv = u.values, y.values
    n = len(u)
    k0 = max(na, nb + nk - 1, nk)
    if n <= na + nb + nk + 1 or n - k0 < na + nb:
        raise UnidentifiableError("record too short for the requested ARX orders")
    rows = n - k0
    phi = np.empty((rows, na + nb))
    for i in range(1, na + 1):
        phi[:, i - 1] = -yv[k0 - i:n - i]
    for j in range(nb):
        phi[:, na + j] = uv[k0 - nk - j:n - nk - j]
    # a zero output makes the y-lag columns vanish and the minimum-norm
    # solution (all zeros) is correct; only deficient input columns mean
    # the data genuinely cannot pin down the model
    if np.linalg.matrix_rank(phi[:, na:]) < nb:
        raise UnidentifiableError("regressor matrix is rank deficient")
    theta, *_ = np.linalg.lstsq(phi, yv[k0:], rcond=None)
    model = ArxModel(na=na, nb=nb, nk=nk,
                     a_coeffs=tuple(float(t) for t in theta[:na]),
                     b_coeffs=tuple(float(t) for t in theta[na:]))
    yhat = simulate_arx(model, u)
    return model, metrics_from_arrays(yhat.values, yv)


def _pava_nondecreasing(v: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    v = v.astype(float).copy()
    w = np.ones_like(v)
    i = 0
    while i < v.size - 1:
        if v[i] > v[i + 1] + 1e-15:
            merged = (w[i] * v[i] + w[i + 1] * v[i + 1]) / (w[i] + w[i + 1])
            v[i] = merged
            w[i] += w[i + 1]
            v = np.delete(v, i + 1)
            w = np.delete(w, i + 1)
            i = max(i - 1, 0)
        else:
            i += 1
    # expand pooled blocks back to full length
    out = np.repeat(v, w.astype(int))
    return out


def _strictify(v: np.ndarray) -> np.ndarray:
    span = max(float(v[-1] - v[0]), 1e-6)
    return v + 1e-9 * span * np.arange(v.size)


def fit_hammerstein_wiener(u: TimeSeries, y: TimeSeries,
                           breakpoint_count: int = 5, *,
                           max_rounds: int = 50, tol: float = 1e-6,
                           input_nl: str = "fit", output_nl: str = "fit",
                           delay_max_s: float = 1.0):
    """Alternating fit of the Hammerstein-Wiener blocks.

    Each round refits the linear block on the transformed signals, then the
    input map (linear in its node values through the known linear block),
    then the output map, both projected onto monotone sequences.  Stops
    when the loss improves by less than ``tol`` (relative) or after
    ``max_rounds``; three consecutive loss increases abort with the best
    iterate attached to the error.

    Passing ``input_nl="identity"`` or ``output_nl="identity"`` pins that
    block to a two-node identity map, which reduces the structure to the
    plain first-order fit when both are pinned.
    """
    _check_fit_data(u, y)
    if breakpoint_count < 2:
        raise ValueError("need at least 2 breakpoints")
    uv, yv, dt = u.values, y.values, u.dt
    n_in = breakpoint_count if input_nl == "fit" else 2
    n_out = breakpoint_count if output_nl == "fit" else 2
    f_in = PiecewiseLinear.identity(float(uv.min()), float(uv.max()), n_in)
    f_out = PiecewiseLinear.identity(float(yv.min()), float(yv.max()), n_out)
    full_grid = _delay_grid(len(u), dt, delay_max_s)

    best_loss, best_model = np.inf, None
    prev_loss = np.inf
    increases = 0
    d_hint = None
    lin = None
    for _ in range(max_rounds):
        grid = full_grid if d_hint is None else range(max(d_hint - 1, 0), d_hint + 2)
        v = f_in(uv)
        w = f_out.inverse(yv)
        lin, _ = _fit_first_order_arrays(v, w, dt, grid, maxfev=200)
        d_hint = _delay_steps(lin.td, dt)

        if input_nl == "fit":
            f_in, lin = _refit_input_nl(uv, w, dt, f_in, lin, d_hint)
        z = _sim_first_order(f_in(uv), dt, lin.k_gain, lin.tw, d_hint, w[0])
        if output_nl == "fit":
            f_out = _refit_output_nl(z, yv, n_out)

        yhat = f_out(z)
        loss = float(np.sum((yhat - yv) ** 2))
        if loss < best_loss:
            best_loss = loss
            best_model = HammersteinWienerModel(f_in, lin, f_out)
        if loss > prev_loss * (1 + 1e-12):
            increases += 1
            if increases >= 3:
                raise NonConvergenceError(
                    "Hammerstein-Wiener loss increased 3 rounds in a row",
                    best=best_model)
        else:
            increases = 0
        if prev_loss - loss < tol * max(prev_loss, 1.0) and np.isfinite(prev_loss):
            break
        prev_loss = loss

    yhat = simulate_hammerstein_wiener(best_model, u)
    return best_model, metrics_from_arrays(yhat.values, yv)


def _refit_input_nl(uv, w, dt, f_in, lin, d):
    bp = np.asarray(f_in.breakpoints)
    basis = np.empty((uv.size, bp.size))
    for j in range(bp.size):
        nodes = np.zeros(bp.size)
        nodes[j] = 1.0
        hat = np.interp(uv, bp, nodes)
        basis[:, j] = _sim_first_order(hat, dt, lin.k_gain, lin.tw, d, 0.0)
    c, *_ = np.linalg.lstsq(basis, w, rcond=None)
    c = _pava_nondecreasing(c)
    span_u = float(bp[-1] - bp[0])
    span_c = float(c[-1] - c[0])
    if span_c <= 1e-12:
        return f_in, lin  # degenerate flat map; keep the previous blocks
    scale = span_u / span_c
    c = (c - c[0]) * scale + bp[0]
    lin = replace(lin, k_gain=lin.k_gain / scale)
    return PiecewiseLinear(tuple(bp), tuple(_strictify(c))), lin


def _refit_output_nl(z, yv, n_out):
    lo, hi = float(z.min()), float(z.max())
    if hi - lo < 1e-12:
        hi = lo + 1.0
    bp = np.linspace(lo, hi, n_out)
    basis = np.empty((z.size, n_out))
    for j in range(n_out):
        nodes = np.zeros(n_out)
        nodes[j] = 1.0
        basis[:, j] = np.interp(z, bp, nodes)
    dvals, *_ = np.linalg.lstsq(basis, yv, rcond=None)
    dvals = _strictify(_pava_nondecreasing(dvals))
    return PiecewiseLinear(tuple(bp), tuple(dvals))


def fit_composite_f1(lp: TimeSeries, layer: TimeSeries, mpw: TimeSeries, *,
                     validation_fraction: float = 0.3,
                     delay_max_s: float = 1.0) -> tuple[CompositeF1, FitMetrics]:
    """Joint fit of the laser-power transfer function and the layer gain.

    Callers are expected to have concatenated the non-zero segments,
    low-pass filtered, and removed the signal means first (see
    :func:`prepare_multilayer_data`).  The trailing ``validation_fraction``
    of the record is held out; reported metrics are the free-run prediction
    on that suffix.  For a fixed time constant and dead time the gain,
    layer gain, and bias are linear, so they are solved by least squares
    inside a simplex search over the time constant per dead-time candidate.
    """
    _require_synchronized(lp, layer, mpw)
    if np.unique(layer.values).size < 2:
        raise UnidentifiableError(
            "layer channel is constant; the layer gain is unidentifiable")
    if np.ptp(lp.values) == 0:
        raise UnidentifiableError("laser power is constant")
    if not (0.0 < validation_fraction < 1.0):
        raise ValueError("validation_fraction must be in (0, 1)")
    n = len(lp)
    n_train = max(int(round(n * (1.0 - validation_fraction))), 8)
    uv, nv, yv, dt = lp.values, layer.values, mpw.values, lp.dt

    def solve_linear(tw: float, d: int):
        unit = _sim_first_order(uv, dt, 1.0, tw, d, 0.0)
        phi = np.column_stack([unit, nv, np.ones(n)])[:n_train]
        theta, *_ = np.linalg.lstsq(phi, yv[:n_train], rcond=None)
        resid = phi @ theta - yv[:n_train]
        return theta, float(resid @ resid)

    best = (np.inf, None, None, None)
    for d in _delay_grid(n, dt, delay_max_s):

        def sse(x):
            return solve_linear(math.exp(x[0]), d)[1]

        res = minimize(sse, [math.log(10 * dt)], method="Nelder-Mead",
                       options={"maxfev": 80, "xatol": 1e-8, "fatol": 1e-12})
        tw = math.exp(float(res.x[0]))
        theta, err = solve_linear(tw, d)
        if err < best[0]:
            best = (err, tw, d, theta)
    _, tw, d, theta = best
    model = CompositeF1(
        g_lp=FirstOrderDelayModel(k_gain=float(theta[0]), tw=tw, td=d * dt),
        g_n=float(theta[1]), bias=float(theta[2]))
    yhat = simulate_composite_f1(model, lp, layer)
    val = slice(n_train, n)
    return model, metrics_from_arrays(yhat.values[val], yv[val])


def compare_models(u: TimeSeries, y: TimeSeries,
                   validation_fraction: float = 0.5, *,
                   arx_orders: tuple = (2, 2, 1),
                   hw_breakpoints: int = 5) -> list[dict]:
    """Fit all four structures on the leading portion, rank by validation BF.

    Each structure is fitted on the first ``1 - validation_fraction`` of the
    record and judged by free-run best fit over the held-out suffix.  A
    structure that fails to fit is still listed, with the error message in
    place of its metrics.
    """
    if not (0.0 < validation_fraction < 1.0):
        raise ValueError("validation_fraction must be in (0, 1)")
    _require_synchronized(u, y)
    n = len(u)
    n_train = max(int(round(n * (1.0 - validation_fraction))), 8)
    u_train = TimeSeries(u.t0, u.dt, u.values[:n_train], u.unit)
    y_train = TimeSeries(y.t0, y.dt, y.values[:n_train], y.unit)

    def free_run(model, simulate):
        yhat = simulate(model)
        return metrics_from_arrays(yhat.values[n_train:], y.values[n_train:])

    attempts = [
        ("first_order", lambda: fit_first_order(u_train, y_train),
         lambda m: simulate_first_order(m, u, y0=float(y.values[0]))),
        ("second_order", lambda: fit_second_order(u_train, y_train),
         lambda m: simulate_second_order(m, u, y0=float(y.values[0]))),
        ("arx", lambda: fit_arx(u_train, y_train, *arx_orders),
         lambda m: simulate_arx(m, u)),
        ("hammerstein_wiener",
         lambda: fit_hammerstein_wiener(u_train, y_train, hw_breakpoints),
         lambda m: simulate_hammerstein_wiener(m, u)),
    ]
    report = []
    for structure, fit, simulate in attempts:
        entry = {"structure": structure, "model": None,
                 "train_metrics": None, "validation_metrics": None,
                 "error": None}
        try:
            model, train_metrics = fit()
            entry["model"] = model
            entry["train_metrics"] = train_metrics
            entry["validation_metrics"] = free_run(model, simulate)
        except Exception as exc:  # recorded, not fatal
            entry["error"] = f"{type(exc).__name__}: {exc}"
        report.append(entry)
    report.sort(key=lambda e: (-e["validation_metrics"].bf_percent
                               if e["validation_metrics"] else np.inf))
    return report


def prepare_multilayer_data(lp: TimeSeries, mpw: TimeSeries, layer: TimeSeries, *,
                            cutoff_hz: float = DEFAULT_LOWPASS_HZ):
    """Preprocess a wall record for composite fitting.

    Concatenates the samples where the pool is present (non-zero MPW) onto a
    fresh uniform grid, low-pass filters the melt-pool width, and removes
    the means of power and width.  Returns the three processed series plus
    a record of what was done, so a stored model can state its training
    conditions.
    """
    _require_synchronized(lp, mpw, layer)
    keep = mpw.values != 0.0
    if not np.any(keep):
        raise UnidentifiableError("record contains no non-zero melt-pool samples")
    dt = lp.dt
    lp_c = TimeSeries(0.0, dt, lp.values[keep], lp.unit)
    mpw_c = TimeSeries(0.0, dt, mpw.values[keep], mpw.unit)
    layer_c = TimeSeries(0.0, dt, layer.values[keep], layer.unit)
    mpw_f = lowpass(mpw_c, cutoff_hz)
    lp_z, lp_mean = remove_mean(lp_c)
    mpw_z, mpw_mean = remove_mean(mpw_f)
    info = {
        "kept_samples": int(keep.sum()),
        "dropped_samples": int((~keep).sum()),
        "lowpass_cutoff_hz": cutoff_hz,
        "lp_mean": lp_mean,
        "mpw_mean": mpw_mean,
    }
    return lp_z, mpw_z, layer_c, info


# --- persistence ---------------------------------------------------------

_STRUCTURE_TAGS = {
    FirstOrderDelayModel: "first_order",
    SecondOrderDelayModel: "second_order",
    ArxModel: "arx",
    HammersteinWienerModel: "hammerstein_wiener",
    CompositeF1: "composite_f1",
}


def model_to_dict(model) -> dict:
    tag = _STRUCTURE_TAGS.get(type(model))
    if tag is None:
        raise TypeError(f"unknown model type {type(model).__name__}")
    if isinstance(model, FirstOrderDelayModel):
        params = {"k_gain": model.k_gain, "tw": model.tw, "td": model.td}
    elif isinstance(model, SecondOrderDelayModel):
        params = {"b0": model.b0, "b1": model.b1, "a1": model.a1,
                  "a2": model.a2, "td": model.td}
    elif isinstance(model, ArxModel):
        params = {"na": model.na, "nb": model.nb, "nk": model.nk,
                  "a_coeffs": list(model.a_coeffs),
                  "b_coeffs": list(model.b_coeffs)}
    elif isinstance(model, HammersteinWienerModel):
        params = {
            "input_nl": {"breakpoints": list(model.input_nl.breakpoints),
                         "values": list(model.input_nl.values)},
            "linear_block": model_to_dict(model.linear_block)["parameters"],
            "output_nl": {"breakpoints": list(model.output_nl.breakpoints),
                          "values": list(model.output_nl.values)},
        }
    else:  # CompositeF1
        params = {"g_lp": model_to_dict(model.g_lp)["parameters"],
                  "g_n": model.g_n, "bias": model.bias}
    return {"structure": tag, "parameters": params}


def model_from_dict(doc: dict):
    tag = doc["structure"]
    p = doc["parameters"]
    if tag == "first_order":
        return FirstOrderDelayModel(**p)
    if tag == "second_order":
        return SecondOrderDelayModel(**p)
    if tag == "arx":
        return ArxModel(na=p["na"], nb=p["nb"], nk=p["nk"],
                        a_coeffs=tuple(p["a_coeffs"]),
                        b_coeffs=tuple(p["b_coeffs"]))
    if tag == "hammerstein_wiener":
        return HammersteinWienerModel(
            input_nl=PiecewiseLinear(tuple(p["input_nl"]["breakpoints"]),
                                     tuple(p["input_nl"]["values"])),
            linear_block=FirstOrderDelayModel(**p["linear_block"]),
            output_nl=PiecewiseLinear(tuple(p["output_nl"]["breakpoints"]),
                                      tuple(p["output_nl"]["values"])))
    if tag == "composite_f1":
        return CompositeF1(g_lp=FirstOrderDelayModel(**p["g_lp"]),
                           g_n=p["g_n"], bias=p.get("bias", 0.0))
    raise ValueError(f"unknown model structure tag {tag!r}")


def save_model(path, model, *, metrics: FitMetrics = None, units: dict = None,
               preprocessing: dict = None) -> None:
    doc = model_to_dict(model)
    if metrics is not None:
        doc["fit_metrics"] = metrics.as_dict()
    if units:
        doc["units"] = units
    if preprocessing:
        doc["preprocessing"] = preprocessing
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_dict(doc), doc
