"""Closed-loop bead-width control and the two-scenario comparison.

The controller is a parallel-form discrete PID: trapezoidal integration,
derivative taken on a low-pass-filtered measurement (so setpoint steps do
not kick the actuator), output clamped to the laser-power limits with the
integrator frozen while clamped.

Two loop arrangements are supported.  In the property-controlled scenario
the feedback is the bead width predicted by the signature-to-property
surrogate from the measured pool width, pool length, and layer count.  In
the signature-controlled scenario the loop regulates the measured pool
width directly and the surrogate is only evaluated after the fact to see
what bead width the part actually reached.  Comparing the two on identical
seeded plants is the point: holding the pool width at the setpoint does
not hold the bead width there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .errors import TuningError
from .plant import PlantConfig, VirtualPlant
from .signals import DEFAULT_DT, TimeSeries
from .surrogate import RsmModel, rsm_predict
from .sysid import FirstOrderDelayModel

__all__ = [
    "PidGains",
    "PidState",
    "pid_step",
    "LoopConfig",
    "ClosedLoopTrace",
    "LinearLoopModel",
    "linearize_f2",
    "invert_f2_for_signature_setpoint",
    "step_response_quality",
    "tune_pid",
    "run_closed_loop",
    "compare_scenarios",
    "write_trace_csv",
    "loop_config_to_dict",
    "loop_config_from_dict",
    "gains_to_dict",
    "gains_from_dict",
]


@dataclass(frozen=True)
class PidGains:
    """Parallel-form gains: u = kp*e + ki*int(e) + kd*de/dt."""

    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        vals = (self.kp, self.ki, self.kd)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("gains must be finite")
        if any(v < 0 for v in vals):
            raise ValueError("this loop uses non-negative gains")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = None
    filtered_meas: float = None


def pid_step(state: PidState, setpoint: float, measurement: float,
             gains: PidGains, dt: float,
             limits: tuple = None) -> tuple[PidState, float]:
    """One controller update; returns the new state and the clamped command.

    The integral uses the trapezoid rule; the derivative acts on the
    measurement after a first-order filter with time constant
    ``max(kd/10, dt)``.  When the command saturates, the integrator keeps
    its previous value (anti-windup), so releasing the clamp never has to
    unwind accumulated area.
    """
    if not (dt > 0):
        raise ValueError("dt must be positive")
    if not (math.isfinite(setpoint) and math.isfinite(measurement)):
        raise ValueError("setpoint and measurement must be finite")
    error = setpoint - measurement

    prev_error = state.prev_error if state.prev_error is not None else error
    integral_candidate = state.integral + gains.ki * dt * (error + prev_error) / 2.0

    if state.filtered_meas is None:
        filtered = measurement
        derivative = 0.0
    else:
        # filter constant is a tenth of the derivative TIME kd/kp (the
        # classical N = 10 rule), floored at one sample; using the raw kd
        # value would give multi-second filters at this loop's gain scale
        td_deriv = gains.kd / gains.kp if gains.kp > 0 else gains.kd
        tf = max(td_deriv / 10.0, dt)
        alpha = dt / (tf + dt)
        filtered = state.filtered_meas + alpha * (measurement - state.filtered_meas)
        derivative = (filtered - state.filtered_meas) / dt

    u = gains.kp * error + integral_candidate - gains.kd * derivative
    clamped = u
    integral = integral_candidate
    if limits is not None:
        lo, hi = limits
        clamped = min(max(u, lo), hi)
        # freeze the integrator only while it would push further into the
        # saturated side; integration back toward the valid range must stay
        # alive because the steady command bias lives in the integrator
        pushing_deeper = ((u > hi and error > 0.0) or (u < lo and error < 0.0))
        if pushing_deeper:
            integral = state.integral
    new_state = PidState(integral=integral, prev_error=error,
                         filtered_meas=filtered)
    return new_state, clamped


# --- linearization and tuning ---------------------------------------------

def linearize_f2(f2: RsmModel, operating_point) -> dict:
    """Local gains of the surrogate at one feature point.

    Central differences with step 1e-4 on the normalized scale of each
    feature.  The result carries the partial derivative per feature name
    and an ``extrapolated`` flag when the point leaves the training range.
    """
    x = np.asarray(operating_point, dtype=float)
    if x.size != len(f2.feature_names):
        raise ValueError(f"operating point needs {len(f2.feature_names)} entries")
    lo = np.asarray(f2.normalizer.lo)
    hi = np.asarray(f2.normalizer.hi)
    span = np.where(hi > lo, hi - lo, 1.0)
    gradients = {}
    for j, name in enumerate(f2.feature_names):
        h = 1e-4 * span[j]
        up = x.copy()
        dn = x.copy()
        up[j] += h
        dn[j] -= h
        gradients[name] = (rsm_predict(f2, up) - rsm_predict(f2, dn)) / (2 * h)
    return {"gradients": gradients,
            "extrapolated": not f2.normalizer.in_range(x)}


def invert_f2_for_signature_setpoint(f2: RsmModel, target_bw: float,
                                     fixed: dict) -> float:
    """Pool-width value the surrogate maps to ``target_bw``.

    Bisection over the surrogate's trained pool-width range with the other
    features held at ``fixed``.  Used by the optional translated-setpoint
    mode of the signature-controlled scenario.
    """
    names = f2.feature_names
    j = names.index("mpw")
    lo, hi = f2.normalizer.lo[j], f2.normalizer.hi[j]

    def predict(mpw):
        x = [fixed.get(nm, 0.0) if nm != "mpw" else mpw for nm in names]
        return rsm_predict(f2, x)

    f_lo, f_hi = predict(lo) - target_bw, predict(hi) - target_bw
    if f_lo * f_hi > 0:
        raise ValueError("target bead width is outside the surrogate's "
                         "pool-width range at this operating point")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        f_mid = predict(mid) - target_bw
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class LinearLoopModel:
    """Linearized open loop: process dynamics times the local output gain."""

    process: FirstOrderDelayModel
    output_gain: float = 1.0
    dt: float = DEFAULT_DT


def step_response_quality(model: LinearLoopModel, gains: PidGains,
                          horizon_s: float = 4.0) -> dict:
    """Overshoot and 10-90% rise time of the closed-loop unit step."""
    dt = model.dt
    n = int(round(horizon_s / dt))
    a = math.exp(-dt / model.process.tw)
    b = (1.0 - a) * model.process.k_gain * model.output_gain
    d = int(round(model.process.td / dt))
    u_hist = [0.0] * (d + 1)
    x = 0.0
    y = np.empty(n)
    state = PidState()
    u = 0.0
    for k in range(n):
        y[k] = x
        if not math.isfinite(y[k]) or abs(y[k]) > 50.0:
            return {"stable": False, "overshoot_pct": float("inf"),
                    "rise_time_s": float("inf")}
        state, u = pid_step(state, 1.0, y[k], gains, dt)
        u_hist.append(u)
        x = a * x + b * u_hist.pop(0)
    if not np.all(np.isfinite(y)):
        return {"stable": False, "overshoot_pct": float("inf"),
                "rise_time_s": float("inf")}
    overshoot = max(0.0, float(y.max()) - 1.0) * 100.0
    settled = abs(y[-1] - 1.0) < 0.05
    rise = _rise_time(y, dt)
    return {"stable": bool(settled and rise is not None),
            "overshoot_pct": overshoot,
            "rise_time_s": rise if rise is not None else float("inf")}


def _rise_time(y: np.ndarray, dt: float):
    def crossing(level):
        idx = np.flatnonzero(y >= level)
        if idx.size == 0:
            return None
        k = idx[0]
        if k == 0:
            return 0.0
        frac = (level - y[k - 1]) / (y[k] - y[k - 1])
        return (k - 1 + frac) * dt
    t10 = crossing(0.1)
    t90 = crossing(0.9)
    if t10 is None or t90 is None:
        return None
    return t90 - t10


def tune_pid(model: LinearLoopModel, objective_weights: tuple = (1.0, 10.0), *,
             extra_starts: list = None,
             horizon_s: float = 4.0) -> tuple[PidGains, dict]:
    """Minimize weighted overshoot plus rise time of the unit-step response.

    Derivative-free simplex from five internal-model starting points (plus
    any caller-supplied gain sets, which the result therefore never loses
    to).  Raises :class:`TuningError` when no start yields a stable loop.
    """
    w_os, w_rt = objective_weights
    k_loop = model.process.k_gain * model.output_gain
    if k_loop == 0:
        raise TuningError("loop static gain is zero; nothing to tune")
    tw, td, dt = model.process.tw, model.process.td, model.dt

    def objective(x):
        gains = PidGains(kp=abs(x[0]), ki=abs(x[1]), kd=abs(x[2]))
        q = step_response_quality(model, gains, horizon_s)
        if not q["stable"]:
            return 1e9
        return w_os * q["overshoot_pct"] + w_rt * q["rise_time_s"]

    starts = []
    for factor in (0.3, 0.8, 2.0, 5.0, 12.0):
        lam = factor * (td + dt)
        kp = tw / (k_loop * (lam + td))
        starts.append(PidGains(kp=kp, ki=kp / tw, kd=0.0))
    for g in extra_starts or []:
        starts.append(g)

    best = (np.inf, None)
    for g in starts:
        res = minimize(objective, [g.kp, g.ki, g.kd], method="Nelder-Mead",
                       options={"maxfev": 250, "xatol": 1e-6, "fatol": 1e-6})
        if res.fun < best[0]:
            best = (float(res.fun), PidGains(kp=abs(float(res.x[0])),
                                             ki=abs(float(res.x[1])),
                                             kd=abs(float(res.x[2]))))
    if best[1] is None or best[0] >= 1e9:
        raise TuningError("no starting point produced a stable closed loop")
    gains = best[1]
    quality = step_response_quality(model, gains, horizon_s)
    report = {"objective": best[0], "overshoot_pct": quality["overshoot_pct"],
              "rise_time_s": quality["rise_time_s"],
              "weights": {"overshoot_per_pct": w_os, "rise_time_per_s": w_rt},
              "starts_tried": len(starts)}
    return gains, report


# --- closed loop -----------------------------------------------------------

@dataclass(frozen=True)
class LoopConfig:
    """Timing, setpoints, and actuator limits of one closed-loop run."""

    scenario: str = "property"        # "property" or "signature"
    setpoints: tuple = ((1.0, 5.0), (6.0, 4.7))   # (start s, value mm)
    duration: float = 11.0
    seconds_per_layer: float = 2.0
    print_start: float = 1.0
    layers: int = 5
    lp_min: float = 2000.0
    lp_max: float = 4000.0
    lp_init: float = 2800.0
    ts: float = 10.0
    dt: float = DEFAULT_DT
    signature_setpoint_mode: str = "direct"   # or "inverted"

    def __post_init__(self):
        if self.scenario not in ("property", "signature"):
            raise ValueError("scenario must be 'property' or 'signature'")
        if self.signature_setpoint_mode not in ("direct", "inverted"):
            raise ValueError("signature_setpoint_mode must be 'direct' or 'inverted'")
        times = [t for t, _ in self.setpoints]
        if not times or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("setpoint times must be strictly increasing")
        if not (self.duration > self.print_start):
            raise ValueError("duration must exceed print_start")
        if not (self.lp_min < self.lp_max):
            raise ValueError("actuator limits must satisfy lp_min < lp_max")
        object.__setattr__(self, "setpoints",
                           tuple((float(t), float(v)) for t, v in self.setpoints))

    def layer_at(self, t: float) -> float:
        if t < self.print_start:
            return 1.0
        n = 1 + math.floor((t - self.print_start) / self.seconds_per_layer)
        return float(min(max(n, 1), self.layers))

    def setpoint_at(self, t: float) -> float:
        value = self.setpoints[0][1]
        for start, v in self.setpoints:
            if t >= start:
                value = v
        return value


@dataclass(frozen=True)
class ClosedLoopTrace:
    scenario: str
    setpoint: TimeSeries
    controlled: TimeSeries
    mpw: TimeSeries
    bw_pred: TimeSeries
    lp: TimeSeries
    layer: TimeSeries
    error: TimeSeries


def _feature_vector(f2: RsmModel, mpw: float, mpl: float, n: float):
    values = {"mpw": mpw, "mpl": mpl, "n": n}
    try:
        return [values[name] for name in f2.feature_names]
    except KeyError as exc:
        raise ValueError(f"surrogate uses unsupported feature {exc}") from None


def run_closed_loop(cfg: LoopConfig, plant, f2: RsmModel,
                    gains: PidGains) -> ClosedLoopTrace:
    """Simulate one scenario and record every loop channel.

    ``plant`` is a :class:`~dedtwin.plant.PlantConfig` (a fresh plant is
    built and pre-settled at the initial command) or an already prepared
    :class:`~dedtwin.plant.VirtualPlant`.  The measurement the controller
    sees at sample k reflects commands through k-1, so the loop has the
    usual one-sample computation delay.
    """
    if isinstance(plant, PlantConfig):
        plant = VirtualPlant(plant)
        plant.start_at_steady_state(min(max(cfg.lp_init, cfg.lp_min), cfg.lp_max),
                                    cfg.ts, layer=1.0)
    elif not isinstance(plant, VirtualPlant):
        raise TypeError("plant must be a PlantConfig or VirtualPlant")

    translate = None
    if cfg.scenario == "signature" and cfg.signature_setpoint_mode == "inverted":
        names = f2.feature_names
        mid = {nm: 0.5 * (f2.normalizer.lo[i] + f2.normalizer.hi[i])
               for i, nm in enumerate(names)}
        translate = {v: invert_f2_for_signature_setpoint(
            f2, v, {**mid, "n": 1.0}) for _, v in cfg.setpoints}

    n_steps = int(round(cfg.duration / cfg.dt)) + 1
    limits = (cfg.lp_min, cfg.lp_max)
    u = min(max(cfg.lp_init, cfg.lp_min), cfg.lp_max)
    # bumpless start: the integrator carries the absolute power bias, so it
    # begins at the initial command rather than at zero
    state = PidState(integral=float(u))
    cols = {name: np.empty(n_steps) for name in
            ("setpoint", "controlled", "mpw", "bw_pred", "lp", "layer", "error")}
    for k in range(n_steps):
        t = k * cfg.dt
        n_layer = cfg.layer_at(t)
        target = cfg.setpoint_at(t)
        out = plant.step(u, ts=cfg.ts, layer=n_layer)
        bw_pred = rsm_predict(f2, _feature_vector(f2, out["mpw"], out["mpl"],
                                                  n_layer))
        if cfg.scenario == "property":
            controlled = bw_pred
            sp = target
        else:
            controlled = out["mpw"]
            sp = translate[target] if translate else target
        cols["setpoint"][k] = sp
        cols["controlled"][k] = controlled
        cols["mpw"][k] = out["mpw"]
        cols["bw_pred"][k] = bw_pred
        cols["lp"][k] = u
        cols["layer"][k] = n_layer
        cols["error"][k] = sp - controlled
        state, u = pid_step(state, sp, controlled, gains, cfg.dt, limits)
    mk = lambda name, unit: TimeSeries(0.0, cfg.dt, cols[name], unit)
    return ClosedLoopTrace(
        scenario=cfg.scenario,
        setpoint=mk("setpoint", "mm"), controlled=mk("controlled", "mm"),
        mpw=mk("mpw", "mm"), bw_pred=mk("bw_pred", "mm"), lp=mk("lp", "W"),
        layer=mk("layer", ""), error=mk("error", "mm"))


def _windows(cfg: LoopConfig):
    starts = [t for t, _ in cfg.setpoints] + [cfg.duration]
    return [(starts[i], starts[i + 1], cfg.setpoints[i][1])
            for i in range(len(cfg.setpoints))]


def window_bw_errors(cfg: LoopConfig, trace: ClosedLoopTrace,
                     tail_s: float = 0.5) -> list[dict]:
    """Mean absolute bead-width miss over the last ``tail_s`` of each window."""
    t = trace.bw_pred.times
    rows = []
    for start, end, desired in _windows(cfg):
        mask = (t >= max(end - tail_s, start)) & (t < end + 1e-9)
        bw = trace.bw_pred.values[mask]
        tracking = trace.error.values[mask]
        rows.append({
            "window_start_s": start, "window_end_s": end, "desired_mm": desired,
            "mean_abs_bw_error_mm": float(np.mean(np.abs(bw - desired))),
            "mean_abs_tracking_error_mm": float(np.mean(np.abs(tracking))),
        })
    return rows


def compare_scenarios(cfg: LoopConfig, plant_config: PlantConfig,
                      f2: RsmModel, gains_property: PidGains,
                      gains_signature: PidGains) -> dict:
    """Run both scenarios on identically seeded plants and tabulate misses."""
    cfg_prop = replace(cfg, scenario="property")
    cfg_sig = replace(cfg, scenario="signature")
    trace_prop = run_closed_loop(cfg_prop, plant_config, f2, gains_property)
    trace_sig = run_closed_loop(cfg_sig, plant_config, f2, gains_signature)
    report = {
        "seed": plant_config.seed,
        "scenarios": [
            {"name": "property", "gains": gains_to_dict(gains_property),
             "windows": window_bw_errors(cfg_prop, trace_prop)},
            {"name": "signature", "gains": gains_to_dict(gains_signature),
             "windows": window_bw_errors(cfg_sig, trace_sig)},
        ],
    }
    prop_w = report["scenarios"][0]["windows"]
    sig_w = report["scenarios"][1]["windows"]
    report["signature_worse_in_every_window"] = bool(all(
        s["mean_abs_bw_error_mm"] > p["mean_abs_bw_error_mm"]
        for p, s in zip(prop_w, sig_w)))
    return report, trace_prop, trace_sig


# --- interchange ------------------------------------------------------------

TRACE_HEADER = "t,setpoint,controlled,mpw[mm],bw[mm],lp[W],n,error"


def write_trace_csv(path, trace: ClosedLoopTrace) -> None:
    cols = [trace.setpoint, trace.controlled, trace.mpw, trace.bw_pred,
            trace.lp, trace.layer, trace.error]
    times = trace.setpoint.times
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for k in range(len(trace.setpoint)):
            row = [repr(float(times[k]))]
            row += [repr(float(c.values[k])) for c in cols]
            fh.write(",".join(row) + "\n")


def loop_config_to_dict(cfg: LoopConfig) -> dict:
    return {
        "scenario": cfg.scenario,
        "setpoints": [[t, v] for t, v in cfg.setpoints],
        "duration": cfg.duration,
        "seconds_per_layer": cfg.seconds_per_layer,
        "print_start": cfg.print_start,
        "layers": cfg.layers,
        "lp_min": cfg.lp_min, "lp_max": cfg.lp_max, "lp_init": cfg.lp_init,
        "ts": cfg.ts, "dt": cfg.dt,
        "signature_setpoint_mode": cfg.signature_setpoint_mode,
    }


def loop_config_from_dict(doc: dict) -> LoopConfig:
    doc = dict(doc)
    if "setpoints" in doc:
        doc["setpoints"] = tuple((float(t), float(v)) for t, v in doc["setpoints"])
    known = set(LoopConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown loop config fields: {sorted(unknown)}")
    return LoopConfig(**doc)


def gains_to_dict(g: PidGains) -> dict:
    return {"kp": g.kp, "ki": g.ki, "kd": g.kd}


def gains_from_dict(doc: dict) -> PidGains:
    return PidGains(kp=float(doc["kp"]), ki=float(doc["ki"]), kd=float(doc["kd"]))
