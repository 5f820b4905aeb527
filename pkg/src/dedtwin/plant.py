"""Virtual deposition process used as ground truth throughout the suite.

The plant realizes the qualitative behaviors seen on the physical cell:
laser power drives the melt-pool width through a first-order lag with dead
time, each added layer shrinks the pool by a fixed amount, travel speed
acts as a slower inverse disturbance, and wire feed speed and preheat
power have no effect on the pool at all (the wire feeder's conductance
controller absorbs them).  Pool temperature climbs with the layer count
and follows power with a slow thermal lag; pool length is an affine
function of that temperature plus its own slow wander.  The pyrometer
clips below its floor: readings that would fall under it are emitted as
the invalid marker 0.

The bead width is a latent channel: a lagged copy of the true pool width
plus pool-length and layer terms.  It is what a 3D scan of the finished
part would measure, so it is available in generated records for training
but is never fed back by the "signature only" control scenario.  All the
magnitudes here are desk-scale defaults chosen so the bead width
correlates strongly with the pool width without being identical to it;
only the layer gain of -0.11 mm per layer is carried over from the
physical process identification.

Noise is per-channel Gaussian from counter-based streams (Philox), keyed
by the seed and the channel index, so records are bit-reproducible and
stepwise simulation matches batch generation exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDatasetError
from .signals import DEFAULT_DT, DEFAULT_SMOOTH_WINDOW, TimeSeries, moving_average
from .surrogate import Dataset
from .sysid import FirstOrderDelayModel

_NOISE_CHANNELS = ("mpw", "mpl", "mpt", "bw", "mpl_drift")

__all__ = [
    "PlantConfig",
    "Segment",
    "ExperimentProtocol",
    "ExperimentRecord",
    "VirtualPlant",
    "run_open_loop",
    "make_f2_training_set",
    "concat_datasets",
    "write_record_csv",
    "read_record_csv",
    "protocol_to_dict",
    "protocol_from_dict",
    "config_to_dict",
    "config_from_dict",
]


def _default_noise() -> dict:
    return {"mpw": 0.01, "mpl": 0.03, "mpt": 4.0, "bw": 0.01, "mpl_drift": 1.3}


@dataclass(frozen=True)
class PlantConfig:
    """Ground-truth parameters of the virtual process."""

    # power -> pool width dynamics, and the per-layer shrink
    true_g_lp: FirstOrderDelayModel = FirstOrderDelayModel(
        k_gain=2.5e-3, tw=0.3, td=0.06)
    true_g_n: float = -0.11           # mm per layer
    # travel speed enters as a slower, longer-delay inverse disturbance
    ts_gain: float = -0.10            # mm per (mm/s) above the reference
    ts_tw: float = 0.9
    ts_td: float = 0.30
    ts_ref: float = 10.0              # mm/s
    lp_on_threshold: float = 100.0    # W below which there is no pool
    # pool temperature: base at layer 1, per-layer climb, slow power lag
    mpt_base: float = 1500.0          # degC
    mpt_layer_inc: float = 250.0      # degC per layer
    mpt_lp_gain: float = 0.5          # degC per W of power deviation
    mpt_lp_tw: float = 1.2            # s
    lp_ref: float = 3000.0            # W
    pyrometer_floor: float = 500.0    # degC; lower readings are invalid (0)
    # pool length, affine in the pool temperature plus its own slow wander
    mpl_offset: float = 2.0           # mm
    mpl_per_degc: float = 0.002       # mm per degC
    mpl_drift_tau: float = 1.0        # s
    # latent bead width: lagged pool width plus length and layer terms
    bw_lag_s: float = 0.1
    bw_mpl_weight: float = 0.15
    bw_mpl_ref: float = 5.0           # mm
    bw_layer_weight: float = -0.05    # mm per layer beyond the first
    bw_offset: float = -0.45          # mm, pool-to-bead shrinkage
    noise_std: dict = field(default_factory=_default_noise)
    seed: int = 0
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        noise = dict(_default_noise())
        noise.update(self.noise_std or {})
        bad = [k for k, v in noise.items() if v < 0]
        if bad:
            raise ValueError(f"noise std must be non-negative: {bad}")
        object.__setattr__(self, "noise_std", noise)


@dataclass(frozen=True)
class Segment:
    """One stretch of constant commands; sized by length or by duration."""

    lp: float                  # W
    ts: float                  # mm/s
    ep: float                  # W
    wfs: float                 # m/min
    length_mm: float = None
    duration_s: float = None

    def duration(self) -> float:
        if self.duration_s is not None:
            return float(self.duration_s)
        if self.length_mm is None:
            raise ValueError("segment needs either length_mm or duration_s")
        if not (self.ts > 0):
            raise ValueError("length-based segment needs a positive travel speed")
        return float(self.length_mm) / float(self.ts)


@dataclass(frozen=True)
class ExperimentProtocol:
    """Per-layer command schedule, repeated for every layer of the part."""

    segments: tuple
    layers: int = 1
    interlayer_dwell_s: float = 0.0   # laser-off gap between layers

    def __post_init__(self):
        if not self.segments:
            raise ValueError("protocol needs at least one segment")
        if self.layers < 1:
            raise ValueError("layer count must be at least 1")
        if self.interlayer_dwell_s < 0:
            raise ValueError("dwell must be non-negative")
        object.__setattr__(self, "segments", tuple(self.segments))
        for seg in self.segments:
            if seg.duration() <= 0:
                raise ValueError("segments must have positive duration")

    def seconds_per_layer(self) -> float:
        return sum(seg.duration() for seg in self.segments)


@dataclass(frozen=True)
class ExperimentRecord:
    """All channels of one virtual print, on a shared uniform grid."""

    lp: TimeSeries
    ts: TimeSeries
    ep: TimeSeries
    wfs: TimeSeries
    mpw: TimeSeries
    mpl: TimeSeries
    mpt: TimeSeries
    layer: TimeSeries
    bw: TimeSeries

    def __post_init__(self):
        ref = self.lp
        for name in ("ts", "ep", "wfs", "mpw", "mpl", "mpt", "layer", "bw"):
            s = getattr(self, name)
            if (len(s) != len(ref) or s.t0 != ref.t0 or s.dt != ref.dt):
                raise ValueError(f"channel {name} is not synchronized")

    def __len__(self):
        return len(self.lp)


class _ExpLag:
    """One-pole lag with gain under zero-order hold.

    The state IS the output: reading ``x`` gives the response to inputs up
    to the previous sample, and :meth:`advance` folds in the current one.
    The drive coefficient is precomputed exactly as the batch simulation's
    filter does, so stepwise and batch runs agree bit for bit.
    """

    def __init__(self, tw: float, dt: float, gain: float = 1.0, x0: float = 0.0):
        self.alpha = math.exp(-dt / tw)
        self.beta = (1.0 - self.alpha) * gain
        self.gain = gain
        self.x = x0

    def advance(self, u: float) -> None:
        self.x = self.beta * u + self.alpha * self.x


class VirtualPlant:
    """Stepwise form of the process; one caller advances it at a time."""

    def __init__(self, config: PlantConfig):
        self.config = config
        c = config
        self._d_lp = int(round(c.true_g_lp.td / c.dt))
        self._d_ts = int(round(c.ts_td / c.dt))
        self._lag_lp = _ExpLag(c.true_g_lp.tw, c.dt, gain=c.true_g_lp.k_gain)
        self._lag_ts = _ExpLag(c.ts_tw, c.dt, gain=c.ts_gain)
        self._lag_mpt = _ExpLag(c.mpt_lp_tw, c.dt, gain=c.mpt_lp_gain)
        self._lag_bw = _ExpLag(c.bw_lag_s, c.dt)
        self._lp_queue = [0.0] * self._d_lp
        self._ts_queue = [c.ts_ref] * self._d_ts
        self._drift = 0.0
        a = math.exp(-c.dt / c.mpl_drift_tau)
        self._drift_alpha = a
        self._drift_step_std = c.noise_std["mpl_drift"] * math.sqrt(1.0 - a * a)
        self._rng = {
            ch: np.random.Generator(np.random.Philox(
                key=np.array([np.uint64(c.seed), np.uint64(i)], dtype=np.uint64)))
            for i, ch in enumerate(_NOISE_CHANNELS)
        }

    def start_at_steady_state(self, lp: float, ts: float = None,
                              layer: float = 1.0) -> None:
        """Pre-settle every lag as if the commands had been held forever."""
        c = self.config
        ts = c.ts_ref if ts is None else ts
        lp_drive = lp if lp >= c.lp_on_threshold else 0.0
        self._lag_lp.x = c.true_g_lp.k_gain * lp_drive
        self._lag_ts.x = c.ts_gain * (ts - c.ts_ref)
        self._lag_mpt.x = c.mpt_lp_gain * (lp_drive - c.lp_ref)
        self._lp_queue = [lp_drive] * self._d_lp
        self._ts_queue = [ts] * self._d_ts
        mpw_true = self._lag_lp.x + self._lag_ts.x + c.true_g_n * layer
        self._lag_bw.x = mpw_true

    def step(self, lp: float, *, ts: float = None, ep: float = 0.0,
             wfs: float = 0.0, layer: float = 1.0) -> dict:
        """Advance one sample; returns the measured channels plus latent bw.

        Outputs reflect commands up to the previous sample (every lag emits
        its state before folding in the current command), matching the
        strictly causal batch simulations.  ``ep`` and ``wfs`` are accepted
        and recorded by callers but do not enter the dynamics at all.
        """
        if not (math.isfinite(lp) and (ts is None or math.isfinite(ts))):
            raise ValueError("commands must be finite")
        c = self.config
        ts = c.ts_ref if ts is None else ts
        pool_on = lp >= c.lp_on_threshold

        mpw_true = self._lag_lp.x + self._lag_ts.x + c.true_g_n * layer
        mpt_true = c.mpt_base + c.mpt_layer_inc * (layer - 1.0) + self._lag_mpt.x

        self._drift = (self._drift_alpha * self._drift
                       + self._drift_step_std * self._rng["mpl_drift"].normal())
        mpl_true = c.mpl_offset + c.mpl_per_degc * mpt_true + self._drift

        bw_true = (self._lag_bw.x
                   + c.bw_mpl_weight * (mpl_true - c.bw_mpl_ref)
                   + c.bw_layer_weight * (layer - 1.0) + c.bw_offset)

        noise = {ch: self._rng[ch].normal() for ch in ("mpw", "mpl", "mpt", "bw")}
        if pool_on:
            mpw = mpw_true + c.noise_std["mpw"] * noise["mpw"]
            mpl = mpl_true + c.noise_std["mpl"] * noise["mpl"]
            mpt_read = mpt_true + c.noise_std["mpt"] * noise["mpt"]
            mpt = mpt_read if mpt_read >= c.pyrometer_floor else 0.0
        else:
            mpw = 0.0
            mpl = 0.0
            mpt = 0.0
        bw = bw_true + c.noise_std["bw"] * noise["bw"]

        # fold the current commands in for the next sample; while the laser
        # is off the process clock stops (deposition states hold), so a
        # dwell is a pure gap and concatenating the non-zero data recovers a
        # seamless record
        if pool_on:
            if self._d_lp > 0:
                self._lp_queue.append(lp)
                lp_eff = self._lp_queue.pop(0)
            else:
                lp_eff = lp
            if self._d_ts > 0:
                self._ts_queue.append(ts)
                ts_eff = self._ts_queue.pop(0)
            else:
                ts_eff = ts
            self._lag_lp.advance(lp_eff)
            self._lag_ts.advance(ts_eff - c.ts_ref)
            self._lag_mpt.advance(lp - c.lp_ref)
            self._lag_bw.advance(mpw_true)
        return {"mpw": mpw, "mpl": mpl, "mpt": mpt, "bw": bw,
                "mpw_true": mpw_true}


def _command_arrays(proto: ExperimentProtocol, dt: float):
    lp, ts, ep, wfs, layer = [], [], [], [], []
    dwell_steps = int(round(proto.interlayer_dwell_s / dt))
    for n in range(1, proto.layers + 1):
        for seg in proto.segments:
            steps = int(round(seg.duration() / dt))
            lp += [seg.lp] * steps
            ts += [seg.ts] * steps
            ep += [seg.ep] * steps
            wfs += [seg.wfs] * steps
            layer += [float(n)] * steps
        if dwell_steps and n < proto.layers:
            lp += [0.0] * dwell_steps
            ts += [0.0] * dwell_steps
            ep += [0.0] * dwell_steps
            wfs += [0.0] * dwell_steps
            layer += [float(n)] * dwell_steps
    return (np.array(lp), np.array(ts), np.array(ep), np.array(wfs),
            np.array(layer))


def run_open_loop(config: PlantConfig, proto: ExperimentProtocol, *,
                  start: str = "steady") -> ExperimentRecord:
    """Print the protocol on a fresh plant and record every channel.

    The record is produced by stepping :class:`VirtualPlant` sample by
    sample, so identical command sequences fed through
    :meth:`VirtualPlant.step` reproduce it bit for bit.  By default the
    plant is pre-settled at the first segment's commands (the pool
    establishes far faster than it responds to command changes);
    ``start="rest"`` begins from zero states instead, which is the exact
    counterpart of the batch transfer-function simulations.
    """
    if start not in ("steady", "rest"):
        raise ValueError("start must be 'steady' or 'rest'")
    plant = VirtualPlant(config)
    lp, ts, ep, wfs, layer = _command_arrays(proto, config.dt)
    if start == "steady":
        first = proto.segments[0]
        plant.start_at_steady_state(first.lp, first.ts, layer=1.0)
    n = lp.size
    mpw = np.empty(n)
    mpl = np.empty(n)
    mpt = np.empty(n)
    bw = np.empty(n)
    for k in range(n):
        out = plant.step(lp[k], ts=ts[k], ep=ep[k], wfs=wfs[k], layer=layer[k])
        mpw[k] = out["mpw"]
        mpl[k] = out["mpl"]
        mpt[k] = out["mpt"]
        bw[k] = out["bw"]
    dt = config.dt
    mk = lambda v, unit: TimeSeries(0.0, dt, v, unit)
    return ExperimentRecord(
        lp=mk(lp, "W"), ts=mk(ts, "mm_s"), ep=mk(ep, "W"), wfs=mk(wfs, "m_min"),
        mpw=mk(mpw, "mm"), mpl=mk(mpl, "mm"), mpt=mk(mpt, "C"),
        layer=mk(layer, ""), bw=mk(bw, "mm"))


def make_f2_training_set(record: ExperimentRecord, *,
                         smooth_window: int = DEFAULT_SMOOTH_WINDOW) -> Dataset:
    """Rows of (signatures, parameters, layer) -> bead width.

    Signature channels are smoothed with the centered eight-sample moving
    average before extraction; rows where the pyrometer reading is invalid
    (marker 0) are dropped.  The command channels ride along unfiltered so
    parameter-only models can train on the same rows.  Normalization and
    the log target transform are applied later, inside each surrogate's
    recorded envelope.
    """
    valid = record.mpt.values > 0.0
    if not np.any(valid):
        raise EmptyDatasetError(
            "no valid rows: pyrometer never reached its floor")
    mpw_f = moving_average(record.mpw, smooth_window).values[valid]
    mpl_f = moving_average(record.mpl, smooth_window).values[valid]
    mpt_f = moving_average(record.mpt, smooth_window).values[valid]
    X = np.column_stack([
        mpw_f, mpl_f, mpt_f,
        record.layer.values[valid],
        record.ts.values[valid],
        record.lp.values[valid],
    ])
    return Dataset(
        inputs=X, target=record.bw.values[valid],
        feature_names=("mpw", "mpl", "mpt", "n", "ts", "lp"),
        units=("mm", "mm", "C", "", "mm_s", "W"),
        time=record.lp.times[valid], dt=record.lp.dt)


def concat_datasets(parts) -> Dataset:
    """Stack datasets with identical columns; timestamps are dropped."""
    parts = list(parts)
    first = parts[0]
    for p in parts[1:]:
        if p.feature_names != first.feature_names:
            raise ValueError("datasets have different columns")
    return Dataset(np.vstack([p.inputs for p in parts]),
                   np.concatenate([p.target for p in parts]),
                   first.feature_names, first.units)


# --- interchange ----------------------------------------------------------

RECORD_HEADER = "t,lp[W],ts[mm_s],ep[W],wfs[m_min],mpw[mm],mpl[mm],mpt[C],n,bw[mm]"


def write_record_csv(path, record: ExperimentRecord) -> None:
    cols = [record.lp, record.ts, record.ep, record.wfs, record.mpw,
            record.mpl, record.mpt, record.layer, record.bw]
    times = record.lp.times
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(RECORD_HEADER + "\n")
        for k in range(len(record)):
            row = [repr(float(times[k]))]
            row += [repr(float(c.values[k])) for c in cols]
            fh.write(",".join(row) + "\n")


def read_record_csv(path) -> ExperimentRecord:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != RECORD_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if len(rows) < 2:
        raise ValueError(f"{path}: record needs at least 2 samples")
    data = np.array([[float(v) for v in r] for r in rows])
    t = data[:, 0]
    steps = np.diff(t)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError(f"{path}: time column is not uniform")
    t0 = float(t[0])
    units = ["W", "mm_s", "W", "m_min", "mm", "mm", "C", "", "mm"]
    series = [TimeSeries(t0, dt, data[:, i + 1], units[i]) for i in range(9)]
    return ExperimentRecord(*series)


def protocol_to_dict(proto: ExperimentProtocol) -> dict:
    segs = []
    for s in proto.segments:
        d = {"lp": s.lp, "ts": s.ts, "ep": s.ep, "wfs": s.wfs}
        if s.length_mm is not None:
            d["length_mm"] = s.length_mm
        if s.duration_s is not None:
            d["duration_s"] = s.duration_s
        segs.append(d)
    return {"segments": segs, "layers": proto.layers,
            "interlayer_dwell_s": proto.interlayer_dwell_s}


def protocol_from_dict(doc: dict) -> ExperimentProtocol:
    segments = []
    for i, s in enumerate(doc.get("segments", [])):
        missing = [k for k in ("lp", "ts", "ep", "wfs") if k not in s]
        if missing:
            raise ValueError(f"segment {i} is missing fields: {missing}")
        if "length_mm" not in s and "duration_s" not in s:
            raise ValueError(f"segment {i} needs length_mm or duration_s")
        segments.append(Segment(lp=s["lp"], ts=s["ts"], ep=s["ep"],
                                wfs=s["wfs"], length_mm=s.get("length_mm"),
                                duration_s=s.get("duration_s")))
    if not segments:
        raise ValueError("protocol has no segments")
    return ExperimentProtocol(segments=tuple(segments),
                              layers=int(doc.get("layers", 1)),
                              interlayer_dwell_s=float(
                                  doc.get("interlayer_dwell_s", 0.0)))


def config_to_dict(config: PlantConfig) -> dict:
    g = config.true_g_lp
    return {
        "true_g_lp": {"k_gain": g.k_gain, "tw": g.tw, "td": g.td},
        "true_g_n": config.true_g_n,
        "ts_gain": config.ts_gain, "ts_tw": config.ts_tw,
        "ts_td": config.ts_td, "ts_ref": config.ts_ref,
        "lp_on_threshold": config.lp_on_threshold,
        "mpt_base": config.mpt_base, "mpt_layer_inc": config.mpt_layer_inc,
        "mpt_lp_gain": config.mpt_lp_gain, "mpt_lp_tw": config.mpt_lp_tw,
        "lp_ref": config.lp_ref, "pyrometer_floor": config.pyrometer_floor,
        "mpl_offset": config.mpl_offset, "mpl_per_degc": config.mpl_per_degc,
        "mpl_drift_tau": config.mpl_drift_tau,
        "bw_lag_s": config.bw_lag_s, "bw_mpl_weight": config.bw_mpl_weight,
        "bw_mpl_ref": config.bw_mpl_ref,
        "bw_layer_weight": config.bw_layer_weight,
        "bw_offset": config.bw_offset,
        "noise_std": dict(config.noise_std),
        "seed": config.seed, "dt": config.dt,
    }


def config_from_dict(doc: dict) -> PlantConfig:
    doc = dict(doc)
    if "true_g_lp" in doc:
        doc["true_g_lp"] = FirstOrderDelayModel(**doc["true_g_lp"])
    known = set(PlantConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown plant config fields: {sorted(unknown)}")
    return PlantConfig(**doc)

