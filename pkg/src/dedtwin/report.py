"""Figure rendering for the command-line reports.

Every CLI command that writes delimited output can also drop a PNG next to
it: channel plots for generated records, measured-versus-model overlays
for identification, metric bars for the surrogate tables, and the four-row
loop plots (controlled variable, bead width, power command, layer count)
for the closed-loop runs.  Rendering is deliberately plain so the files
are small and byte-reproducible.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120

_STYLE = {
    "figure.facecolor": "white",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
}


def _save(fig, path):
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_record(record, path) -> None:
    """Stacked channel plot of one experiment record."""
    with plt.rc_context(_STYLE):
        channels = [("lp", "LP [W]"), ("mpw", "MPW [mm]"), ("mpl", "MPL [mm]"),
                    ("mpt", "MPT [C]"), ("layer", "layer")]
        fig, axes = plt.subplots(len(channels), 1, sharex=True,
                                 figsize=(8, 8))
        for ax, (name, label) in zip(axes, channels):
            s = getattr(record, name)
            ax.plot(s.times, s.values)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("t [s]")
        fig.align_ylabels(axes)
        _save(fig, path)


def render_prediction(times, measured, predicted, path, *,
                      title="", bf_percent=None, split_time=None) -> None:
    """Measured signal against the model's free-run prediction."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(times, measured, label="measured", alpha=0.7)
        ax.plot(times, predicted, label="model", linestyle="--")
        if split_time is not None:
            ax.axvline(split_time, color="gray", linestyle=":",
                       label="validation start")
        label = title
        if bf_percent is not None:
            label = f"{title} (BF {bf_percent:.1f}%)".strip()
        ax.set_title(label)
        ax.set_xlabel("t [s]")
        ax.legend()
        _save(fig, path)


def render_metric_bars(labels, r2_values, path, *, title="") -> None:
    """One bar per model row, by validation R-squared."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        x = np.arange(len(labels))
        ax.bar(x, r2_values, width=0.6)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=15, ha="right")
        ax.set_ylabel("validation R²")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def render_scatter(actual, predicted, path, *, title="") -> None:
    """Predicted-versus-actual scatter with the identity line."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.scatter(actual, predicted, s=4, alpha=0.4)
        lo = min(np.min(actual), np.min(predicted))
        hi = max(np.max(actual), np.max(predicted))
        ax.plot([lo, hi], [lo, hi], color="black", linewidth=0.8)
        ax.set_xlabel("measured bead width [mm]")
        ax.set_ylabel("predicted bead width [mm]")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def render_closed_loop(trace, path, *, title="") -> None:
    """Four-row loop plot: controlled vs set, bead width, power, layer."""
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(4, 1, sharex=True, figsize=(8, 9))
        t = trace.setpoint.times
        axes[0].plot(t, trace.controlled.values, label="controlled")
        axes[0].plot(t, trace.setpoint.values, "--", label="set value")
        axes[0].set_ylabel("controlled [mm]")
        axes[0].legend()
        axes[0].set_title(title)
        axes[1].plot(t, trace.bw_pred.values, label="bead width")
        axes[1].plot(t, trace.setpoint.values if trace.scenario == "property"
                     else _desired_curve(trace), "--", label="desired")
        axes[1].set_ylabel("bead width [mm]")
        axes[1].legend()
        axes[2].plot(t, trace.lp.values)
        axes[2].set_ylabel("LP [W]")
        axes[3].plot(t, trace.layer.values)
        axes[3].set_ylabel("layer")
        axes[3].set_xlabel("t [s]")
        fig.align_ylabels(axes)
        _save(fig, path)


def _desired_curve(trace):
    # in the signature scenario the setpoint channel is in pool-width units;
    # the desired bead width is the same numbers by the direct interpretation
    return trace.setpoint.values


def render_scenario_comparison(trace_property, trace_signature, path) -> None:
    """Side-by-side bead-width outcome of the two control arrangements."""
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 2, sharey=True, figsize=(10, 4))
        for ax, trace, name in ((axes[0], trace_property, "property loop"),
                                (axes[1], trace_signature, "signature loop")):
            t = trace.bw_pred.times
            ax.plot(t, trace.bw_pred.values, label="bead width")
            ax.plot(t, _desired_curve(trace), "--", label="desired")
            ax.set_title(name)
            ax.set_xlabel("t [s]")
            ax.legend()
        axes[0].set_ylabel("bead width [mm]")
        fig.tight_layout()
        _save(fig, path)


def render_vision_series(frame_indices, mpw, mpl, valid, path) -> None:
    """Per-frame pool geometry; invalid frames marked along the axis."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(8, 4))
        idx = np.asarray(frame_indices)
        valid = np.asarray(valid, dtype=bool)
        ax.plot(idx[valid], np.asarray(mpw)[valid], "o-", ms=3, label="MPW")
        ax.plot(idx[valid], np.asarray(mpl)[valid], "s-", ms=3, label="MPL")
        if np.any(~valid):
            ax.plot(idx[~valid], np.zeros(np.count_nonzero(~valid)), "x",
                    color="red", label="invalid")
        ax.set_xlabel("frame")
        ax.set_ylabel("diameter [mm]")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
