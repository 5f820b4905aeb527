"""Session-scoped artifacts shared by the control and acceptance suites."""

import numpy as np
import pytest

from dedtwin.control import LinearLoopModel, PidGains, linearize_f2, tune_pid
from dedtwin.plant import (
    ExperimentProtocol,
    PlantConfig,
    Segment,
    concat_datasets,
    make_f2_training_set,
    run_open_loop,
)
from dedtwin.surrogate import rsm_fit

# gain sets used as regression anchors and extra tuning starts
ANCHOR_GAINS_1 = PidGains(kp=985.20, ki=3996.6, kd=19.250)
ANCHOR_GAINS_2 = PidGains(kp=1539.0, ki=5711.4, kd=31.092)

ZERO_NOISE = {k: 0.0 for k in ("mpw", "mpl", "mpt", "bw", "mpl_drift")}


def table1_wall_protocol(layers=5):
    """Power-stepped wall: 40 mm segments at 2800/3200/2800 W."""
    return ExperimentProtocol(segments=(
        Segment(lp=2800, ts=10, ep=100, wfs=2, length_mm=40),
        Segment(lp=3200, ts=10, ep=100, wfs=2, length_mm=40),
        Segment(lp=2800, ts=10, ep=100, wfs=2, length_mm=40)), layers=layers)


def control_wall_protocol():
    """Wall spanning the power band the closed loop operates in."""
    return ExperimentProtocol(segments=(
        Segment(lp=2000, ts=10, ep=100, wfs=2, duration_s=3.0),
        Segment(lp=2800, ts=10, ep=100, wfs=2, duration_s=3.0),
        Segment(lp=2400, ts=10, ep=100, wfs=2, duration_s=3.0),
        Segment(lp=2000, ts=10, ep=100, wfs=2, duration_s=3.0)), layers=5)


@pytest.fixture(scope="session")
def two_wall_dataset():
    """Roughly 4,000 rows from two power-stepped five-layer walls."""
    proto = table1_wall_protocol()
    parts = [make_f2_training_set(run_open_loop(PlantConfig(seed=s), proto))
             for s in (1, 2)]
    return concat_datasets(parts)


@pytest.fixture(scope="session")
def wall_record():
    """Single power-stepped wall record (uniform timeline, seed 1)."""
    return run_open_loop(PlantConfig(seed=1), table1_wall_protocol())


@pytest.fixture(scope="session")
def loop_rsm():
    """Pool-signature response surface trained over the control band."""
    rec = run_open_loop(PlantConfig(seed=5), control_wall_protocol())
    d = make_f2_training_set(rec).select(("mpw", "mpl", "n"))
    model, metrics = rsm_fit(d, seed=0)
    return model, metrics


@pytest.fixture(scope="session")
def tuned_loop(loop_rsm):
    """Linearized loop model and tuned gains for the default plant."""
    f2, _ = loop_rsm
    grad = linearize_f2(f2, [5.5, 4.5, 1.0])
    model = LinearLoopModel(process=PlantConfig().true_g_lp,
                            output_gain=grad["gradients"]["mpw"])
    gains, report = tune_pid(model, extra_starts=[ANCHOR_GAINS_1, ANCHOR_GAINS_2])
    return model, gains, report
