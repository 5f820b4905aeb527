"""Desk-scale digital twin of laser hot-wire directed energy deposition.

The package links adjustable process parameters (laser power, travel
speed, wire preheat, wire feed) to in-situ melt-pool signatures and on to
the final bead width: dynamic models of the parameter-to-signature path,
neural and polynomial surrogates for the signature-to-property path, a
synthetic process plant for generating data, melt-pool geometry extraction
from camera frames, and a PID loop that controls bead width either through
the full signature-to-property chain or through the melt-pool width alone.

Command line: ``dedtwin <generate|identify|train|control|vision>``.
"""

__version__ = "0.1.0"

from .signals import (  # noqa: F401
    TimeSeries,
    FitMetrics,
    moving_average,
    lowpass,
    resample_sync,
    remove_mean,
    normalize_minmax,
    log_transform,
    exp_transform,
    fit_metrics,
)
from .vision import (  # noqa: F401
    GrayImage,
    CropRect,
    MeltPoolGeometry,
    extract_geometry,
)
from .sysid import (  # noqa: F401
    FirstOrderDelayModel,
    SecondOrderDelayModel,
    ArxModel,
    HammersteinWienerModel,
    CompositeF1,
    simulate_first_order,
    simulate_composite_f1,
    fit_first_order,
    fit_second_order,
    fit_arx,
    fit_hammerstein_wiener,
    fit_composite_f1,
    compare_models,
    prepare_multilayer_data,
)
from .surrogate import (  # noqa: F401
    Dataset,
    MlpModel,
    RsmModel,
    TrainReport,
    LmConfig,
    split_dataset,
    mlp_forward,
    mlp_train_lm,
    rsm_fit,
    rsm_predict,
    f2_ablation,
    f3_vs_composed,
)
from .plant import (  # noqa: F401
    PlantConfig,
    Segment,
    ExperimentProtocol,
    ExperimentRecord,
    VirtualPlant,
    run_open_loop,
    make_f2_training_set,
)
from .control import (  # noqa: F401
    PidGains,
    PidState,
    pid_step,
    LoopConfig,
    ClosedLoopTrace,
    LinearLoopModel,
    linearize_f2,
    tune_pid,
    run_closed_loop,
    compare_scenarios,
)
