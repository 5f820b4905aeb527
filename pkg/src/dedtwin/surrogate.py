"""Signature-to-property surrogates for the bead width.

Two regressors share one envelope (per-feature min-max normalization on
the inputs, natural-log transform on the bead-width target):

* a fully connected network with six hidden layers of 8, 16, 32, 16, 8,
  and 4 units (rectifier on the first hidden layer, sigmoid on the rest,
  linear output), trained full-batch with Levenberg-Marquardt;
* a complete third-order polynomial response surface, solved by least
  squares, used where the trained network would make the closed loop too
  nonlinear to tune.

The ablation and model-comparison harnesses train several of these on
column subsets of one dataset and tabulate validation metrics side by
side.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

from .errors import EmptyDatasetError, TrainingError, UnidentifiableError
from .signals import FitMetrics, metrics_from_arrays

HIDDEN_UNITS = (8, 16, 32, 16, 8, 4)
HIDDEN_ACTIVATIONS = ("relu", "sigmoid", "sigmoid", "sigmoid", "sigmoid", "sigmoid")

__all__ = [
    "HIDDEN_UNITS",
    "HIDDEN_ACTIVATIONS",
    "Dataset",
    "Normalizer",
    "MlpModel",
    "RsmModel",
    "TrainReport",
    "LmConfig",
    "split_dataset",
    "mlp_forward",
    "mlp_forward_batch",
    "mlp_forward_flagged",
    "mlp_train_lm",
    "mlp_residuals_jacobian",
    "flatten_params",
    "with_params",
    "rsm_fit",
    "rsm_predict",
    "rsm_predict_batch",
    "f2_ablation",
    "f3_vs_composed",
    "save_surrogate",
    "load_surrogate",
    "read_dataset_csv",
    "write_dataset_csv",
]


# --- data ----------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus bead-width target, with named columns.

    ``time``/``dt`` are optional sample timestamps from the source record;
    they let series-based models line their simulations up with the rows.
    """

    inputs: np.ndarray
    target: np.ndarray
    feature_names: tuple
    units: tuple = None
    time: np.ndarray = None
    dt: float = None

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        t = np.asarray(self.target, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError("inputs must be a 2-D matrix")
        if X.shape[0] != t.size:
            raise ValueError("inputs and target row counts differ")
        if X.shape[0] < X.shape[1] + 1:
            raise ValueError("need at least one more row than feature columns")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
            raise ValueError("dataset entries must be finite")
        if np.any(t <= 0):
            bad = int(np.argmax(t <= 0))
            raise ValueError(f"bead-width target must be positive; row {bad} "
                             f"is {t[bad]!r}")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("one name per feature column required")
        units = self.units or tuple("" for _ in self.feature_names)
        if len(units) != X.shape[1]:
            raise ValueError("one unit per feature column required")
        X = X.copy()
        X.flags.writeable = False
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "units", tuple(units))
        if self.time is not None:
            tm = np.asarray(self.time, dtype=float).copy()
            tm.flags.writeable = False
            object.__setattr__(self, "time", tm)

    def __len__(self):
        return self.target.size

    def column(self, name: str) -> np.ndarray:
        return self.inputs[:, self.feature_names.index(name)]

    def select(self, names) -> "Dataset":
        """Column-subset view with the same rows, target, and timestamps."""
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(self.inputs[:, idx], self.target, tuple(names),
                       tuple(self.units[i] for i in idx), self.time, self.dt)

    def take(self, rows) -> "Dataset":
        tm = self.time[rows] if self.time is not None else None
        return Dataset(self.inputs[rows], self.target[rows],
                       self.feature_names, self.units, tm, self.dt)


def split_dataset(d: Dataset, train_fraction: float = 0.8,
                  seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded uniform random split into train and validation parts."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(d)
    n_train = int(round(n * train_fraction))
    if n - n_train < 2:
        raise ValueError("split would leave fewer than 2 validation rows")
    perm = np.random.default_rng(seed).permutation(n)
    return d.take(np.sort(perm[:n_train])), d.take(np.sort(perm[n_train:]))


@dataclass(frozen=True)
class Normalizer:
    """Per-feature min-max map onto [0, 1]; constant columns map to zero."""

    lo: tuple
    hi: tuple

    @classmethod
    def from_data(cls, X: np.ndarray) -> "Normalizer":
        return cls(tuple(float(v) for v in X.min(axis=0)),
                   tuple(float(v) for v in X.max(axis=0)))

    def transform(self, X: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo)
        span = np.asarray(self.hi) - lo
        span = np.where(span == 0.0, 1.0, span)
        return (np.atleast_2d(X) - lo) / span

    def in_range(self, x: np.ndarray, slack: float = 0.0) -> bool:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        pad = slack * np.where(hi > lo, hi - lo, 1.0)
        return bool(np.all(x >= lo - pad) and np.all(x <= hi + pad))


# --- multi-layer perceptron ----------------------------------------------

def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return expit(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_deriv(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class MlpModel:
    """Trained network plus its normalization/transform envelope."""

    layer_sizes: tuple               # (input_dim, hidden..., 1)
    activations: tuple               # one per connection layer
    weights: tuple                   # W[l] with shape (out, in)
    biases: tuple                    # b[l] with shape (out,)
    normalizer: Normalizer
    feature_names: tuple
    target_transform: str = "log"

    def __post_init__(self):
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError("one activation per connection layer required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[l + 1], self.layer_sizes[l]):
                raise ValueError(f"weight shape mismatch at layer {l}")
            if b.shape != (self.layer_sizes[l + 1],):
                raise ValueError(f"bias shape mismatch at layer {l}")


def _net_forward(weights, biases, activations, Xn: np.ndarray,
                 keep_intermediate: bool = False):
    a = Xn
    zs, acts = [], [Xn]
    for w, b, name in zip(weights, biases, activations):
        z = a @ w.T + b
        a = _act(name, z)
        if keep_intermediate:
            zs.append(z)
            acts.append(a)
    if keep_intermediate:
        return a[:, 0], zs, acts
    return a[:, 0]


def mlp_forward_batch(m: MlpModel, X: np.ndarray) -> np.ndarray:
    """Bead-width predictions (mm) for a matrix of raw feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.layer_sizes[0]:
        raise ValueError(f"expected {m.layer_sizes[0]} features, got {X.shape[1]}")
    out = _net_forward(m.weights, m.biases, m.activations,
                       m.normalizer.transform(X))
    if m.target_transform == "log":
        return np.exp(out)
    return out


def mlp_forward(m: MlpModel, x) -> float:
    """Bead width (mm) for one raw feature vector."""
    return float(mlp_forward_batch(m, np.asarray(x, dtype=float).reshape(1, -1))[0])


def mlp_forward_flagged(m: MlpModel, x) -> tuple[float, bool]:
    """Prediction plus a flag marking extrapolation beyond the training range."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(mlp_forward_batch(m, x)[0]), not m.normalizer.in_range(x[0])


def flatten_params(m: MlpModel) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b])
                           for w, b in zip(m.weights, m.biases)])


def with_params(m: MlpModel, theta: np.ndarray) -> MlpModel:
    weights, biases = _unflatten(theta, m.layer_sizes)
    return replace(m, weights=weights, biases=biases)


def _unflatten(theta: np.ndarray, layer_sizes):
    weights, biases = [], []
    pos = 0
    for l in range(len(layer_sizes) - 1):
        n_in, n_out = layer_sizes[l], layer_sizes[l + 1]
        w = theta[pos:pos + n_out * n_in].reshape(n_out, n_in)
        pos += n_out * n_in
        b = theta[pos:pos + n_out]
        pos += n_out
        weights.append(w)
        biases.append(b)
    return tuple(weights), tuple(biases)


def _param_count(layer_sizes) -> int:
    return sum(layer_sizes[l + 1] * (layer_sizes[l] + 1)
               for l in range(len(layer_sizes) - 1))


def _residuals_and_jacobian(theta, layer_sizes, activations, Xn, t):
    """Residuals net(x) - t and their Jacobian w.r.t. every weight and bias.

    One vectorized backward sweep per layer: the output is scalar, so the
    per-sample gradient of layer l is the outer product of the running
    delta with the layer's input activation.
    """
    weights, biases = _unflatten(theta, layer_sizes)
    y, zs, acts = _net_forward(weights, biases, activations, Xn,
                               keep_intermediate=True)
    n = Xn.shape[0]
    n_layers = len(weights)
    delta = np.ones((n, 1))  # d net / d z_last for the linear output unit
    if activations[-1] != "linear":
        delta = delta * _act_deriv(activations[-1], zs[-1], acts[-1])
    cols = []
    for l in range(n_layers - 1, -1, -1):
        a_prev = acts[l]
        grad_w = np.einsum("no,ni->noi", delta, a_prev).reshape(n, -1)
        cols.append((grad_w, delta.copy()))
        if l > 0:
            delta = (delta @ weights[l]) * _act_deriv(activations[l - 1],
                                                      zs[l - 1], acts[l])
    cols.reverse()
    J = np.concatenate([np.concatenate(pair, axis=1) for pair in cols], axis=1)
    return y - t, J


def mlp_residuals_jacobian(m: MlpModel, X: np.ndarray, target_mm: np.ndarray):
    """Residuals and Jacobian on raw features/targets, in the trained envelope."""
    Xn = m.normalizer.transform(np.atleast_2d(X))
    t = np.log(target_mm) if m.target_transform == "log" else np.asarray(target_mm)
    return _residuals_and_jacobian(flatten_params(m), m.layer_sizes,
                                   m.activations, Xn, t)


@dataclass(frozen=True)
class LmConfig:
    """Levenberg-Marquardt schedule; defaults follow the training recipe."""

    max_epochs: int = 200
    lambda_init: float = 1e-3
    lambda_max: float = 1e10
    seed: int = 0
    train_fraction: float = 0.8
    hidden_units: tuple = HIDDEN_UNITS
    hidden_activations: tuple = HIDDEN_ACTIVATIONS


@dataclass(frozen=True)
class TrainReport:
    metrics: FitMetrics
    epochs_run: int
    final_loss: float
    split_seed: int
    loss_history: tuple = ()  # loss after each accepted step


def _init_params(layer_sizes, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    parts = []
    for l in range(len(layer_sizes) - 1):
        n_in, n_out = layer_sizes[l], layer_sizes[l + 1]
        lim = math.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-lim, lim, size=n_out * n_in))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)


def mlp_train_lm(d: Dataset, config: LmConfig = LmConfig()
                 ) -> tuple[MlpModel, TrainReport]:
    """Full-batch Levenberg-Marquardt training of the bead-width network.

    The loss is half the sum of squared residuals on the normalized inputs
    and log-transformed targets of the training split.  The damping factor
    starts at 1e-3, grows tenfold on every rejected step, and shrinks
    tenfold on every accepted one; an epoch is one accepted step.  Training
    stops after ``max_epochs`` accepted steps or once the damping exceeds
    ``lambda_max``, whichever comes first, so the accepted-loss sequence is
    non-increasing by construction.
    """
    train, val = split_dataset(d, config.train_fraction, config.seed)
    layer_sizes = (train.inputs.shape[1], *config.hidden_units, 1)
    activations = (*config.hidden_activations, "linear")
    normalizer = Normalizer.from_data(train.inputs)
    Xn = normalizer.transform(train.inputs)
    t = np.log(train.target)

    theta = _init_params(layer_sizes, config.seed)
    r, _ = _residuals_and_jacobian(theta, layer_sizes, activations, Xn, t)
    loss = 0.5 * float(r @ r)
    lam = config.lambda_init
    epochs = 0
    history = []
    n_params = _param_count(layer_sizes)
    diag = np.arange(0, n_params * n_params, n_params + 1)

    def build_model(params):
        weights, biases = _unflatten(params, layer_sizes)
        return MlpModel(layer_sizes=layer_sizes, activations=activations,
                        weights=weights, biases=biases, normalizer=normalizer,
                        feature_names=train.feature_names)

    while epochs < config.max_epochs and lam <= config.lambda_max:
        r, J = _residuals_and_jacobian(theta, layer_sizes, activations, Xn, t)
        g = J.T @ r
        H = J.T @ J
        while True:
            A = H.copy()
            A.ravel()[diag] += lam
            try:
                step = cho_solve(cho_factor(A, lower=True, check_finite=False),
                                 -g, check_finite=False)
            except LinAlgError as exc:
                raise TrainingError(
                    f"normal equations singular at damping {lam:g}",
                    best=build_model(theta)) from exc
            trial = theta + step
            r_trial = _net_forward(*_unflatten(trial, layer_sizes),
                                   activations, Xn) - t
            trial_loss = 0.5 * float(r_trial @ r_trial)
            if math.isfinite(trial_loss) and trial_loss < loss:
                theta, loss = trial, trial_loss
                lam /= 10.0
                epochs += 1
                history.append(loss)
                break
            lam *= 10.0
            if lam > config.lambda_max:
                break

    model = build_model(theta)
    predictions = mlp_forward_batch(model, val.inputs)
    report = TrainReport(metrics=metrics_from_arrays(predictions, val.target),
                         epochs_run=epochs, final_loss=loss,
                         split_seed=config.seed, loss_history=tuple(history))
    return model, report


# --- response surface ----------------------------------------------------

@dataclass(frozen=True)
class RsmModel:
    """Complete polynomial (total degree <= ``degree``) on normalized features."""

    degree: int
    exponents: tuple                 # tuple of per-feature exponent tuples
    coefficients: tuple
    normalizer: Normalizer
    feature_names: tuple
    target_transform: str = "log"


def _monomial_exponents(n_features: int, degree: int):
    exps = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_features), total):
            e = [0] * n_features
            for i in combo:
                e[i] += 1
            exps.append(tuple(e))
    return tuple(exps)


def _design_matrix(Xn: np.ndarray, exponents) -> np.ndarray:
    cols = [np.prod(Xn ** np.asarray(e), axis=1) for e in exponents]
    return np.column_stack(cols)


def _monomial_label(exponents, names) -> str:
    parts = [f"{n}^{e}" if e > 1 else n for n, e in zip(names, exponents) if e]
    return "*".join(parts) if parts else "1"


def rsm_fit(d: Dataset, degree: int = 3, *, seed: int = 0,
            holdout_fraction: float = 0.2,
            target_transform: str = "log") -> tuple[RsmModel, FitMetrics]:
    """Least-squares fit of the complete degree-3 response surface.

    Uses the same envelope as the network (min-max inputs, log target) and
    reports metrics on a seeded 20% holdout.  A rank-deficient basis raises
    with the names of the collinear monomials.
    """
    exponents = _monomial_exponents(d.inputs.shape[1], degree)
    if len(d) < len(exponents):
        raise ValueError(f"need at least {len(exponents)} rows for "
                         f"{len(exponents)} monomials")
    train, val = split_dataset(d, 1.0 - holdout_fraction, seed)
    normalizer = Normalizer.from_data(train.inputs)
    phi = _design_matrix(normalizer.transform(train.inputs), exponents)
    t = np.log(train.target) if target_transform == "log" else train.target
    rank = np.linalg.matrix_rank(phi)
    if rank < len(exponents):
        _, s, vt = np.linalg.svd(phi, full_matrices=False)
        labels = []
        for row in vt[rank:]:
            worst = int(np.argmax(np.abs(row)))
            labels.append(_monomial_label(exponents[worst], d.feature_names))
        raise UnidentifiableError(
            "response-surface basis is rank deficient; collinear monomials: "
            + ", ".join(sorted(set(labels))))
    coeffs, *_ = np.linalg.lstsq(phi, t, rcond=None)
    model = RsmModel(degree=degree, exponents=exponents,
                     coefficients=tuple(float(c) for c in coeffs),
                     normalizer=normalizer, feature_names=d.feature_names,
                     target_transform=target_transform)
    metrics = metrics_from_arrays(rsm_predict_batch(model, val.inputs),
                                  val.target)
    return model, metrics


def rsm_predict_batch(m: RsmModel, X: np.ndarray) -> np.ndarray:
    Xn = m.normalizer.transform(np.atleast_2d(np.asarray(X, dtype=float)))
    out = _design_matrix(Xn, m.exponents) @ np.asarray(m.coefficients)
    if m.target_transform == "log":
        return np.exp(out)
    return out


def rsm_predict(m: RsmModel, x) -> float:
    return float(rsm_predict_batch(m, np.asarray(x, dtype=float).reshape(1, -1))[0])


# --- comparison harnesses -------------------------------------------------

ABLATION_INPUT_SETS = (("mpw", "mpl", "mpt", "n"),
                       ("mpw", "mpl", "n"),
                       ("mpw", "n"))


def f2_ablation(d: Dataset, config: LmConfig = LmConfig()) -> list[dict]:
    """Train the bead-width network on three nested input sets.

    All three runs share the seed, split, and epoch budget, so the rows
    differ only in which signatures the network is allowed to see.
    """
    for name in ("mpw", "mpl", "mpt", "n"):
        if name not in d.feature_names:
            raise ValueError(f"dataset is missing required column {name!r}")
    rows = []
    for names in ABLATION_INPUT_SETS:
        model, report = mlp_train_lm(d.select(names), config)
        rows.append({"inputs": names, "model": model,
                     "metrics": report.metrics, "epochs_run": report.epochs_run})
    return rows


def f3_vs_composed(d: Dataset, f1, config: LmConfig = LmConfig(), *,
                   lp_series=None, layer_series=None,
                   f1_preprocessing: dict = None) -> list[dict]:
    """Direct parameter model versus the composed signature route.

    Row one trains the direct map (TS, LP, n) -> BW.  Row two trains the
    signature map (MPW, n) -> BW on measured data, then evaluates it on the
    melt-pool width *simulated* from the power and layer series through the
    dynamic model ``f1``.  Both rows report metrics on the same validation
    rows.

    When ``lp_series``/``layer_series`` are omitted the series are rebuilt
    from the dataset columns, which requires uniformly spaced row
    timestamps.  ``f1_preprocessing`` is the mean-removal record stored
    with a fitted composite model; passing it re-biases the model so it can
    be replayed against the raw power channel.
    """
    from .signals import TimeSeries
    from .sysid import composite_for_raw, simulate_composite_f1

    for name in ("ts", "lp", "mpw", "n"):
        if name not in d.feature_names:
            raise ValueError(f"dataset is missing required column {name!r}")

    if lp_series is None or layer_series is None:
        if d.time is None or d.dt is None:
            raise ValueError("need lp/layer series or row timestamps to "
                             "simulate the dynamic model")
        steps = np.diff(d.time)
        if not np.allclose(steps, d.dt, rtol=1e-9, atol=1e-9):
            raise ValueError("row timestamps are not uniform; pass the "
                             "original series instead")
        lp_series = TimeSeries(float(d.time[0]), d.dt, d.column("lp"), "W")
        layer_series = TimeSeries(float(d.time[0]), d.dt, d.column("n"), "")
    if f1_preprocessing is not None:
        f1 = composite_for_raw(f1, f1_preprocessing)
    mpw_hat = simulate_composite_f1(f1, lp_series, layer_series, start="steady")

    f3_model, f3_report = mlp_train_lm(d.select(("ts", "lp", "n")), config)

    f2_model, _ = mlp_train_lm(d.select(("mpw", "n")), config)
    _, val = split_dataset(d, config.train_fraction, config.seed)
    if d.time is not None:
        idx = np.round((val.time - lp_series.t0) / lp_series.dt).astype(int)
    else:
        raise ValueError("dataset needs row timestamps to align the simulation")
    composed_inputs = np.column_stack([mpw_hat.values[idx], val.column("n")])
    composed_pred = mlp_forward_batch(f2_model, composed_inputs)
    composed_metrics = metrics_from_arrays(composed_pred, val.target)

    return [
        {"model_name": "direct_parameter_mlp", "inputs": ("ts", "lp", "n"),
         "model": f3_model, "metrics": f3_report.metrics},
        {"model_name": "composed_signature_route", "inputs": ("mpw", "n"),
         "model": f2_model, "metrics": composed_metrics},
    ]


# --- persistence ----------------------------------------------------------

def save_surrogate(path, model, *, metrics: FitMetrics = None,
                   seed: int = None) -> None:
    if isinstance(model, MlpModel):
        doc = {
            "kind": "mlp",
            "layer_sizes": list(model.layer_sizes),
            "activations": list(model.activations),
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "normalizer": {"lo": list(model.normalizer.lo),
                           "hi": list(model.normalizer.hi)},
            "feature_names": list(model.feature_names),
            "target_transform": model.target_transform,
        }
    elif isinstance(model, RsmModel):
        doc = {
            "kind": "rsm",
            "degree": model.degree,
            "exponents": [list(e) for e in model.exponents],
            "coefficients": list(model.coefficients),
            "normalizer": {"lo": list(model.normalizer.lo),
                           "hi": list(model.normalizer.hi)},
            "feature_names": list(model.feature_names),
            "target_transform": model.target_transform,
        }
    else:
        raise TypeError(f"unknown surrogate type {type(model).__name__}")
    if metrics is not None:
        doc["fit_metrics"] = metrics.as_dict()
    if seed is not None:
        doc["training_seed"] = seed
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_surrogate(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    norm = Normalizer(tuple(doc["normalizer"]["lo"]),
                      tuple(doc["normalizer"]["hi"]))
    if doc["kind"] == "mlp":
        model = MlpModel(
            layer_sizes=tuple(doc["layer_sizes"]),
            activations=tuple(doc["activations"]),
            weights=tuple(np.array(w) for w in doc["weights"]),
            biases=tuple(np.array(b) for b in doc["biases"]),
            normalizer=norm,
            feature_names=tuple(doc["feature_names"]),
            target_transform=doc["target_transform"])
    elif doc["kind"] == "rsm":
        model = RsmModel(
            degree=doc["degree"],
            exponents=tuple(tuple(e) for e in doc["exponents"]),
            coefficients=tuple(doc["coefficients"]),
            normalizer=norm,
            feature_names=tuple(doc["feature_names"]),
            target_transform=doc["target_transform"])
    else:
        raise ValueError(f"unknown surrogate kind {doc.get('kind')!r}")
    return model, doc


def write_dataset_csv(path, d: Dataset) -> None:
    """Columns: optional t, each feature as ``name[unit]``, target ``bw[mm]``."""
    headers = []
    if d.time is not None:
        headers.append("t")
    headers += [f"{n}[{u}]" if u else n for n, u in zip(d.feature_names, d.units)]
    headers.append("bw[mm]")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(headers) + "\n")
        for i in range(len(d)):
            row = []
            if d.time is not None:
                row.append(repr(float(d.time[i])))
            row += [repr(float(v)) for v in d.inputs[i]]
            row.append(repr(float(d.target[i])))
            fh.write(",".join(row) + "\n")


def read_dataset_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    data = np.array([[float(v) for v in r] for r in rows])
    names, units = [], []
    time = None
    col = 0
    if header[0] == "t":
        time = data[:, 0]
        col = 1
    if header[-1] not in ("bw[mm]", "bw"):
        raise ValueError(f"{path}: last column must be the bw[mm] target")
    for h in header[col:-1]:
        name, unit = (h[:-1].split("[", 1) if h.endswith("]") and "[" in h
                      else (h, ""))
        names.append(name)
        units.append(unit)
    dt = None
    if time is not None and time.size > 1:
        steps = np.diff(time)
        if np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            dt = float(steps[0])
    return Dataset(data[:, col:-1], data[:, -1], tuple(names), tuple(units),
                   time, dt)
