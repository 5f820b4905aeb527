"""Command-line front end: dedtwin <generate|identify|train|control|vision>.

Each command reads JSON configs and CSV data, writes its results into the
output directory, renders companion PNG figures unless ``--no-figures`` is
given, and drops a ``manifest.json`` recording the command, seed, config,
and content hashes of every input, so a run can be reproduced (and is
byte-identical when repeated).

Exit codes: 0 success, 2 bad input or configuration, 3 numerical or fit
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DedTwinError, EmptyDatasetError, NonConvergenceError, \
    TrainingError, TuningError, UnidentifiableError
from . import report
from .control import (
    LinearLoopModel,
    LoopConfig,
    compare_scenarios,
    gains_from_dict,
    gains_to_dict,
    invert_f2_for_signature_setpoint,
    linearize_f2,
    loop_config_from_dict,
    run_closed_loop,
    tune_pid,
    window_bw_errors,
    write_trace_csv,
)
from .plant import (
    PlantConfig,
    config_from_dict,
    make_f2_training_set,
    protocol_from_dict,
    read_record_csv,
    run_open_loop,
    write_record_csv,
)
from .surrogate import (
    LmConfig,
    f2_ablation,
    f3_vs_composed,
    load_surrogate,
    mlp_forward_batch,
    mlp_train_lm,
    read_dataset_csv,
    rsm_fit,
    rsm_predict_batch,
    save_surrogate,
)
from .sysid import (
    compare_models,
    fit_arx,
    fit_composite_f1,
    fit_first_order,
    fit_hammerstein_wiener,
    fit_second_order,
    load_model,
    prepare_multilayer_data,
    save_model,
    simulate_arx,
    simulate_composite_f1,
    simulate_first_order,
    simulate_hammerstein_wiener,
    simulate_second_order,
)
from .vision import CropRect, extract_geometry, read_pgm

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_CONFIG_DIR = Path(__file__).parent / "configs"


def bundled_config_path(name: str) -> Path:
    return _CONFIG_DIR / f"{name}.json"


def _resolve_config(value: str) -> Path:
    """A path on disk, or the name of a bundled config."""
    p = Path(value)
    if p.exists():
        return p
    bundled = bundled_config_path(value)
    if bundled.exists():
        return bundled
    raise FileNotFoundError(
        f"no such file or bundled config: {value!r} "
        f"(bundled: {', '.join(sorted(q.stem for q in _CONFIG_DIR.glob('*.json')))})")


def _load_json(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, args_doc: dict,
                    inputs: list, outputs: list, seed) -> None:
    doc = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "arguments": args_doc,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": sorted(str(o) for o in outputs),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    out = _out_dir(args)
    config_path = _resolve_config(args.config or "plant_default")
    protocol_path = _resolve_config(args.protocol)
    config = config_from_dict(_load_json(config_path))
    if args.seed is not None:
        config = config_from_dict({**_load_json(config_path), "seed": args.seed})
    proto = protocol_from_dict(_load_json(protocol_path))

    record = run_open_loop(config, proto)
    record_csv = out / "record.csv"
    write_record_csv(record_csv, record)
    outputs = [record_csv]

    dataset_csv = None
    if args.dataset:
        from .surrogate import write_dataset_csv
        dataset = make_f2_training_set(record)
        dataset_csv = out / "dataset.csv"
        write_dataset_csv(dataset_csv, dataset)
        outputs.append(dataset_csv)

    if not args.no_figures:
        fig = out / "record.png"
        report.render_record(record, fig)
        outputs.append(fig)

    _write_manifest(out, "generate",
                    {"config": str(config_path), "protocol": str(protocol_path),
                     "dataset": bool(args.dataset)},
                    [config_path, protocol_path], outputs, config.seed)
    print(f"wrote {record_csv} ({len(record)} samples)")
    return EXIT_OK


# --- identify ----------------------------------------------------------------

def _pick_input_channel(record, requested: str):
    if requested != "auto":
        return requested, getattr(record, requested)
    for name in ("lp", "ts"):
        channel = getattr(record, name)
        if np.ptp(channel.values) > 0:
            return name, channel
    raise UnidentifiableError(
        "neither laser power nor travel speed varies in this record; "
        "pass --input explicitly")


def cmd_identify(args) -> int:
    out = _out_dir(args)
    record_path = Path(args.record)
    record = read_record_csv(record_path)
    validation = args.validation
    outputs = []

    if args.structure == "composite":
        lp_p, mpw_p, layer_p, prep = prepare_multilayer_data(
            record.lp, record.mpw, record.layer)
        model, metrics = fit_composite_f1(
            lp_p, layer_p, mpw_p,
            validation_fraction=validation if validation else 0.3)
        predicted = simulate_composite_f1(model, lp_p, layer_p)
        measured = mpw_p
        model_path = out / "model.json"
        save_model(model_path, model, metrics=metrics,
                   units={"input": "W", "output": "mm"}, preprocessing=prep)
        outputs.append(model_path)
        split_time = lp_p.t0 + lp_p.dt * int(round(
            len(lp_p) * (1 - (validation if validation else 0.3))))
        title = "composite power+layer model"
    elif args.structure == "all":
        name, u = _pick_input_channel(record, args.input)
        rows = compare_models(u, record.mpw,
                              validation if validation else 0.5)
        table = out / "comparison.csv"
        with open(table, "w", encoding="utf-8") as fh:
            fh.write("structure,train_bf_percent,validation_bf_percent,error\n")
            for r in rows:
                train = (f"{r['train_metrics'].bf_percent:.4f}"
                         if r["train_metrics"] else "")
                val = (f"{r['validation_metrics'].bf_percent:.4f}"
                       if r["validation_metrics"] else "")
                err = r["error"] or ""
                fh.write(f"{r['structure']},{train},{val},{err!r}\n")
        outputs.append(table)
        best = next((r for r in rows if r["model"] is not None), None)
        if best is None:
            print("every structure failed to fit", file=sys.stderr)
            return EXIT_NUMERIC
        model_path = out / "model.json"
        save_model(model_path, best["model"],
                   metrics=best["validation_metrics"],
                   units={"input": u.unit, "output": "mm"})
        outputs.append(model_path)
        if not args.no_figures:
            fig = out / "comparison.png"
            labels = [r["structure"] for r in rows]
            vals = [max(r["validation_metrics"].r2, 0.0)
                    if r["validation_metrics"] else 0.0 for r in rows]
            report.render_metric_bars(labels, vals, fig,
                                      title=f"model comparison ({name} -> mpw)")
            outputs.append(fig)
        _write_manifest(out, "identify",
                        {"record": str(record_path), "structure": "all",
                         "input": args.input, "validation": validation},
                        [record_path], outputs, args.seed)
        print(f"best structure: {best['structure']} "
              f"(BF {best['validation_metrics'].bf_percent:.2f}%)")
        return EXIT_OK
    else:
        name, u = _pick_input_channel(record, args.input)
        measured = record.mpw
        fitters = {
            "first-order": lambda: fit_first_order(u, measured),
            "second-order": lambda: fit_second_order(u, measured),
            "arx": lambda: fit_arx(u, measured, *args.arx_orders),
            "hw": lambda: fit_hammerstein_wiener(u, measured,
                                                 args.breakpoints),
        }
        model, metrics = fitters[args.structure]()
        simulators = {
            "first-order": lambda m: simulate_first_order(
                m, u, y0=float(measured.values[0])),
            "second-order": lambda m: simulate_second_order(
                m, u, y0=float(measured.values[0])),
            "arx": lambda m: simulate_arx(m, u),
            "hw": lambda m: simulate_hammerstein_wiener(m, u),
        }
        predicted = simulators[args.structure](model)
        model_path = out / "model.json"
        save_model(model_path, model, metrics=metrics,
                   units={"input": u.unit, "output": "mm"})
        outputs.append(model_path)
        split_time = None
        title = f"{args.structure} model ({name} -> mpw)"

    metrics_path = out / "metrics.json"
    _write_json(metrics_path, metrics.as_dict())
    outputs.append(metrics_path)
    pred_csv = out / "predicted_vs_actual.csv"
    with open(pred_csv, "w", encoding="utf-8") as fh:
        fh.write("t,measured,predicted\n")
        for t, m, p in zip(measured.times, measured.values, predicted.values):
            fh.write(f"{float(t)!r},{float(m)!r},{float(p)!r}\n")
    outputs.append(pred_csv)
    if not args.no_figures:
        fig = out / "prediction.png"
        report.render_prediction(measured.times, measured.values,
                                 predicted.values, fig, title=title,
                                 bf_percent=metrics.bf_percent,
                                 split_time=split_time)
        outputs.append(fig)
    _write_manifest(out, "identify",
                    {"record": str(record_path), "structure": args.structure,
                     "input": args.input, "validation": validation},
                    [record_path], outputs, args.seed)
    print(f"fit {args.structure}: BF {metrics.bf_percent:.2f}%")
    return EXIT_OK


# --- train --------------------------------------------------------------------

def _metrics_row(metrics) -> str:
    return f"{metrics.rmse:.6f},{metrics.mae:.6f},{metrics.r2:.6f}"


def cmd_train(args) -> int:
    out = _out_dir(args)
    dataset_path = Path(args.dataset)
    dataset = read_dataset_csv(dataset_path)
    seed = args.seed if args.seed is not None else 0
    config = LmConfig(max_epochs=args.epochs, seed=seed)
    inputs = [dataset_path]
    outputs = []

    if args.model == "ablation":
        rows = f2_ablation(dataset, config)
        table = out / "ablation.csv"
        with open(table, "w", encoding="utf-8") as fh:
            fh.write("inputs,rmse_mm,mae_mm,r2\n")
            for r in rows:
                fh.write(f"{'+'.join(r['inputs'])},{_metrics_row(r['metrics'])}\n")
        outputs.append(table)
        for r in rows:
            path = out / f"mlp_{'_'.join(r['inputs'])}.json"
            save_surrogate(path, r["model"], metrics=r["metrics"], seed=seed)
            outputs.append(path)
        if not args.no_figures:
            fig = out / "ablation.png"
            report.render_metric_bars(["+".join(r["inputs"]) for r in rows],
                                      [r["metrics"].r2 for r in rows], fig,
                                      title="input ablation")
            outputs.append(fig)
        print("\n".join(f"{'+'.join(r['inputs'])}: R2 {r['metrics'].r2:.4f}"
                        for r in rows))
    elif args.model == "compare-f3":
        if not args.f1:
            print("--model compare-f3 requires --f1", file=sys.stderr)
            return EXIT_INPUT
        f1_path = Path(args.f1)
        f1, f1_doc = load_model(f1_path)
        inputs.append(f1_path)
        rows = f3_vs_composed(dataset, f1, config,
                              f1_preprocessing=f1_doc.get("preprocessing"))
        table = out / "f3_vs_composed.csv"
        with open(table, "w", encoding="utf-8") as fh:
            fh.write("model,inputs,rmse_mm,mae_mm,r2\n")
            for r in rows:
                fh.write(f"{r['model_name']},{'+'.join(r['inputs'])},"
                         f"{_metrics_row(r['metrics'])}\n")
        outputs.append(table)
        for r in rows:
            path = out / f"{r['model_name']}.json"
            save_surrogate(path, r["model"], metrics=r["metrics"], seed=seed)
            outputs.append(path)
        if not args.no_figures:
            fig = out / "f3_vs_composed.png"
            report.render_metric_bars([r["model_name"] for r in rows],
                                      [max(r["metrics"].r2, 0.0) for r in rows],
                                      fig, title="direct vs composed")
            outputs.append(fig)
        print("\n".join(f"{r['model_name']}: R2 {r['metrics'].r2:.4f}"
                        for r in rows))
    else:
        feature_sets = {"mlp": ("mpw", "mpl", "mpt", "n"),
                        "rsm": ("mpw", "mpl", "n"),
                        "f3": ("ts", "lp", "n")}
        names = (tuple(args.inputs.split(",")) if args.inputs
                 else feature_sets[args.model])
        selected = dataset.select(names)
        if args.model == "rsm":
            model, metrics = rsm_fit(selected, seed=seed)
            predictions = rsm_predict_batch(model, selected.inputs)
            report_doc = {"metrics": metrics.as_dict(), "seed": seed}
        else:
            try:
                model, train_report = mlp_train_lm(selected, config)
            except TrainingError as exc:
                if exc.best is not None:
                    save_surrogate(out / "model.json", exc.best, seed=seed)
                print(f"training failure: {exc} (best iterate written)",
                      file=sys.stderr)
                return EXIT_NUMERIC
            metrics = train_report.metrics
            predictions = mlp_forward_batch(model, selected.inputs)
            report_doc = {"metrics": metrics.as_dict(),
                          "epochs_run": train_report.epochs_run,
                          "final_loss": train_report.final_loss,
                          "seed": seed}
        model_path = out / "model.json"
        save_surrogate(model_path, model, metrics=metrics, seed=seed)
        report_path = out / "train_report.json"
        _write_json(report_path, report_doc)
        outputs += [model_path, report_path]
        if not args.no_figures:
            fig = out / "prediction_scatter.png"
            report.render_scatter(selected.target, predictions, fig,
                                  title=f"{args.model} on {'+'.join(names)}")
            outputs.append(fig)
        print(f"{args.model}: validation R2 {metrics.r2:.4f}")

    _write_manifest(out, "train",
                    {"dataset": str(dataset_path), "model": args.model,
                     "inputs": args.inputs, "epochs": args.epochs,
                     "f1": args.f1},
                    inputs, outputs, seed)
    return EXIT_OK


# --- control --------------------------------------------------------------------

def cmd_control(args) -> int:
    out = _out_dir(args)
    loop_path = _resolve_config(args.config or "loop_default")
    plant_path = _resolve_config(args.plant or "plant_default")
    f2_path = Path(args.f2)
    cfg = loop_config_from_dict(_load_json(loop_path))
    plant_doc = _load_json(plant_path)
    if args.seed is not None:
        plant_doc = {**plant_doc, "seed": args.seed}
    plant_config = config_from_dict(plant_doc)
    f2, _ = load_surrogate(f2_path)
    inputs = [loop_path, plant_path, f2_path]
    outputs = []

    if args.gains_from:
        gains_path = Path(args.gains_from)
        gains_doc = _load_json(gains_path)
        inputs.append(gains_path)
        if "kp" in gains_doc:
            gains_property = gains_signature = gains_from_dict(gains_doc)
        else:
            gains_property = gains_from_dict(gains_doc["property_loop"])
            gains_signature = gains_from_dict(gains_doc["signature_loop"])
        tuning_report = {"source": str(gains_path)}
    else:
        target = cfg.setpoints[0][1]
        mid = {name: 0.5 * (f2.normalizer.lo[i] + f2.normalizer.hi[i])
               for i, name in enumerate(f2.feature_names)}
        mpw0 = invert_f2_for_signature_setpoint(f2, target,
                                                {**mid, "n": 1.0})
        op_point = [mpw0 if nm == "mpw" else (1.0 if nm == "n" else mid[nm])
                    for nm in f2.feature_names]
        grad = linearize_f2(f2, op_point)
        loop_model = LinearLoopModel(process=plant_config.true_g_lp,
                                     output_gain=grad["gradients"]["mpw"],
                                     dt=cfg.dt)
        extra = []
        ref_path = bundled_config_path("reference_gains")
        ref = _load_json(ref_path)
        inputs.append(ref_path)
        extra = [gains_from_dict(ref["property_loop"]),
                 gains_from_dict(ref["signature_loop"])]
        gains, tuning_report = tune_pid(loop_model, extra_starts=extra)
        gains_property = gains_signature = gains
        tuning_report = {**tuning_report,
                         "operating_point": {nm: float(v) for nm, v in
                                             zip(f2.feature_names, op_point)},
                         "local_gradient": {k: float(v) for k, v in
                                            grad["gradients"].items()}}
        gains_path_out = out / "gains.json"
        _write_json(gains_path_out, gains_to_dict(gains))
        outputs.append(gains_path_out)

    comparison, trace_prop, trace_sig = compare_scenarios(
        cfg, plant_config, f2, gains_property, gains_signature)
    prop_csv = out / "trace_property.csv"
    sig_csv = out / "trace_signature.csv"
    write_trace_csv(prop_csv, trace_prop)
    write_trace_csv(sig_csv, trace_sig)
    report_path = out / "comparison.json"
    _write_json(report_path, {"tuning": tuning_report, **comparison})
    outputs += [prop_csv, sig_csv, report_path]

    if not args.no_figures:
        f1 = out / "trace_property.png"
        f2fig = out / "trace_signature.png"
        f3 = out / "scenario_comparison.png"
        report.render_closed_loop(trace_prop, f1, title="property-controlled loop")
        report.render_closed_loop(trace_sig, f2fig, title="signature-controlled loop")
        report.render_scenario_comparison(trace_prop, trace_sig, f3)
        outputs += [f1, f2fig, f3]

    _write_manifest(out, "control",
                    {"config": str(loop_path), "plant": str(plant_path),
                     "f2": str(f2_path), "gains_from": args.gains_from},
                    inputs, outputs, plant_config.seed)
    prop_err = [w["mean_abs_bw_error_mm"]
                for w in comparison["scenarios"][0]["windows"]]
    sig_err = [w["mean_abs_bw_error_mm"]
               for w in comparison["scenarios"][1]["windows"]]
    print(f"property loop bead-width error per window: "
          f"{', '.join(f'{e:.3f}' for e in prop_err)} mm")
    print(f"signature loop bead-width error per window: "
          f"{', '.join(f'{e:.3f}' for e in sig_err)} mm")
    return EXIT_OK


# --- vision ----------------------------------------------------------------------

def cmd_vision(args) -> int:
    out = _out_dir(args)
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        print(f"frames directory not found: {frames_dir}", file=sys.stderr)
        return EXIT_INPUT
    frames = sorted(frames_dir.glob("*.pgm"))
    if not frames:
        print(f"no .pgm frames in {frames_dir}", file=sys.stderr)
        return EXIT_INPUT
    try:
        x0, y0, w, h = (int(v) for v in args.crop.split(","))
    except ValueError:
        print(f"crop must be 'x0,y0,w,h', got {args.crop!r}", file=sys.stderr)
        return EXIT_INPUT
    crop = CropRect(x0=x0, y0=y0, w=w, h=h)

    rows = []
    warnings = 0
    for idx, path in enumerate(frames):
        try:
            img = read_pgm(path)
            geo = extract_geometry(img, crop, args.scale)
        except (ValueError, OSError) as exc:
            print(f"frame {path.name}: {exc}", file=sys.stderr)
            warnings += 1
            rows.append((idx, 0.0, 0.0, False))
            continue
        rows.append((idx, geo.mpw, geo.mpl, geo.valid))

    geometry_csv = out / "geometry.csv"
    with open(geometry_csv, "w", encoding="utf-8") as fh:
        fh.write("frame_index,mpw_mm,mpl_mm,valid\n")
        for idx, mpw, mpl, valid in rows:
            fh.write(f"{idx},{float(mpw)!r},{float(mpl)!r},{int(valid)}\n")
    outputs = [geometry_csv]
    if not args.no_figures:
        fig = out / "geometry.png"
        report.render_vision_series([r[0] for r in rows], [r[1] for r in rows],
                                    [r[2] for r in rows], [r[3] for r in rows],
                                    fig)
        outputs.append(fig)
    _write_manifest(out, "vision",
                    {"frames": str(frames_dir), "crop": args.crop,
                     "scale": args.scale},
                    frames, outputs, args.seed)
    if warnings:
        print(f"done with {warnings} unreadable frame(s)", file=sys.stderr)
    print(f"wrote {geometry_csv} ({len(rows)} frames)")
    return EXIT_OK


# --- wiring -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dedtwin",
        description="Desk-scale digital twin of laser hot-wire deposition: "
                    "generate process data, identify dynamics, train "
                    "surrogates, and run closed-loop bead-width control.")
    parser.add_argument("--version", action="version",
                        version=f"dedtwin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering")

    g = sub.add_parser("generate", help="run the virtual plant on a protocol")
    common(g)
    g.add_argument("--config", default=None,
                   help="plant config JSON (path or bundled name)")
    g.add_argument("--protocol", required=True,
                   help="protocol JSON (path or bundled name, e.g. wall4_lp)")
    g.add_argument("--dataset", action="store_true",
                   help="also extract the signature->property dataset CSV")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("identify", help="fit dynamic models to a record")
    common(i)
    i.add_argument("--record", required=True, help="record CSV from generate")
    i.add_argument("--structure", required=True,
                   choices=["first-order", "second-order", "arx", "hw",
                            "composite", "all"])
    i.add_argument("--input", default="auto", choices=["auto", "lp", "ts"],
                   help="which command channel drives the model")
    i.add_argument("--validation", type=float, default=None,
                   help="held-out fraction (composite: trailing; all: suffix)")
    i.add_argument("--arx-orders", type=int, nargs=3, default=(2, 2, 1),
                   metavar=("NA", "NB", "NK"))
    i.add_argument("--breakpoints", type=int, default=5,
                   help="breakpoint count for the hw structure")
    i.set_defaults(func=cmd_identify)

    t = sub.add_parser("train", help="train signature/property surrogates")
    common(t)
    t.add_argument("--dataset", required=True, help="dataset CSV")
    t.add_argument("--model", required=True,
                   choices=["mlp", "rsm", "f3", "ablation", "compare-f3"])
    t.add_argument("--inputs", default=None,
                   help="comma-separated feature columns (overrides defaults)")
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--f1", default=None,
                   help="composite model JSON (for compare-f3)")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("control", help="tune and run both closed-loop scenarios")
    common(c)
    c.add_argument("--config", default=None,
                   help="loop config JSON (path or bundled name)")
    c.add_argument("--plant", default=None,
                   help="plant config JSON (path or bundled name)")
    c.add_argument("--f2", required=True, help="surrogate JSON (rsm)")
    c.add_argument("--gains-from", default=None,
                   help="gains JSON; skips tuning and runs these as-is")
    c.set_defaults(func=cmd_control)

    v = sub.add_parser("vision", help="extract pool geometry from PGM frames")
    common(v)
    v.add_argument("--frames", required=True, help="directory of P5 .pgm files")
    v.add_argument("--crop", required=True, help="x0,y0,w,h in pixels")
    v.add_argument("--scale", type=float, required=True,
                   help="millimeters per pixel")
    v.set_defaults(func=cmd_vision)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (UnidentifiableError, NonConvergenceError, TrainingError,
            TuningError, EmptyDatasetError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DedTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
