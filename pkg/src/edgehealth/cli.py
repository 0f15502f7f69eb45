"""Command-line pipeline: generate -> train -> predict/evaluate -> explain -> report.

Every command echoes its fully materialized settings to a JSON sidecar next
to its primary output (``<out>.config.json`` or ``<outdir>.config.json``);
passing that file back with ``--config`` reproduces the run.

Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, plots
from ._backend import BACKEND
from ._io import atomic_write
from .data import generate_synthetic, load_csv, write_csv
from .errors import EdgeHealthError
from .evaluate import (
    POSITIVE_CLASS,
    KNNClassifier,
    comparison_csv,
    comparison_text,
    compare,
    metrics,
    naive_bayes_fit,
    read_predictions_csv,
)
from .explain import (
    EFFICIENCY_TOL,
    BackgroundSet,
    beeswarm_data,
    dependence_data,
    explain_dataset,
    mean_abs_shap,
    read_shap_csv,
    weight_importance,
    write_shap_csv,
)
from .gbdt import BoostedModel, BoostHyperparams, predict_labels, predict_margins, sigmoid, train

log = logging.getLogger("edgehealth")

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2
BASELINES = ("knn", "nb")


class UsageError(Exception):
    pass


def _sidecar(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".config.json")


def _echo_config(args: argparse.Namespace, target) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "verbose")}
    with atomic_write(_sidecar(target)) as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def cmd_generate(args) -> int:
    _require(args, "out")
    ds = generate_synthetic(args.samples, args.anomaly_rate, args.seed)
    write_csv(ds, args.out)
    with atomic_write(Path(args.out).with_name(Path(args.out).name + ".provenance.json")) as fh:
        json.dump(
            {
                "generator": "edgehealth.data.generate_synthetic",
                "version": __version__,
                "samples": args.samples,
                "anomaly_rate": args.anomaly_rate,
                "seed": args.seed,
                "abnormal": int((ds.y == 0).sum()),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    _echo_config(args, args.out)
    print(f"wrote {len(ds)} samples to {args.out}")
    return EXIT_OK


def _hyperparams(args) -> BoostHyperparams:
    return BoostHyperparams(
        num_rounds=args.trees,
        max_depth=args.max_depth,
        learning_rate=args.learning_rate,
        reg_lambda=args.reg_lambda,
        gamma=args.gamma,
        min_child_hessian=args.min_child_hessian,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    _require(args, "data", "out")
    params = _hyperparams(args)
    ds = load_csv(args.data)
    t0 = time.perf_counter()
    model = train(ds, params)
    log.info("trained %d trees in %.2fs (%s kernels)", len(model.trees), time.perf_counter() - t0, BACKEND)
    log_path = args.log or str(Path(args.out).with_suffix("")) + ".training_log.csv"
    with atomic_write(log_path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "train_logloss"])
        for k, loss in enumerate(model.training_log, start=1):
            w.writerow([k, repr(loss)])
    model.save(args.out)
    _echo_config(args, args.out)
    final = model.training_log[-1] if model.training_log else float("nan")
    print(f"wrote model with {len(model.trees)} trees to {args.out} (final train log-loss {final:.6f})")
    return EXIT_OK


def cmd_predict(args) -> int:
    _require(args, "model", "data", "out")
    model = BoostedModel.load(args.model)
    ds = load_csv(args.data)
    margins = predict_margins(model, ds)
    probas = sigmoid(margins)
    with atomic_write(args.out, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_index", "margin", "proba", "prediction"])
        for i, (m, p) in enumerate(zip(margins, probas)):
            w.writerow([i, repr(float(m)), repr(float(p)), int(p >= 0.5)])
    _echo_config(args, args.out)
    print(f"wrote {len(ds)} predictions to {args.out}")
    return EXIT_OK


def _parse_baselines(text: str) -> list:
    names = [b.strip().lower() for b in (text or "").split(",") if b.strip()]
    for b in names:
        if b not in BASELINES:
            raise UsageError(f"unknown baseline {b!r}; choose from {', '.join(BASELINES)}")
    return names


def cmd_evaluate(args) -> int:
    _require(args, "model", "data", "outdir")
    baselines = _parse_baselines(args.baselines)
    externals = []
    for item in args.external or []:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--external expects NAME=PATH, got {item!r}")
        externals.append((name, path))
    if baselines and not args.train_data:
        raise UsageError("--baselines requires --train-data")

    model = BoostedModel.load(args.model)
    test = load_csv(args.data)
    if not test.labeled:
        raise EdgeHealthError(f"{args.data}: evaluation data needs a health_status column")
    entries = [(args.model_name, predict_labels(model, test))]
    if baselines:
        tr = load_csv(args.train_data)
        for b in baselines:
            if b == "knn":
                entries.append(("KNN", KNNClassifier(tr, args.knn_k).predict(test.X)))
            else:
                entries.append(("Naive Bayes", naive_bayes_fit(tr).predict(test.X)))
    for name, path in externals:
        entries.append((name, read_predictions_csv(path, len(test))))

    rows = compare(entries, test)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    majority = max(np.mean(test.y), 1 - np.mean(test.y))
    report = {"positive_class": POSITIVE_CLASS, "n_samples": len(test), "majority_rate": float(majority), "models": []}
    for name, labels in entries:
        m = metrics(labels, test.y)
        report["models"].append(
            {
                "model": name,
                "tp": m.counts.tp,
                "fp": m.counts.fp,
                "tn": m.counts.tn,
                "fn": m.counts.fn,
                "accuracy": m.accuracy,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "undefined_ratio": m.undefined,
            }
        )
    with atomic_write(outdir / "metrics.json") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    comparison_csv(rows, outdir / "comparison.csv")
    text = comparison_text(rows)
    with atomic_write(outdir / "comparison.txt") as fh:
        fh.write(text)
    _echo_config(args, outdir)
    print(text, end="")
    return EXIT_OK


def cmd_explain(args) -> int:
    _require(args, "model", "data", "out")
    model = BoostedModel.load(args.model)
    ds = load_csv(args.data)
    bg_source = load_csv(args.background_data) if args.background_data else ds
    background = BackgroundSet.from_dataset(bg_source, args.background_size, args.seed)
    indices = None if args.sample is None else [args.sample]
    t0 = time.perf_counter()
    explanations = explain_dataset(model, ds, background, indices)
    log.info("explained %d samples in %.2fs (%s kernels)", len(explanations), time.perf_counter() - t0, BACKEND)
    bad = sum(e.efficiency_error >= EFFICIENCY_TOL for e in explanations)
    if bad:
        log.warning("%d rows violate the efficiency check", bad)
    write_shap_csv(explanations, model.schema, args.out)
    _echo_config(args, args.out)
    print(f"wrote {len(explanations)} explanations to {args.out}")
    return EXIT_OK


def _write_rows(path, header, rows) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_text(path, text: str) -> None:
    with atomic_write(path) as fh:
        fh.write(text)


def cmd_report(args) -> int:
    _require(args, "model", "shap", "data", "outdir")
    model = BoostedModel.load(args.model)
    ds = load_csv(args.data)
    if ds.schema != model.schema:
        raise EdgeHealthError("data schema differs from model schema")
    explanations = read_shap_csv(args.shap, model.schema)
    names = model.schema.names
    try:
        feature = names.index(args.dependence_feature)
        color = None if args.color_feature == "auto" else names.index(args.color_feature)
    except ValueError as exc:
        raise UsageError(f"unknown feature: {exc}") from None

    weights = weight_importance(model)
    importance = mean_abs_shap(explanations, model.schema)
    swarm = beeswarm_data(explanations, ds)
    dep = dependence_data(explanations, ds, feature, color)
    fname, cname = names[dep.feature], names[dep.color_feature]

    # Build everything in memory first so a failure leaves no partial bundle.
    files = {
        "weight_importance.csv": (
            ["rank", "feature", "split_count"],
            [(k, n, c) for k, (n, c) in enumerate(weights, start=1)],
        ),
        "shap_importance.csv": (
            ["rank", "feature", "mean_abs_shap"],
            [(k, n, repr(v)) for k, (n, v) in enumerate(importance, start=1)],
        ),
        "shap_beeswarm.csv": (
            ["feature", "sample_index", "phi", "normalized_value"],
            [(r.feature, r.sample_index, repr(r.phi), repr(r.normalized_value)) for r in swarm],
        ),
        f"dependence_{fname}.csv": (
            ["sample_index", fname, f"phi_{fname}", f"color_{cname}"],
            [(e.sample_index, repr(x), repr(p), repr(c)) for e, (x, p, c) in zip(explanations, dep.rows)],
        ),
    }
    svgs = {
        "weight_importance.svg": plots.bar_chart(
            "Feature importance (split count)", [n for n, _ in weights], [c for _, c in weights], "split count"
        ),
        "shap_importance.svg": plots.bar_chart(
            "Mean |SHAP value|", [n for n, _ in importance], [v for _, v in importance], "mean |SHAP| (log-odds)"
        ),
        "shap_beeswarm.svg": plots.beeswarm(
            "SHAP value distribution",
            [n for n, _ in importance],
            [(r.feature, r.phi, r.normalized_value) for r in swarm],
            seed=args.seed,
        ),
        f"dependence_{fname}.svg": plots.scatter(
            f"{fname} dependence", dep.rows, fname, f"SHAP value for {fname}", cname
        ),
    }
    outdir = Path(args.outdir)
    for name, (header, rows) in files.items():
        _write_rows(outdir / name, header, rows)
    for name, text in svgs.items():
        _write_text(outdir / name, text)
    _echo_config(args, outdir)
    print(f"wrote {len(files) + len(svgs)} report files to {outdir}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--config", help="JSON file of flag defaults (keys are option names with underscores)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgehealth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic labeled telemetry CSV")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--anomaly-rate", type=float, default=0.3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a boosted model on a labeled CSV")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--out", help="model JSON path")
    p.add_argument("--log", help="per-round log-loss CSV (default: <out>.training_log.csv)")
    d = BoostHyperparams()
    p.add_argument("--trees", type=int, default=d.num_rounds)
    p.add_argument("--max-depth", type=int, default=d.max_depth)
    p.add_argument("--learning-rate", "--eta", type=float, default=d.learning_rate)
    p.add_argument("--reg-lambda", "--lambda", type=float, default=d.reg_lambda)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--min-child-hessian", type=float, default=d.min_child_hessian)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write margins, probabilities and labels")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score the model (and baselines) on labeled data")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data", help="labeled evaluation CSV")
    p.add_argument("--train-data", help="labeled CSV used to fit baselines")
    p.add_argument("--baselines", default="", help="comma list from: knn,nb")
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--model-name", default="GBDT")
    p.add_argument("--external", action="append", metavar="NAME=PATH",
                   help="extra predictions CSV with a 'prediction' column (repeatable)")
    p.add_argument("--outdir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="exact Shapley values per sample")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--background-data", help="CSV to draw background rows from (default: --data)")
    p.add_argument("--background-size", type=int, default=256)
    p.add_argument("--sample", type=int, help="explain only this row index")
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", help="importance, beeswarm and dependence CSV + SVG bundle")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--shap", help="CSV written by the explain command")
    p.add_argument("--data", help="CSV the shap rows index into")
    p.add_argument("--dependence-feature", default="cpu_usage")
    p.add_argument("--color-feature", default="network_latency", help="feature name or 'auto'")
    p.add_argument("--outdir")
    p.set_defaults(func=cmd_report)

    parser._command_parsers = sub.choices
    return parser


def _apply_config(parser, args, argv) -> argparse.Namespace:
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError("--config must hold a JSON object")
    sub = parser._command_parsers[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known - {"command"})
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**{k: v for k, v in cfg.items() if k != "command"})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, args, argv)
        return args.func(args)
    except UsageError as exc:
        parser._command_parsers[args.command].print_usage(sys.stderr)
        print(f"edgehealth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EdgeHealthError, OSError, ValueError) as exc:
        print(f"edgehealth {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
