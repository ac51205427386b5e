"""Command-line interface.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out``.
Errors are reported on stderr as one JSON object
``{"error": <category>, "message": ...}`` with a nonzero exit status:
2 usage, 3 invalid input, 4 insufficient trees, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InsufficientTreesError, NumericError, OOBError
from .fileio import (
    MatrixBundle,
    RunManifest,
    load_bundle,
    load_csv,
    read_records,
    save_bundle,
    split_train_test,
    write_records,
    write_rows,
)
from .forest import (
    ForestConfig,
    Task,
    default_threads,
    load_model,
    predict,
    save_model,
    train_forest,
    tree_prediction_matrix,
)
from .intervals import Method, Transform, build_interval
from .oob import default_loss
from .se import Variant, se_report
from .sim import SETTING_KEYS, SimConfig, coverage_report, run_simulation, sd_curve

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_TREES = 4
EXIT_NUMERIC = 5

log = logging.getLogger("oobci")


class UsageError(Exception):
    pass


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $OOBCI_THREADS or 1); results do not depend on it")
    p.add_argument("--out", default="oobci-out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="oobci",
        description="Random-forest OOB error with naive, delta-method and jackknife-after-bootstrap SEs.",
    )
    parser.add_argument("--version", action="version", version=f"oobci {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="grow a forest on a CSV dataset")
    p.add_argument("--data", required=True, help="CSV file with header")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--task", choices=[t.value for t in Task], default="regression")
    p.add_argument("--B", type=int, default=3000, help="number of trees")
    p.add_argument("--mtry", type=int)
    p.add_argument("--min-node-size", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--train-fraction", type=float,
                   help="hold out a random test set; e.g. 0.25 keeps 25%% for training")
    _common(p)

    p = sub.add_parser("se", help="OOB error and its standard errors")
    p.add_argument("--model", help="model file written by 'fit'")
    p.add_argument("--bundle", help="matrix bundle CSV (per-tree predictions + inbag counts)")
    p.add_argument("--task", choices=[t.value for t in Task],
                   help="task for bundles without a JSON sidecar")
    p.add_argument("--loss", choices=["square", "abs", "deviance"],
                   help="regression loss (default square); classification uses misclassification")
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.SAMPLE_AVERAGE.value)
    _common(p)

    p = sub.add_parser("ci", help="confidence intervals from an SE report or given values")
    p.add_argument("--report", help="se.json written by 'se'")
    p.add_argument("--err", type=float)
    p.add_argument("--se-naive", type=float)
    p.add_argument("--se-delta", type=float)
    p.add_argument("--se-jab", type=float)
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--transform", default="identity",
                   help="identity, log, sqrt, a comma list, or 'all'")
    p.add_argument("--method", default="all", help="naive, delta, delta_plus, jab, a comma list, or 'all'")
    _common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo coverage replicates")
    p.add_argument("--n", type=int, default=110)
    p.add_argument("--p", default="10", help="comma list of feature counts")
    p.add_argument("--snr", default="2", help="comma list of signal-to-noise ratios")
    p.add_argument("--task", choices=[t.value for t in Task], default="regression")
    p.add_argument("--B", type=int, default=3000)
    p.add_argument("--R", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=11_000)
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--transforms", default="identity")
    p.add_argument("--base-rate", type=float, default=0.25)
    _common(p)

    p = sub.add_parser("coverage", help="aggregate replicate records into a coverage report")
    p.add_argument("--records", required=True, nargs="+", help="records CSV file(s)")
    _common(p)

    p = sub.add_parser("sd-curve", help="SE estimates relative to the SD of the OOB error, across B")
    p.add_argument("--n", type=int, default=110)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--snr", type=float, default=2.0)
    p.add_argument("--task", choices=[t.value for t in Task], default="regression")
    p.add_argument("--B-grid", default="200,500,1000,2000,4000")
    p.add_argument("--R", type=int, default=100)
    _common(p)
    return parser


def _list_option(text, enum_cls):
    if str(text).lower() == "all":
        return list(enum_cls)
    return [enum_cls.parse(v.strip()) for v in str(text).split(",") if v.strip()]


def cmd_fit(args, out: Path, manifest: RunManifest):
    data = load_csv(args.data, args.response, args.task)
    manifest.add_input(args.data)
    test = None
    if args.train_fraction is not None:
        data, test = split_train_test(data, args.train_fraction, args.seed)
    cfg = ForestConfig(B=args.B, mtry=args.mtry, min_node_size=args.min_node_size,
                       max_depth=args.max_depth, seed=args.seed)
    model = train_forest(data, cfg, threads=args.threads)
    save_model(model, out / "model.npz")
    P = tree_prediction_matrix(model)
    save_bundle(MatrixBundle(P, model.inbag, data.y, data.task), out / "bundle.csv")
    rep = se_report(P, model.inbag, data.y, data.task)
    summary = {"n_train": data.n, "p": data.p, "task": data.task.value,
               "config": model.config.to_dict(), **rep.summary()}
    if test is not None:
        loss = default_loss(data.task)
        summary["n_test"] = test.n
        summary["test_error"] = float(np.mean(loss(test.y, predict(model, test.X))))
    _dump_json(summary, out / "fit.json")
    manifest.config = {"B": args.B, "response": args.response, "task": args.task,
                       "train_fraction": args.train_fraction, "forest": model.config.to_dict()}
    manifest.outputs = ["model.npz", "bundle.csv", "bundle.json", "fit.json"]
    return summary


def cmd_se(args, out: Path, manifest: RunManifest):
    if bool(args.model) == bool(args.bundle):
        raise UsageError("give exactly one of --model or --bundle")
    if args.model:
        model = load_model(args.model)
        manifest.add_input(args.model)
        if model.data is None:
            raise UsageError("model file carries no training data")
        P, N, y, task = tree_prediction_matrix(model), model.inbag, model.data.y, model.task
    else:
        bundle = load_bundle(args.bundle, args.task)
        manifest.add_input(args.bundle)
        P, N, y, task = bundle.P, bundle.N, bundle.y, bundle.task
    if task is Task.CLASSIFICATION and args.loss not in (None, "square"):
        raise UsageError("classification forests use the misclassification loss; drop --loss")
    loss = None if task is Task.CLASSIFICATION else (args.loss or "square")
    rep = se_report(P, N, y, task, loss, args.variant)
    summary = rep.summary()
    summary["B"] = int(P.shape[1])
    _dump_json(summary, out / "se.json")
    rows = [
        {"row": i, "y": float(y[i]), "oob_pred": float(rep.oob_pred[i]),
         "loss": float(rep.per_obs_loss[i]), "influence": float(rep.influence.D[i]),
         "loo_error": float(rep.loo_errors[i])}
        for i in range(len(y))
    ]
    write_rows(rows, out / "influence.csv")
    manifest.config = {"loss": rep.loss.value, "variant": args.variant, "task": task.value}
    manifest.outputs = ["se.json", "influence.csv"]
    return summary


def cmd_ci(args, out: Path, manifest: RunManifest):
    direct = [args.err, args.se_naive, args.se_delta, args.se_jab]
    if args.report and any(v is not None for v in direct):
        raise UsageError("--report conflicts with --err/--se-* values")
    if args.report:
        rep = json.loads(Path(args.report).read_text())
        manifest.add_input(args.report)
        err = rep["err_oob"]
        ses = {"naive": rep["se_naive"], "delta": rep["se_delta"], "jab": rep["se_jab"]}
    else:
        if args.err is None:
            raise UsageError("give --report or --err with --se-* values")
        err = args.err
        ses = {"naive": args.se_naive, "delta": args.se_delta, "jab": args.se_jab}
    if ses["naive"] is not None and ses["delta"] is not None:
        ses["delta_plus"] = max(ses["naive"], ses["delta"])
    else:
        ses["delta_plus"] = None
    methods = _list_option(args.method, Method)
    transforms = _list_option(args.transform, Transform)
    rows = []
    for m in methods:
        se = ses[m.value]
        if se is None:
            if args.method == "all":
                continue
            need = "--se-naive and --se-delta" if m is Method.DELTA_PLUS else f"--se-{m.value}"
            raise UsageError(f"method {m.value} needs {need}")
        for t in transforms:
            ci = build_interval(err, se, args.alpha, t, m)
            rows.append({"method": m.value, "transform": t.value, "alpha": args.alpha,
                         "err_oob": float(err), "se": float(se), "lo": ci.lo, "hi": ci.hi})
    if not rows:
        raise UsageError("no standard errors given")
    write_rows(rows, out / "intervals.csv")
    _dump_json({"intervals": rows}, out / "intervals.json")
    manifest.config = {"alpha": args.alpha, "methods": [m.value for m in methods],
                       "transforms": [t.value for t in transforms]}
    manifest.outputs = ["intervals.csv", "intervals.json"]
    return {"intervals": rows}


def _report_rows(cells):
    return [c.as_row(SETTING_KEYS) for c in cells]


def cmd_simulate(args, out: Path, manifest: RunManifest):
    transforms = _list_option(args.transforms, Transform)
    records = []
    configs = []
    for p in _ints(args.p):
        for snr in _floats(args.snr):
            cfg = SimConfig(n=args.n, p=p, snr=snr, task=args.task, B=args.B, R=args.R,
                            n_test=args.n_test, alpha=args.alpha, transforms=transforms,
                            seed=args.seed, base_rate=args.base_rate)
            configs.append(cfg.setting())
            records.extend(run_simulation(cfg, threads=args.threads))
    write_records(records, out / "records.csv")
    rows = _report_rows(coverage_report(records))
    _dump_json({"settings": configs, "report": rows}, out / "summary.json")
    manifest.config = {"settings": configs, "R": args.R, "n_test": args.n_test,
                       "base_rate": args.base_rate, "transforms": [t.value for t in transforms]}
    manifest.outputs = ["records.csv", "summary.json"]
    return {"replicates": len(records), "report": rows}


def cmd_coverage(args, out: Path, manifest: RunManifest):
    records = []
    for path in args.records:
        records.extend(read_records(path))
        manifest.add_input(path)
    rows = _report_rows(coverage_report(records))
    write_rows(rows, out / "report.csv")
    _dump_json({"report": rows}, out / "report.json")
    manifest.config = {"records": len(records)}
    manifest.outputs = ["report.csv", "report.json"]
    return {"report": rows}


def cmd_sd_curve(args, out: Path, manifest: RunManifest):
    grid = _ints(args.B_grid)
    cfg = SimConfig(n=args.n, p=args.p, snr=args.snr, task=args.task, B=max(grid), R=args.R,
                    n_test=1, seed=args.seed)
    points = sd_curve(cfg, grid, threads=args.threads)
    rows = [{"B": pt.B, "method": pt.method, "mean_se": pt.mean_se,
             "se_of_mean_se": pt.se_of_mean_se, "sd_err_oob": pt.sd_err_oob,
             "ratio": pt.ratio, "ratio_se": pt.ratio_se} for pt in points]
    write_rows(rows, out / "sd_curve.csv")
    manifest.config = {**cfg.setting(), "B_grid": grid, "R": args.R}
    manifest.outputs = ["sd_curve.csv"]
    return {"curve": rows}


COMMANDS = {
    "fit": cmd_fit,
    "se": cmd_se,
    "ci": cmd_ci,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "sd-curve": cmd_sd_curve,
}


def _fail(category, message, code):
    print(json.dumps({"error": category, "message": str(message)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is None:
        args.threads = default_threads()
    out = Path(args.out)
    manifest = RunManifest(command=args.command, argv=argv, config={}, seed=args.seed)
    try:
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](args, out, manifest)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except InsufficientTreesError as exc:
        return _fail(exc.category, exc, EXIT_TREES)
    except NumericError as exc:
        return _fail(exc.category, exc, EXIT_NUMERIC)
    except OOBError as exc:
        return _fail(exc.category, exc, EXIT_INPUT)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail("input", exc, EXIT_INPUT)
    manifest.write(out / "manifest.json")
    print(json.dumps(result, indent=2, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
