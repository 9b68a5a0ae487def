"""Batch command-line interface.

Subcommands: preprocess, decompose, select, features, train,
evaluate-within, evaluate-transfer, report.  Any flag may also come from a
JSON config file given with --config; explicit flags override file values.
On failure a machine-readable error record is printed to stderr and the
exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .emd import EemdParams, eemd
from .errors import ChatterDetectError
from .ingest import (
    design_lowpass,
    filter_and_downsample,
    load_manifest,
    load_timeseries,
)
from .ml import make_trainer
from .wavelet import wpt_decompose


def _add_common(p):
    p.add_argument("--config", help="JSON file supplying default flag values")
    p.add_argument("--out", default=".", help="output directory or file")


def build_parser():
    parser = argparse.ArgumentParser(prog="chatterdetect")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="low-pass filter and downsample a recording")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--sample-rate", type=float, required=True)
    p.add_argument("--target-rate", type=float, required=True)
    p.add_argument("--filter-order", type=int, default=100)
    p.add_argument("--cutoff", type=float, default=10000.0)

    p = sub.add_parser("decompose", help="dump wavelet packets or IMFs as CSV")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--sample-rate", type=float, default=10000.0)
    p.add_argument("--method", choices=["wpt", "eemd"], required=True)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--ensemble-size", type=int, default=200)
    p.add_argument("--noise-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)

    for name in ("select", "features"):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--manifest", required=True)
        p.add_argument("--stickout", required=True)
        p.add_argument("--method", choices=["wpt", "eemd"], required=True)
        p.add_argument("--level", type=int, default=4)
        p.add_argument("--window-len", type=int, default=1000)
        p.add_argument("--ensemble-size", type=int, default=200)
        p.add_argument("--noise-fraction", type=float, default=0.2)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", help="fit one classifier on a feature CSV")
    _add_common(p)
    p.add_argument("--features", required=True, help="feature matrix CSV with label column")
    p.add_argument("--classifier", choices=["svm", "logreg", "forest", "boost"],
                   required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate-within")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stickout", required=True)
    p.add_argument("--method", choices=["wpt", "eemd"], required=True)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--window-len", type=int, default=1000)
    p.add_argument("--ensemble-size", type=int, default=200)
    p.add_argument("--noise-fraction", type=float, default=0.2)
    p.add_argument("--classifier", choices=["svm", "logreg", "forest", "boost"],
                   required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--grouped-split", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("evaluate-transfer")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-config", nargs="+", required=True)
    p.add_argument("--test-config", nargs="+", required=True)
    p.add_argument("--method", choices=["wpt", "eemd"], required=True)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--window-len", type=int, default=1000)
    p.add_argument("--ensemble-size", type=int, default=200)
    p.add_argument("--noise-fraction", type=float, default=0.2)
    p.add_argument("--classifier", choices=["svm", "logreg", "forest", "boost"],
                   required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--grouped-split", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="re-emit CSV/text tables from a report JSON")
    _add_common(p)
    p.add_argument("--input", required=True)

    return parser


def _apply_config_file(args):
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        defaults = json.load(fh)
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and args._explicit is not None and attr not in args._explicit:
            setattr(args, attr, value)
    return args


def _explicit_flags(argv):
    return {
        token.lstrip("-").split("=")[0].replace("-", "_")
        for token in argv
        if token.startswith("--")
    }


def _classifier_name(flag):
    return {"logreg": "logistic", "boost": "boosting"}.get(flag, flag)


def _eemd_params(args):
    return EemdParams(
        ensemble_size=args.ensemble_size,
        noise_std_fraction=args.noise_fraction,
        master_seed=args.seed,
    )


def _cmd_preprocess(args):
    ts = load_timeseries(args.input, args.sample_rate)
    filt = design_lowpass(args.filter_order, args.cutoff, args.sample_rate)
    out = filter_and_downsample(ts, filt, args.target_rate)
    path = Path(args.out)
    if path.is_dir():
        path = path / (Path(args.input).stem + "_preprocessed.csv")
    np.savetxt(path, out.samples, delimiter=",")
    print(json.dumps({"output": str(path), "n_samples": int(out.samples.size),
                      "sample_rate_hz": out.sample_rate_hz}))


def _cmd_decompose(args):
    ts = load_timeseries(args.input, args.sample_rate)
    path = Path(args.out)
    if args.method == "wpt":
        tree = wpt_decompose(ts, args.level)
        if path.is_dir():
            path = path / (Path(args.input).stem + "_packets.csv")
        with open(path, "w", encoding="utf-8") as fh:
            for level in range(1, args.level + 1):
                for j in range(1, 2**level + 1):
                    coeffs = ",".join(f"{c:.12g}" for c in tree.packet(level, j))
                    fh.write(f"{level},{j},{coeffs}\n")
    else:
        imfs = eemd(ts.samples, _eemd_params(args))
        if path.is_dir():
            path = path / (Path(args.input).stem + "_imfs.csv")
        cols = [np.asarray(c) for c in imfs.imfs] + [imfs.residue]
        header = ",".join([f"imf{i + 1}" for i in range(imfs.n_imfs)] + ["residue"])
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="")
    print(json.dumps({"output": str(path)}))


def _prepare(args):
    manifest = load_manifest(args.manifest)
    return harness.prepare_from_manifest(
        manifest,
        args.stickout,
        args.method,
        level=args.level,
        window_len=args.window_len,
        eemd_params=_eemd_params(args) if args.method == "eemd" else None,
        n_workers=args.workers,
    )


def _cmd_select(args):
    prepared = _prepare(args)
    chatter_idx = np.flatnonzero(prepared.labels == 1)
    selection = harness._select_on(prepared, chatter_idx)
    record = {"stickout_id": args.stickout, "method": args.method, **selection}
    path = Path(args.out)
    if path.is_dir():
        path = path / f"selection_{args.stickout}_{args.method}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2)
    print(json.dumps({"output": str(path), "index": selection["index"]}))


def _cmd_features(args):
    prepared = _prepare(args)
    all_idx = np.arange(len(prepared.samples))
    chatter_idx = np.flatnonzero(prepared.labels == 1)
    selection = harness._select_on(prepared, chatter_idx)
    X = harness._feature_rows(prepared, all_idx, selection)
    names = harness._feature_names(args.method)
    path = Path(args.out)
    if path.is_dir():
        path = path / f"features_{args.stickout}_{args.method}.csv"
    header = ",".join(list(names) + ["label"])
    np.savetxt(path, np.column_stack([X, prepared.labels]), delimiter=",",
               header=header, comments="")
    print(json.dumps({"output": str(path), "n_samples": int(X.shape[0])}))


def _cmd_train(args):
    table = np.genfromtxt(args.features, delimiter=",", names=True)
    names = list(table.dtype.names)
    y = np.asarray(table["label"], dtype=int)
    X = np.column_stack([table[c] for c in names if c != "label"])
    trainer = make_trainer(_classifier_name(args.classifier), seed=args.seed)
    model = trainer(X, y)
    path = Path(args.out)
    if path.is_dir():
        path = path / f"model_{args.classifier}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)
    train_acc = float(np.mean(model.predict(X) == y))
    print(json.dumps({"output": str(path), "train_accuracy": train_acc}))


def _cmd_evaluate_within(args):
    prepared = _prepare(args)
    spec = harness.ExperimentSpec(
        method=args.method,
        classifier=_classifier_name(args.classifier),
        train_configs=(args.stickout,),
        test_configs=(args.stickout,),
        mode="within",
        level=args.level,
        window_len=args.window_len,
        n_realizations=args.realizations,
        split=harness.WITHIN_SPLIT,
        master_seed=args.seed,
        grouped_split=args.grouped_split,
    )
    report = harness.run_within(spec, prepared)
    path = harness.emit_report(
        report, args.out, f"within_{args.stickout}_{args.method}_{args.classifier}"
    )
    print(json.dumps({"output": str(path), "best": report.best_row()}))


def _cmd_evaluate_transfer(args):
    manifest = load_manifest(args.manifest)
    eemd_params = _eemd_params(args) if args.method == "eemd" else None

    def prep(sid):
        return harness.prepare_from_manifest(
            manifest, sid, args.method, level=args.level,
            window_len=args.window_len, eemd_params=eemd_params,
            n_workers=args.workers,
        )

    combined = len(args.train_config) == 2
    spec = harness.ExperimentSpec(
        method=args.method,
        classifier=_classifier_name(args.classifier),
        train_configs=tuple(args.train_config),
        test_configs=tuple(args.test_config),
        mode="transfer-combined" if combined else "transfer",
        level=args.level,
        window_len=args.window_len,
        n_realizations=args.realizations,
        split=harness.TRANSFER_SPLIT,
        master_seed=args.seed,
        grouped_split=args.grouped_split,
    )
    if combined:
        report = harness.run_transfer_combined(
            spec,
            [prep(s) for s in args.train_config],
            [prep(s) for s in args.test_config],
        )
    else:
        report = harness.run_transfer(
            spec, prep(args.train_config[0]), prep(args.test_config[0])
        )
    tag = "-".join(args.train_config) + "_to_" + "-".join(args.test_config)
    path = harness.emit_report(
        report, args.out, f"transfer_{tag}_{args.method}_{args.classifier}"
    )
    print(json.dumps({"output": str(path), "best": report.best_row()}))


def _cmd_report(args):
    with open(args.input, "r", encoding="utf-8") as fh:
        report = harness.ExperimentReport.from_dict(json.load(fh))
    path = harness.emit_report(report, args.out, Path(args.input).stem)
    print(json.dumps({"output": str(path)}))


_COMMANDS = {
    "preprocess": _cmd_preprocess,
    "decompose": _cmd_decompose,
    "select": _cmd_select,
    "features": _cmd_features,
    "train": _cmd_train,
    "evaluate-within": _cmd_evaluate_within,
    "evaluate-transfer": _cmd_evaluate_transfer,
    "report": _cmd_report,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._explicit = _explicit_flags(argv)
    try:
        args = _apply_config_file(args)
        _COMMANDS[args.command](args)
    except ChatterDetectError as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps(
            {"error": "IOError", "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
