"""Command-line interface: ``setconv {synth,train,eval,predict}``.

Every flag can also be set through an environment variable named
``SETCONV_`` + the flag in upper case with dashes replaced by underscores
(``--support-size`` -> ``SETCONV_SUPPORT_SIZE``). Command-line flags win.

Exit codes: 0 success, 2 usage error, 3 data/model-file error,
4 model/data incompatibility.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    BinaryClassifier,
    OneVsAllModel,
    binary_logit,
    binary_proba,
    fit_binary,
    multiclass_logits,
    predict_binary_batch,
    predict_multiclass_batch,
    train_one_vs_all,
)
from .data import SynthSpec, generate_synthetic, load_csv, load_features, save_csv, split, write_atomic
from .episodic import TrainConfig
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    EmptyInputError,
    InsufficientDataError,
    ModelFormatError,
    ModelVersionError,
)
from .io import load_model, save_model
from .metrics import MetricsReport, class_report

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_COMPAT = 4

ENV_PREFIX = "SETCONV_"


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse_counts(text: str) -> list[int]:
    try:
        counts = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--counts must be comma-separated integers, got {text!r}") from None
    if not counts:
        raise UsageError("--counts is empty")
    return counts


# -- commands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    counts = _parse_counts(args.counts)
    if args.classes is not None and args.classes != len(counts):
        raise UsageError(f"--classes {args.classes} but {len(counts)} counts given")
    try:
        spec = SynthSpec.separated(counts, args.dim, args.sep, std=args.std, seed=args.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    ds = generate_synthetic(spec)
    save_csv(ds, args.out, args.label_col)
    for c, n in ds.class_counts().items():
        print(f"class {c}: {n}")
    print(f"n={ds.n} d={ds.d} IR {ds.imbalance_ratio():.2f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    try:
        return TrainConfig(
            support_size=args.support_size,
            iterations=args.iterations,
            learning_rate=args.lr,
            hidden=args.hidden,
            d_out=args.d_out,
            seed=args.seed,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    config = _train_config(args)
    ds = load_csv(args.data, args.label_col)
    n_classes = len(ds.classes)
    if args.mode == "binary" and n_classes != 2:
        raise UsageError(f"binary mode needs exactly 2 classes, {args.data} has {n_classes}")
    if args.mode == "multiclass" and n_classes < 2:
        raise UsageError("multiclass mode needs at least 2 classes")
    try:
        train_ds, _, train_idx, test_idx = split(ds, args.split_ratio, seed=args.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None

    if args.mode == "binary":
        model, losses = fit_binary(train_ds, config, args.s_post)
        log_header = ["iteration", "loss"]
        log_rows = [(i, float(v)) for i, v in enumerate(losses)]
        final = losses[-1] if losses else None
    else:
        model, logs = train_one_vs_all(train_ds, config, args.s_post)
        log_header = ["class", "iteration", "loss"]
        log_rows = [(c, i, float(v)) for c, ls in zip(model.labels, logs) for i, v in enumerate(ls)]
        final = float(np.mean([ls[-1] for ls in logs])) if config.iterations else None

    model.metadata = {
        "mode": args.mode,
        "label_column": args.label_col,
        "feature_names": list(ds.feature_names or ()),
        "data_file": Path(args.data).name,
        "data_sha256": _sha256(args.data),
        "n_rows": ds.n,
        "split_ratio": args.split_ratio,
        "train_index": train_idx.tolist(),
        "test_index": test_idx.tolist(),
        "s_post": args.s_post,
        "config": {
            "support_size": config.support_size,
            "iterations": config.iterations,
            "learning_rate": config.learning_rate,
            "adam_beta1": config.adam_beta1,
            "adam_beta2": config.adam_beta2,
            "adam_epsilon": config.adam_epsilon,
            "hidden": config.hidden,
            "d_out": config.d_out,
            "seed": config.seed,
        },
        "library_version": __version__,
    }
    save_model(model, args.model_out)
    log_out = args.log_out or f"{args.model_out}.loss.csv"
    write_atomic(log_out, _csv_text(log_header, log_rows))
    print(f"wrote {args.model_out} and {log_out}")
    if final is None:
        print("final training loss: n/a (0 iterations)")
    else:
        print(f"final training loss: {final:.6f}")
    return EXIT_OK


def _check_dim(model, d: int) -> None:
    md = model.model.d if isinstance(model, BinaryClassifier) else model.d
    if md != d:
        raise DimensionError(f"model expects {md} features, data has {d}")


def _select_rows(model, ds, subset: str, data_path):
    if subset == "all":
        return ds
    meta = model.metadata or {}
    key = f"{subset}_index"
    if key not in meta:
        raise UsageError(f"model file records no {subset} partition; use --subset all")
    if meta.get("n_rows") != ds.n or meta.get("data_sha256") not in (None, _sha256(data_path)):
        raise DimensionError(
            f"{data_path} is not the file this model was trained on; use --subset all"
        )
    return ds.subset(np.asarray(meta[key], dtype=np.int64))


def evaluate(model, ds) -> list[MetricsReport]:
    """Per-class reports. AUC uses each class's log-odds as its score."""
    if isinstance(model, BinaryClassifier):
        m = model.model
        pred = predict_binary_batch(ds.features, m, model.reps)
        z = binary_logit(ds.features, m, model.reps)
        scores = {m.minority_label: z, m.majority_label: -z}
        labels = sorted(scores)
    else:
        pred, _ = predict_multiclass_batch(ds.features, model)
        logits = multiclass_logits(ds.features, model)
        scores = {c: logits[:, i] for i, c in enumerate(model.labels)}
        labels = list(model.labels)
    return [class_report(ds.labels, pred, scores[c], c) for c in labels]


def _report_table(reports: list[MetricsReport]) -> str:
    lines = [f"{'class':>5} {'n':>6} {'Spec':>7} {'Sens':>7} {'F1':>7} {'G-Mean':>7} {'AUC':>7}"]
    for r in reports:
        auc = "   n/a" if r.auc is None else f"{r.auc:7.4f}"
        lines.append(
            f"{r.label:>5} {r.support:>6} {r.spec:7.4f} {r.sens:7.4f} {r.f1:7.4f} {r.g_mean:7.4f} {auc}"
        )
    return "\n".join(lines)


def cmd_eval(args) -> int:
    model = load_model(args.model)
    label_col = args.label_col or (model.metadata or {}).get("label_column", "label")
    ds = load_csv(args.data, label_col)
    _check_dim(model, ds.d)
    ds = _select_rows(model, ds, args.subset, args.data)
    reports = evaluate(model, ds)
    print(_report_table(reports))
    text = _csv_text(MetricsReport.FIELDS, [[r.as_row()[k] for k in MetricsReport.FIELDS] for r in reports])
    if args.report_out:
        write_atomic(args.report_out, text)
        print(f"wrote {args.report_out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    label_col = args.label_col or (model.metadata or {}).get("label_column", "label")
    x = load_features(args.data, drop_column=label_col)
    _check_dim(model, x.shape[1])
    if isinstance(model, BinaryClassifier):
        m = model.model
        p = binary_proba(x, m, model.reps)
        labels = predict_binary_batch(x, m, model.reps)
        by_label = {m.majority_label: p[:, 0], m.minority_label: p[:, 1]}
        classes = sorted(by_label)
        scores = np.column_stack([by_label[c] for c in classes])
    else:
        labels, scores = predict_multiclass_batch(x, model)
        classes = list(model.labels)
    header = ["row", "label", *(f"score_{c}" for c in classes)]
    rows = [(i, int(lab), *(float(s) for s in sc)) for i, (lab, sc) in enumerate(zip(labels, scores))]
    text = _csv_text(header, rows)
    if args.out:
        write_atomic(args.out, text)
        print(f"wrote {len(rows)} predictions to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setconv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic Gaussian dataset")
    s.add_argument("--classes", type=int)
    s.add_argument("--counts", required=True, help="per-class sizes, e.g. 900,100")
    s.add_argument("--dim", type=int, default=16)
    s.add_argument("--sep", type=float, default=4.0, help="distance between class means, in std units")
    s.add_argument("--std", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--label-col", default="label")
    s.add_argument("--out", default="data.csv")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="split, train and post-train a model")
    t.add_argument("--data", required=True)
    t.add_argument("--label-col", default="label")
    t.add_argument("--mode", choices=("binary", "multiclass"), default="binary")
    t.add_argument("--support-size", type=int, default=64)
    t.add_argument("--d-out", type=int, default=128)
    t.add_argument("--hidden", type=int, default=128)
    t.add_argument("--iterations", type=int, default=2000)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--s-post", type=int, default=1000)
    t.add_argument("--split-ratio", type=float, default=0.7)
    t.add_argument("--model-out", default="model.json")
    t.add_argument("--log-out", help="loss log CSV (default: <model-out>.loss.csv)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="per-class metrics of a model on labelled data")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--label-col", help="default: the column the model was trained with")
    e.add_argument("--subset", choices=("test", "train", "all"), default="test",
                   help="rows to evaluate; test/train use the partition recorded at training time")
    e.add_argument("--report-out")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="label unlabelled feature rows")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--label-col", help="column to ignore if present")
    r.add_argument("--out")
    r.set_defaults(func=cmd_predict)

    for sp in (s, t, e, r):
        _apply_env_defaults(sp)
    return p


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        var = ENV_PREFIX + action.dest.upper()
        if var in os.environ:
            raw = os.environ[var]
            value = action.type(raw) if action.type else raw
            if action.choices and value not in action.choices:
                parser.error(f"{var}={raw!r} is not one of {list(action.choices)}")
            action.default = value
            action.required = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValueError as exc:  # bad env override type
        print(f"setconv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"setconv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DimensionError, ModelVersionError) as exc:
        print(f"setconv {args.command}: incompatible: {exc}", file=sys.stderr)
        return EXIT_COMPAT
    except (DataError, ModelFormatError, EmptyInputError, InsufficientDataError, FileNotFoundError) as exc:
        print(f"setconv {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"setconv {args.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
