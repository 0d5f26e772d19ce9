"""Command-line entry point: ``infsurv {datagen,train,explain,study,evaluate}``.

Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
Options may also come from ``--config FILE.json`` (keys are option names with
dashes replaced by underscores); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .core import SurvivalDataset, chf_to_sf, concordance_index, nelson_aalen
from .cox import CoxModel, fit_cox
from .datagen import DEFAULT_COEFFICIENTS, GenConfig, generate_cox_weibull, train_test_split
from .dataio import (
    BUILTIN_DATASETS, DatasetSchema, load_builtin, load_csv_report, load_model,
    read_dataset_csv, read_json, report_from_result, save_model, write_dataset_csv,
    write_json, write_report, write_step_svg, _write_atomic,
)
from .errors import SurvivalError
from .evaluation import experiment_report, run_small_n_study
from .explain import ExplainConfig, explain_batch
from .rsf import RSFParams, fit_rsf


class UsageError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _resolved(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "config"):
            continue
        out[k] = v
    out["package_version"] = __version__
    return out


# --------------------------------------------------------------------------
# data sources


def _load_data(args, fallback: dict = None):
    """Dataset from ``--dataset``, ``--data`` (+ ``--schema``) or the model's record."""
    source = {"dataset": args.dataset, "data": args.data, "schema": args.schema}
    if not source["dataset"] and not source["data"] and fallback:
        source = {k: fallback.get(k) for k in source}
    if source["dataset"]:
        dataset, report = load_builtin(source["dataset"])
        return dataset, source, report.to_dict()
    if not source["data"]:
        raise UsageError("give --data PATH or --dataset NAME")
    if source["schema"]:
        schema = DatasetSchema.from_dict(read_json(source["schema"]))
        dataset, report = load_csv_report(source["data"], schema)
        return dataset, source, report.to_dict()
    return read_dataset_csv(source["data"]), source, None


def _standardizer(train: SurvivalDataset, enabled: bool):
    if not enabled:
        return None
    mean = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return {"mean": mean.tolist(), "sd": sd.tolist()}


def _apply(dataset: SurvivalDataset, scaling) -> SurvivalDataset:
    if not scaling:
        return dataset
    return dataset.with_features((dataset.features - np.asarray(scaling["mean"]))
                                 / np.asarray(scaling["sd"]))


def _model_context(args):
    model, meta = load_model(args.model)
    dataset, source, _ = _load_data(args, meta.get("source"))
    dataset = _apply(dataset, meta.get("scaling"))
    if dataset.d != model.d:
        raise UsageError(f"model expects {model.d} features, data has {dataset.d}")
    train_idx = np.asarray(meta.get("train_rows", range(dataset.n)), dtype=np.int64)
    test_idx = np.asarray(meta.get("test_rows", []), dtype=np.int64)
    if train_idx.size and train_idx.max() >= dataset.n:
        raise UsageError("model split does not fit this dataset")
    train = dataset.subset(train_idx)
    baseline = nelson_aalen(train, model.grid)
    return model, meta, dataset, train_idx, test_idx, baseline


def _explain_config(args) -> ExplainConfig:
    return ExplainConfig(n_neighbors=args.n_neighbors, radius=args.radius,
                         epsilon_chf=args.epsilon_chf, seed=args.seed)


def _sf_svg(result, path, title):
    write_step_svg([("black box", chf_to_sf(result.blackbox_chf)),
                    ("surrogate", chf_to_sf(result.surrogate_chf))],
                   path, title=title, y_label="S(t)")


# --------------------------------------------------------------------------
# commands


def cmd_datagen(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    b = args.b_true if args.b_true is not None else (
        list(DEFAULT_COEFFICIENTS) if args.d == 5 else [0.0] * args.d)
    try:
        cfg = GenConfig(n=args.n, d=args.d, b_true=tuple(b), lam=args.lam, v=args.v,
                        sphere_radius=args.sphere_radius, censor_event_prob=args.event_prob,
                        time_cap=args.time_cap, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = args.out or "data.csv"
    write_dataset_csv(generate_cox_weibull(cfg), out)
    write_json(os.path.splitext(out)[0] + ".config.json",
               {"format_version": 1, "generator": cfg.to_dict(), "run": _resolved(args)})
    print(out)
    return 0


def cmd_train(args) -> int:
    dataset, source, load_report = _load_data(args)
    n_test = int(round(args.test_fraction * dataset.n))
    if not 0 <= args.test_fraction < 1:
        raise UsageError("--test-fraction must lie in [0, 1)")
    train_idx, test_idx = train_test_split(dataset.n, n_test, args.seed)
    scaling = _standardizer(dataset.subset(train_idx), args.standardize)
    train = _apply(dataset, scaling).subset(train_idx)
    if args.model == "cox":
        model = fit_cox(train)
    else:
        params = RSFParams(n_trees=args.n_trees, mtry=args.mtry, min_leaf_size=args.min_leaf_size,
                           max_depth=args.max_depth)
        model = fit_rsf(train, params, args.seed)
    meta = {
        "source": source,
        "load_report": load_report,
        "train_rows": train_idx.tolist(),
        "test_rows": test_idx.tolist(),
        "scaling": scaling,
        "run": _resolved(args),
    }
    out = args.out or f"{args.model}.json"
    save_model(model, out, meta)
    print(out)
    return 0


def _rows(args, test_idx, n) -> list:
    if args.rows is not None:
        rows = args.rows
    elif args.rows_file:
        with open(args.rows_file, encoding="utf-8") as fh:
            rows = [int(tok) for tok in fh.read().replace(",", " ").split()]
    else:
        rows = test_idx.tolist()
    if not rows:
        raise UsageError("no rows to explain; give --rows or train with a test split")
    bad = [r for r in rows if not 0 <= r < n]
    if bad:
        raise UsageError(f"rows out of range: {bad}")
    return rows


def cmd_explain(args) -> int:
    model, meta, dataset, _, test_idx, baseline = _model_context(args)
    rows = _rows(args, test_idx, dataset.n)
    results = explain_batch(model, baseline, dataset.features[rows], _explain_config(args), args.method)
    out = args.out or "explanations"
    run = _resolved(args)
    for row, res in zip(rows, results):
        write_report(os.path.join(out, f"report_{row}.json"),
                     report_from_result(res, {"row": int(row), "run": run}))
        if args.plot:
            _sf_svg(res, os.path.join(out, f"sf_{row}.svg"), f"row {row} ({args.method})")
    print(out)
    return 0


def cmd_study(args) -> int:
    result = run_small_n_study(args.sizes, args.n_test, args.repetitions, args.seed,
                               explain_config=ExplainConfig(args.n_neighbors, args.radius,
                                                            args.epsilon_chf, args.seed))
    out = args.out or "study.csv"
    _write_atomic(out, result.to_csv())
    write_json(os.path.splitext(out)[0] + ".detail.json",
               {"format_version": 1, **result.to_dict(), "run": _resolved(args)})
    print(out)
    return 0


def cmd_evaluate(args) -> int:
    model, meta, dataset, train_idx, test_idx, baseline = _model_context(args)
    rows = _rows(args, test_idx, dataset.n)
    test = dataset.subset(rows)
    metrics = {"format_version": 1, "model_type": "cox" if isinstance(model, CoxModel) else "rsf",
               "n_train": int(train_idx.size), "n_test": int(len(rows)), "rows": list(map(int, rows))}
    try:
        metrics["c_index_test"] = concordance_index(model.risk_scores(test.features), test)
    except SurvivalError as exc:
        metrics["c_index_test"] = None
        metrics["c_index_note"] = str(exc)
    results = explain_batch(model, baseline, test.features, _explain_config(args), args.method)
    b_model = model.coefficients if isinstance(model, CoxModel) else None
    b_true = np.asarray(args.b_true) if args.b_true is not None else None
    if b_true is not None and b_true.shape[0] != model.d:
        raise UsageError(f"--b-true needs {model.d} values")
    metrics["explanations"] = experiment_report(results, b_model, b_true)
    if b_model is not None:
        metrics["b_model"] = b_model.tolist()
    out = args.out or "evaluation.json"
    if args.plot:
        stem = os.path.splitext(out)[0]
        for case in ("best", "mean", "worst"):
            i = metrics["explanations"]["selections"][case]
            _sf_svg(results[i], f"{stem}_{case}.svg", f"{case} case, row {rows[i]}")
    metrics["run"] = _resolved(args)
    write_json(out, metrics)
    print(out)
    return 0


# --------------------------------------------------------------------------
# parser


def _add_common(p, default_out):
    p.add_argument("--seed", type=int, default=0, help="root random seed")
    p.add_argument("--out", default=None, help=f"output path (default {default_out})")
    p.add_argument("--config", default=None, help="JSON file of option defaults")


def _add_data(p):
    p.add_argument("--data", default=None, help="dataset CSV (features..., time, event)")
    p.add_argument("--schema", default=None, help="schema JSON for a raw CSV")
    p.add_argument("--dataset", choices=BUILTIN_DATASETS, default=None, help="bundled dataset")


def _add_explain(p):
    p.add_argument("--method", choices=("inf", "l2"), default="inf")
    p.add_argument("--n-neighbors", type=int, default=1000)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--epsilon-chf", type=float, default=1e-8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infsurv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate synthetic Cox-Weibull data")
    _add_common(p, "data.csv")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--b-true", type=_floats, default=None)
    p.add_argument("--lam", type=float, default=1e-5)
    p.add_argument("--v", type=float, default=2.0)
    p.add_argument("--sphere-radius", type=float, default=8.0)
    p.add_argument("--event-prob", type=float, default=0.9)
    p.add_argument("--time-cap", type=float, default=2000.0)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="fit a black-box model")
    _add_common(p, "<model>.json")
    _add_data(p)
    p.add_argument("--model", choices=("cox", "rsf"), required=True)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-leaf-size", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=None)
    p.set_defaults(func=cmd_train)

    for name, func, help_text, out in (
        ("explain", cmd_explain, "explain model predictions", "explanations/"),
        ("evaluate", cmd_evaluate, "score a model and its explanations", "evaluation.json"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p, out)
        _add_data(p)
        _add_explain(p)
        p.add_argument("--model", required=True, help="model JSON from `train`")
        p.add_argument("--rows", type=_ints, default=None, help="row indices (default: test rows)")
        p.add_argument("--rows-file", default=None)
        p.add_argument("--plot", action="store_true", help="write survival-function SVGs")
        if name == "evaluate":
            p.add_argument("--b-true", type=_floats, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("study", help="small-sample comparison of both fits")
    _add_common(p, "study.csv")
    _add_explain(p)
    p.add_argument("--sizes", type=_ints, default=[10, 20, 30, 40])
    p.add_argument("--n-test", type=int, default=10)
    p.add_argument("--repetitions", type=int, default=10)
    p.set_defaults(func=cmd_study)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(overrides, dict):
            parser.error("config file must hold a JSON object")
        sub = next(a for a in parser._subparsers._group_actions
                   if isinstance(a, argparse._SubParsersAction)).choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(overrides) - known - {"command"})
        if unknown:
            parser.error(f"unknown config keys: {unknown}")
        sub.set_defaults(**{k: v for k, v in overrides.items() if k != "command"})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        print(f"infsurv {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (SurvivalError, OSError, ValueError) as exc:
        print(f"infsurv {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
