"""Command-line surface: simulate | autocode | fit | estimate | benchmark.

Exit codes: 0 success, 2 usage/config error, 3 data or statistical error
(empty arm, degenerate targets, empty mask selection).  Diagnostics go
to stderr; with --json the estimate/benchmark payload goes to stdout as
machine-readable JSON.  TEXTCAUSAL_THREADS caps benchmark parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import autocoder, metalearners, simulator, textnet
from .learners import DegenerateTargetError, GbdtParams, LearnerSpec, LogisticParams
from .metalearners import CausalModel, CausalSpec, PositivityError
from .tabular import ColumnKind, ParseError, SchemaError, Table, load_csv
from .vectorizer import tokenize

CONFIG_ERRORS = (FileNotFoundError, json.JSONDecodeError, KeyError)
DATA_ERRORS = (
    PositivityError,
    DegenerateTargetError,
    autocoder.ScoringError,
    SchemaError,
    ParseError,
)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_col_types(pairs: list[str] | None) -> dict[str, ColumnKind]:
    hints = {}
    for pair in pairs or []:
        name, _, kind = pair.partition(":")
        if not kind:
            raise CliError(f"--col-type expects name:kind, got {pair!r}", 2)
        try:
            hints[name] = ColumnKind(kind.lower())
        except ValueError:
            raise CliError(f"unknown column kind {kind!r}", 2) from None
    return hints


def _load_table(args) -> Table:
    return load_csv(args.data, type_hints=_parse_col_types(getattr(args, "col_type", None)))


# ------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    spec = simulator.SimulationSpec.load(args.config)
    if args.seed is not None:
        spec = simulator.SimulationSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    table, truth = simulator.simulate(spec)
    table.to_csv(args.out)
    truth.save(args.truth)
    print(f"wrote {table.n_rows} rows to {args.out}; truth to {args.truth}", file=sys.stderr)
    return 0


# ------------------------------------------------------------- autocode


def cmd_autocode(args) -> int:
    table = _load_table(args)
    texts = [v or "" for v in table.column(args.text_col).values]
    lexicon = autocoder.Lexicon.load(args.lexicon) if args.lexicon else None
    if args.coder == "sentiment":
        table = autocoder.code_sentiment(texts, table, lexicon=lexicon, prefix=args.prefix)
        score_cols = [args.prefix + "positive"]
    elif args.coder == "emotion":
        table = autocoder.code_emotion(texts, table, lexicon=lexicon, prefix=args.prefix)
        score_cols = []
    else:
        if not args.labels:
            raise CliError("--coder topics requires --labels", 2)
        if lexicon is None:
            raise CliError("--coder topics requires --lexicon with [label] term sets", 2)
        labels = args.labels.split(",")
        keyword_map = {lbl: set(lexicon.weights.get(lbl, {})) for lbl in labels}
        table = autocoder.code_custom_topics(texts, table, labels, keyword_map, prefix=args.prefix)
        score_cols = [args.prefix + lbl for lbl in labels]
    if args.binarize is not None:
        for col in score_cols:
            table = autocoder.binarize(table, col, args.binarize)
    table.to_csv(args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


# ------------------------------------------------------------------ fit


def _learner_spec_from_args(args, kind: str) -> LearnerSpec:
    return LearnerSpec(
        kind=kind,
        logistic=LogisticParams(
            penalty=args.penalty, C=args.C, fit_intercept=not args.no_intercept
        ),
        gbdt=GbdtParams(
            num_leaves=args.num_leaves,
            min_child_samples=args.min_child_samples,
            min_child_weight=args.min_child_weight,
            colsample_bytree=args.colsample_bytree,
            subsample=args.subsample,
            reg_alpha=args.reg_alpha,
            reg_lambda=args.reg_lambda,
            learning_rate=args.learning_rate,
            n_rounds=args.n_rounds,
        ),
        seed=args.seed,
    )


def cmd_fit(args) -> int:
    table = _load_table(args)
    include = args.include_cols.split(",") if args.include_cols else []
    if args.method == "textnet":
        spec = textnet.TextNetSpec(
            embed_dim=args.embed_dim,
            learning_rate=args.textnet_lr,
            epochs=args.epochs,
            batch_size=args.batch_size,
            q_weight=args.q_weight,
            seed=args.seed,
        )
        params = textnet.train(
            table, args.text_col, include, args.treatment_col, args.outcome_col, spec
        )
        params.save(args.out)
    else:
        cspec = CausalSpec(
            method=args.method,
            treatment_col=args.treatment_col,
            outcome_col=args.outcome_col,
            include_cols=tuple(include),
            text_col=args.text_col,
            ignore_cols=tuple(args.ignore_cols.split(",")) if args.ignore_cols else (),
            learner=_learner_spec_from_args(args, args.learner),
            seed=args.seed,
        )
        model = metalearners.fit(table, cspec)
        model.save(args.out)
    print(f"wrote model to {args.out}", file=sys.stderr)
    return 0


# ------------------------------------------------------------- estimate


def _text_mask(table: Table, text_col: str, needle: str) -> np.ndarray:
    texts = [v or "" for v in table.column(text_col).values]
    return np.array([needle in s for s in texts])


def cmd_estimate(args) -> int:
    with open(args.model, encoding="utf-8") as f:
        bundle = json.load(f)
    table = _load_table(args)
    t0 = time.perf_counter()
    if "embeddings" in bundle:  # textnet bundle
        params = textnet.TextNetParams.load(args.model)
        mask = None
        desc = "all rows"
        if args.where_text_contains is not None:
            mask = _text_mask(table, params.text_col, args.where_text_contains)
            desc = f"text contains {args.where_text_contains!r}"
        est = textnet.estimate_ate(
            params, table, params.text_col, mask=mask, bootstrap=args.bootstrap, mask_desc=desc
        )
    else:
        model = CausalModel.load(args.model)
        mask = None
        desc = "all rows"
        if args.where_text_contains is not None:
            if model.spec.text_col is None:
                raise CliError("--where-text-contains requires a model fit with a text column", 2)
            mask = _text_mask(table, model.spec.text_col, args.where_text_contains)
            desc = f"text contains {args.where_text_contains!r}"
        est = metalearners.estimate_ate(
            model, table, mask=mask, bootstrap=args.bootstrap, mask_desc=desc
        )
    # timing goes to stderr so the JSON estimate is byte-stable per seed
    print(f"estimated in {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    out = json.dumps(est.to_dict(), sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out + "\n")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(out)
    return 0


# ------------------------------------------------------------ benchmark


def default_benchmark_config(n: int = 5000, seeds=None) -> dict:
    """The Table-2-style harness configuration on the reference setting."""
    # moderate regularization for the per-arm T models; heavier, tuned-style
    # settings for the X/R stages, which otherwise saturate the propensity
    gbdt_t = {"kind": "gbdt", "gbdt": {"num_leaves": 16, "n_rounds": 100,
                                       "min_child_samples": 400, "min_child_weight": 40.0,
                                       "reg_alpha": 5.0, "reg_lambda": 50.0}}
    gbdt_xr = {"kind": "gbdt", "gbdt": {"num_leaves": 100, "n_rounds": 100,
                                        "min_child_samples": 59, "min_child_weight": 100.0,
                                        "colsample_bytree": 0.59, "subsample": 0.64,
                                        "reg_alpha": 10.0, "reg_lambda": 100.0}}
    propensity = {"kind": "logistic", "logistic": {"penalty": "l2", "C": 0.1}}
    return {
        "simulation": simulator.reference_spec(n=n).to_dict(),
        "seeds": list(seeds if seeds is not None else range(10)),
        "autocoder": {"coder": "sentiment", "threshold": 0.5},
        "treatment_col": "positive_bin",
        "outcome_col": "Y_sim",
        "include_cols": ["C_true"],
        "text_col": "text",
        "bootstrap": 0,
        "methods": [
            {"name": "S-Learner w/ logistic-L1", "method": "s",
             "learner": {"kind": "logistic", "logistic": {"penalty": "l1", "C": 0.1}}},
            {"name": "T-Learner w/ GBDT", "method": "t", "learner": gbdt_t},
            {"name": "X-Learner w/ GBDT", "method": "x", "learner": gbdt_xr,
             "propensity": propensity},
            {"name": "R-Learner w/ GBDT", "method": "r", "learner": gbdt_xr,
             "propensity": propensity},
            {"name": "TextNet", "method": "textnet",
             "textnet": {"embed_dim": 32, "learning_rate": 0.25, "epochs": 20,
                         "batch_size": 32, "q_weight": 0.1}},
        ],
    }


def _autocode_treatment(table: Table, config: dict) -> Table:
    ac = config.get("autocoder", {"coder": "sentiment", "threshold": 0.5})
    texts = [v or "" for v in table.column(config.get("text_col", "text")).values]
    if ac["coder"] != "sentiment":
        raise ValueError("benchmark harness supports the sentiment coder")
    table = autocoder.code_sentiment(texts, table)
    return autocoder.binarize(table, "positive", ac.get("threshold", 0.5))


def run_benchmark_cell(config: dict, seed: int, method_cfg: dict) -> dict:
    """simulate -> autocode -> fit -> estimate for one (seed, method) pair."""
    sim_spec = simulator.SimulationSpec.from_dict({**config["simulation"], "seed": seed})
    table, truth = simulator.simulate(sim_spec)
    table = _autocode_treatment(table, config)
    tcol = config.get("treatment_col", "positive_bin")
    ycol = config.get("outcome_col", "Y_sim")
    include = config.get("include_cols", ["C_true"])
    text_col = config.get("text_col", "text")
    bootstrap = config.get("bootstrap", 0)
    t0 = time.perf_counter()
    if method_cfg["method"] == "textnet":
        tn_spec = textnet.TextNetSpec(**{**method_cfg.get("textnet", {}), "seed": seed})
        params = textnet.train(table, text_col, include, tcol, ycol, tn_spec)
        est = textnet.estimate_ate(params, table, text_col, bootstrap=bootstrap)
    else:
        cspec = CausalSpec(
            method=method_cfg["method"],
            treatment_col=tcol,
            outcome_col=ycol,
            include_cols=tuple(include),
            text_col=text_col,
            learner=LearnerSpec.from_dict(method_cfg.get("learner", {})),
            effect_learner=(
                LearnerSpec.from_dict(method_cfg["effect_learner"])
                if method_cfg.get("effect_learner")
                else None
            ),
            propensity=LearnerSpec.from_dict(
                method_cfg.get("propensity", {"kind": "logistic"})
            ),
            seed=seed,
        )
        model = metalearners.fit(table, cspec)
        est = metalearners.estimate_ate(model, table, bootstrap=bootstrap)
    runtime = time.perf_counter() - t0
    return {
        "seed": seed,
        "method": method_cfg["name"],
        "ate": est.ate,
        "oracle": truth.ate_true,
        "delta": abs(est.ate - truth.ate_true),
        "runtime_seconds": runtime,
    }


def _naive_cell(config: dict, seed: int) -> dict:
    sim_spec = simulator.SimulationSpec.from_dict({**config["simulation"], "seed": seed})
    table, truth = simulator.simulate(sim_spec)
    table = _autocode_treatment(table, config)
    est = metalearners.naive_ate(
        table, config.get("treatment_col", "positive_bin"), config.get("outcome_col", "Y_sim"),
        bootstrap=0,
    )
    return {
        "seed": seed,
        "method": "Naive",
        "ate": est.ate,
        "oracle": truth.ate_true,
        "delta": abs(est.ate - truth.ate_true),
        "runtime_seconds": 0.0,
    }


def run_benchmark(config: dict) -> dict:
    """Run all (seed, method) cells and aggregate a Table-2-style report."""
    seeds = config["seeds"]
    methods = config["methods"]
    cells = [("naive", seed, None) for seed in seeds]
    cells += [(m["name"], seed, m) for m in methods for seed in seeds]

    def run_cell(cell):
        name, seed, mcfg = cell
        try:
            if mcfg is None:
                return _naive_cell(config, seed)
            return run_benchmark_cell(config, seed, mcfg)
        except Exception as exc:  # record and keep going
            return {"seed": seed, "method": name if mcfg is None else mcfg["name"],
                    "error": f"{type(exc).__name__}: {exc}"}

    threads = int(os.environ.get("TEXTCAUSAL_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    oracle_vals = [r["oracle"] for r in results if "oracle" in r]
    oracle_mean = float(np.mean(oracle_vals)) if oracle_vals else float("nan")
    rows = [{"method": "Oracle (ground truth)", "ate": oracle_mean, "delta": 0.0,
             "runtime_seconds": 0.0, "errors": 0}]

    def aggregate(name):
        ok = [r for r in results if r["method"] == name and "error" not in r]
        bad = [r for r in results if r["method"] == name and "error" in r]
        if not ok:
            return {"method": name, "ate": float("nan"), "delta": float("nan"),
                    "runtime_seconds": float("nan"), "errors": len(bad)}
        return {
            "method": name,
            "ate": float(np.mean([r["ate"] for r in ok])),
            "delta": float(np.mean([r["delta"] for r in ok])),
            "runtime_seconds": float(np.mean([r["runtime_seconds"] for r in ok])),
            "errors": len(bad),
        }

    rows.append(aggregate("Naive"))
    method_rows = sorted(
        (aggregate(m["name"]) for m in methods),
        key=lambda r: (np.isnan(r["delta"]), r["delta"]),
    )
    rows.extend(method_rows)
    return {"rows": rows, "cells": results, "oracle_mean": oracle_mean}


def format_report(report: dict) -> str:
    """Aligned text table; effect columns are scaled x100 for readability."""
    header = f"{'Method':<28} {'ATE Estimate':>12} {'Delta from Oracle':>18} {'Time (s)':>9}"
    lines = [header, "-" * len(header)]
    for row in report["rows"]:
        ate = "-" if np.isnan(row["ate"]) else f"{100 * row['ate']:.2f}"
        delta = "-" if np.isnan(row["delta"]) else f"{100 * row['delta']:.2f}"
        rt = "-" if row["method"].startswith(("Oracle", "Naive")) else f"{row['runtime_seconds']:.2f}"
        err = f"  [{row['errors']} failed]" if row.get("errors") else ""
        lines.append(f"{row['method']:<28} {ate:>12} {delta:>18} {rt:>9}{err}")
    return "\n".join(lines)


def cmd_benchmark(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            config = json.load(f)
    else:
        config = default_benchmark_config(n=args.n, seeds=range(args.seeds))
    report = run_benchmark(config)
    text = format_report(report)
    if args.out:
        with open(args.out + ".json", "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
        with open(args.out + ".txt", "w", encoding="utf-8") as f:
            f.write(text + "\n")
        print(f"wrote {args.out}.json and {args.out}.txt", file=sys.stderr)
    if args.json:
        print(json.dumps(report["rows"]))
    else:
        print(text)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textcausal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a semi-synthetic dataset")
    p.add_argument("--config", required=True, help="SimulationSpec JSON file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--truth", required=True, help="output truth JSON path")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("autocode", help="derive columns from a text column")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--text-col", default="text")
    p.add_argument("--coder", choices=["sentiment", "emotion", "topics"], default="sentiment")
    p.add_argument("--labels", default=None, help="comma-separated topic labels")
    p.add_argument("--lexicon", default=None, help="lexicon/keyword file")
    p.add_argument("--binarize", type=float, default=None, help="append <col>_bin at threshold")
    p.add_argument("--prefix", default="")
    p.add_argument("--col-type", action="append", help="name:kind type hint")
    p.set_defaults(func=cmd_autocode)

    p = sub.add_parser("fit", help="fit a causal model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model bundle path")
    p.add_argument("--method", choices=["s", "t", "x", "r", "textnet"], required=True)
    p.add_argument("--treatment-col", required=True)
    p.add_argument("--outcome-col", required=True)
    p.add_argument("--text-col", default=None)
    p.add_argument("--include-cols", default="", help="comma-separated covariates")
    p.add_argument("--ignore-cols", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--col-type", action="append")
    p.add_argument("--learner", choices=["linear", "logistic", "gbdt"], default="gbdt")
    p.add_argument("--penalty", choices=["l1", "l2", "none"], default="l2")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--num-leaves", type=int, default=31)
    p.add_argument("--min-child-samples", type=int, default=20)
    p.add_argument("--min-child-weight", type=float, default=1e-3)
    p.add_argument("--colsample-bytree", type=float, default=1.0)
    p.add_argument("--subsample", type=float, default=1.0)
    p.add_argument("--reg-alpha", type=float, default=0.0)
    p.add_argument("--reg-lambda", type=float, default=0.0)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--n-rounds", type=int, default=100)
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--textnet-lr", type=float, default=0.25)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--q-weight", type=float, default=0.1)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("estimate", help="estimate ATE/CATE from a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--where-text-contains", default=None, help="CATE mask substring")
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--out", default=None)
    p.add_argument("--col-type", action="append")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", help="run the simulate/autocode/fit/estimate harness")
    p.add_argument("--config", default=None, help="benchmark config JSON")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", default=None, help="report path prefix")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
