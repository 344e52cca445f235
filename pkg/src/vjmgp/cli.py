"""Command-line experiment runner.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import measures as M
from .data import (DataError, SplitSpec, Standardizer, clip_predictions, load, r2_score,
                   split, target_encode)
from .evolve import DTS, LEXICASE, PTS, RunConfig, run
from .exprcore import construct_features, to_string
from .vicinal import VicinalConfig

log = logging.getLogger("vjmgp")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# config-file keys outside RunConfig / VicinalConfig
_FILE_ONLY = {"data": str, "target": str, "train_size": str, "label_noise": float,
              "out": str}
_VICINAL_KEYS = {"K": int, "beta_alpha": float, "gamma": float, "sigma": float,
                 "kernel_space": str}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vjmgp", description="Run one GP feature-construction experiment.")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--data", help="CSV path or synth:{sine,piecewise,linear}")
    p.add_argument("--target", help="target column name or index (default: last)")
    p.add_argument("--method", choices=M.MEASURES)
    p.add_argument("--selection", choices=(LEXICASE, DTS, PTS))
    p.add_argument("--seed", type=int)
    p.add_argument("--pop", dest="pop_size", type=int)
    p.add_argument("--gens", dest="generations", type=int)
    p.add_argument("--k-iters", dest="K", type=int)
    p.add_argument("--beta-alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--mu", help="auto or a nonnegative number")
    p.add_argument("--tau", help="auto or a nonnegative number")
    p.add_argument("--kernel-space", choices=("y", "xy"))
    p.add_argument("--early-stop", action="store_true", default=None)
    p.add_argument("--train-size", help="auto or a row count")
    p.add_argument("--label-noise", type=float)
    p.add_argument("--ridge-alpha", type=float)
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _coerce(key: str, text: str, target_type):
    if target_type is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {text!r}")
    try:
        return target_type(text)
    except ValueError:
        raise UsageError(f"{key}: cannot read {text!r} as {target_type.__name__}") from None


def _field_types() -> dict:
    types = dict(_FILE_ONLY)
    types.update(_VICINAL_KEYS)
    for f in dataclasses.fields(RunConfig):
        if f.name in ("vicinal", "init_depth", "keep_history"):
            continue
        default = f.default
        types[f.name] = type(default) if isinstance(default, (bool, int, float)) else str
    return types


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    types = _field_types()
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise UsageError(f"{path}:{no}: unknown key {key!r}")
        out[key] = _coerce(key, value, types[key])
    return out


def _auto_or_float(key, value):
    if value is None or value == "auto":
        return "auto"
    v = _coerce(key, str(value), float)
    if v < 0:
        raise UsageError(f"{key} must be nonnegative")
    return v


def resolve(argv: Optional[Sequence[str]] = None) -> tuple[dict, RunConfig]:
    """Merge defaults, config file and flags into run options and a RunConfig."""
    args = build_parser().parse_args(argv)
    opts = read_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "verbose"):
            opts[key] = value
    opts["verbose"] = args.verbose
    if "data" not in opts:
        raise UsageError("--data is required")
    vic = {k: opts[k] for k in _VICINAL_KEYS if k in opts}
    run_kw = {f.name: opts[f.name] for f in dataclasses.fields(RunConfig)
              if f.name in opts and f.name not in ("tau", "mu")}
    try:
        config = RunConfig(vicinal=VicinalConfig(**vic), tau=_auto_or_float("tau", opts.get("tau")),
                           mu=_auto_or_float("mu", opts.get("mu")), **run_kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    ts = str(opts.get("train_size", "auto"))
    if ts != "auto":
        ts = _coerce("train_size", ts, int)
    opts["train_size"] = ts
    opts.setdefault("out", "results")
    opts.setdefault("label_noise", 0.0)
    return opts, config


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _dump(value) -> str:
    return json.dumps(_jsonable(value), sort_keys=True, allow_nan=False)


def format_model(individual, x_scaler: Standardizer, y_scaler: Standardizer,
                 feature_names: Sequence[str]) -> str:
    """The final model as ``y = c0 + c1 * f1 + ...`` in the original label scale.

    Each ``Xk`` in an expression is the standardized input
    ``(feature_k - mean_k) / std_k``.
    """
    r = individual.readout
    scale = y_scaler.std[0]
    coef = np.where(r.constant_mask, 0.0, scale * r.weights / r.feature_stds)
    c0 = y_scaler.mean[0] + scale * r.intercept - float(coef @ r.feature_means)
    lines = [f"y = {c0:.6g}"]
    for c, tree in zip(coef, individual.trees):
        lines.append(f"    {'+' if c >= 0 else '-'} {abs(c):.6g} * {to_string(tree)}")
    lines.append("")
    lines.append("where")
    for k, name in enumerate(feature_names):
        lines.append(f"    X{k} = ({name} - {x_scaler.mean[k]:.6g}) / {x_scaler.std[k]:.6g}")
    return "\n".join(lines) + "\n"


def run_experiment(opts: dict, config: RunConfig) -> dict:
    """Execute one experiment and write its artifacts; returns the summary."""
    t0 = time.perf_counter()
    dataset = load(opts["data"], opts.get("target"), seed=config.seed)
    spec = SplitSpec(opts["train_size"], config.seed, opts["label_noise"] or None)
    train, test = split(dataset, spec, np.random.default_rng([config.seed, 101]))
    A_train, A_test = target_encode(train, test)
    xs = Standardizer.fit(A_train)
    ys = Standardizer.fit(train.Y[:, None])
    X_train, X_test = xs.transform(A_train), xs.transform(A_test)
    Y_train = ys.transform(train.Y[:, None])[:, 0]

    def predict(ind, X):
        z = ind.readout.predict(construct_features(ind, X))
        return clip_predictions(ys.inverse(z[:, None])[:, 0], train.Y)

    def scorer(ind) -> dict:
        return {"train_r2": r2_score(train.Y, predict(ind, X_train)),
                "test_r2": r2_score(test.Y, predict(ind, X_test))}

    archive, trace = run(config, X_train, Y_train, scorer)
    final = trace.final
    scores = scorer(final)

    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    rows, elapsed = [], []
    for row in trace.generations:
        row = dict(row)
        elapsed.append(row.pop("elapsed_ms"))
        rows.append(_dump(row))
    summary = {
        "dataset": dataset.name,
        "method": config.method,
        "selection": config.selection,
        "seed": config.seed,
        "n_train": train.n,
        "n_test": test.n,
        "rejected_rows": len(dataset.rejected),
        "label_noise": opts["label_noise"],
        "train_r2": scores["train_r2"],
        "test_r2": scores["test_r2"],
        "node_count": final.node_count,
        "n_trees": len(final.trees),
        "tau": trace.tau,
        "mu": trace.mu,
        "noise_r2": trace.noise_r2,
        "discards": trace.synthesis or None,
        "early_stopped": trace.early_stopped,
        "generations": config.generations,
        "evaluations": trace.generations[-1]["evaluations"],
    }
    (out / "trace.jsonl").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (out / "summary.json").write_text(_dump(summary) + "\n", encoding="utf-8")
    (out / "model.txt").write_text(
        format_model(final, xs, ys, dataset.feature_names), encoding="utf-8")
    timing = {"total_s": time.perf_counter() - t0, "generation_elapsed_ms": elapsed}
    (out / "timing.json").write_text(_dump(timing) + "\n", encoding="utf-8")
    return summary


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        opts, config = resolve(argv)
    except UsageError as exc:
        print(f"vjmgp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if opts["verbose"] else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = run_experiment(opts, config)
    except DataError as exc:
        print(f"vjmgp: data error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"vjmgp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"test R2 {summary['test_r2']:.4f}  train R2 {summary['train_r2']:.4f}  "
          f"nodes {summary['node_count']}  -> {opts['out']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
