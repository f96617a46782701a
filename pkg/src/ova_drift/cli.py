"""Command-line front end: data generation, metric computation, training,
evaluation, sweeps, and the health gate.

Commands dispatch in process to the same handlers the HTTP service
exposes. Exit codes: 0 success/healthy, 1 gated-unhealthy or partial
sweep failure, 2 usage/validation error.

Configuration precedence: flags override config-file values, which
override built-in defaults. The resolved configuration is digested into
every output file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, InvalidInputError, ParseError
from .service import handlers


def _parse_float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _parse_int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _parse_launch_months(text: str) -> dict[int, int]:
    # format: class:month[,class:month...], e.g. "4:6" launches class 4 at month 6
    mapping = {}
    try:
        for part in text.split(","):
            if part == "":
                continue
            class_id, month = part.split(":")
            mapping[int(class_id)] = int(month)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected class:month pairs like '4:6,2:3', got {text!r}"
        )
    return mapping


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config file is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise ConfigError(f"config file must hold a JSON object, got {type(config).__name__}")
    return config


def _resolve(args: argparse.Namespace, config: dict, defaults: dict) -> dict:
    """Flags beat config-file values beat defaults; None flags mean unset."""
    resolved = {}
    for name, default in defaults.items():
        value = getattr(args, name)
        if value is None:
            value = config.get(name, default)
        resolved[name] = value
    return resolved


def _resolve_jobs(args: argparse.Namespace, config: dict) -> int:
    if args.jobs is not None:
        return args.jobs
    if "jobs" in config:
        return int(config["jobs"])
    env = os.environ.get("OVA_DRIFT_JOBS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"OVA_DRIFT_JOBS must be an integer, got {env!r}")
    return 1


def _require(params: dict, name: str, flag: str) -> None:
    if params[name] is None:
        raise InvalidInputError(f"{flag} is required (flag or config file)")


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_data(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    params = _resolve(
        args,
        config,
        {
            "out": None,
            "classes": 5,
            "per_class": 200,
            "seed": 0,
            "vocab_per_class": 40,
            "shared_vocab": None,
            "overlap": 0.5,
            "min_tokens": 3,
            "max_tokens": 8,
            "months": None,
            "growth": 0.10,
            "vocab_shift": 0.05,
            "launch_months": None,
            "fraction": None,
            "staleness": None,
            "copies_seed": None,
        },
    )
    _require(params, "out", "--out")
    summary = handlers.handle_gen_data(
        out_dir=params["out"],
        classes=int(params["classes"]),
        per_class=int(params["per_class"]),
        seed=int(params["seed"]),
        vocab_per_class=int(params["vocab_per_class"]),
        shared_vocab=params["shared_vocab"],
        overlap=float(params["overlap"]),
        min_tokens=int(params["min_tokens"]),
        max_tokens=int(params["max_tokens"]),
        months=params["months"],
        growth=float(params["growth"]),
        vocab_shift=float(params["vocab_shift"]),
        launch_months=params["launch_months"],
        fraction=params["fraction"],
        staleness=params["staleness"],
        copies_seed=params["copies_seed"],
    )
    _emit(summary)
    return 0


def cmd_metric(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    params = _resolve(
        args,
        config,
        {
            "manifest": None,
            "variance": 0.01,
            "dimension": 16,
            "embed_seed": 0,
            "table": None,
            "oov": "hash",
            "fraction": None,
            "staleness": None,
            "copies_seed": None,
            "empty_copy_policy": "skip",
            "out": None,
        },
    )
    _require(params, "manifest", "--manifest")
    payload = handlers.handle_metric(
        manifest=params["manifest"],
        variance=float(params["variance"]),
        dimension=int(params["dimension"]),
        embed_seed=int(params["embed_seed"]),
        table_path=params["table"],
        oov_policy=params["oov"],
        fraction=params["fraction"],
        staleness=params["staleness"],
        copies_seed=params["copies_seed"],
        empty_copy_policy=params["empty_copy_policy"],
        jobs=_resolve_jobs(args, config),
        out=params["out"],
    )
    _emit(payload)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    params = _resolve(
        args,
        config,
        {
            "manifest": None,
            "out": None,
            "seed": 0,
            "dimension": 16,
            "embed_seed": 0,
            "table": None,
            "oov": "hash",
            "learning_rate": 0.1,
            "l2": 1e-4,
            "max_iters": 500,
            "tol": 1e-6,
            "patience": 20,
            "class_weighted": True,
            "baseline": False,
            "fraction": None,
            "staleness": None,
            "copies_seed": None,
        },
    )
    _require(params, "manifest", "--manifest")
    _require(params, "out", "--out")
    summary = handlers.handle_train(
        manifest=params["manifest"],
        out_dir=params["out"],
        seed=int(params["seed"]),
        dimension=int(params["dimension"]),
        embed_seed=int(params["embed_seed"]),
        table_path=params["table"],
        oov_policy=params["oov"],
        learning_rate=float(params["learning_rate"]),
        l2=float(params["l2"]),
        max_iters=int(params["max_iters"]),
        tol=float(params["tol"]),
        patience=int(params["patience"]),
        class_weighted=bool(params["class_weighted"]),
        baseline=bool(params["baseline"]),
        fraction=params["fraction"],
        staleness=params["staleness"],
        copies_seed=params["copies_seed"],
        jobs=_resolve_jobs(args, config),
    )
    _emit(summary)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    params = _resolve(
        args,
        config,
        {
            "model": None,
            "manifest": None,
            "dimension": 16,
            "embed_seed": 0,
            "table": None,
            "oov": "hash",
            "out": None,
        },
    )
    _require(params, "model", "--model")
    _require(params, "manifest", "--manifest")
    payload = handlers.handle_evaluate(
        model=params["model"],
        manifest=params["manifest"],
        dimension=int(params["dimension"]),
        embed_seed=int(params["embed_seed"]),
        table_path=params["table"],
        oov_policy=params["oov"],
        out=params["out"],
    )
    _emit(payload)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    params = _resolve(
        args,
        config,
        {
            "kind": None,
            "grid": None,
            "out": None,
            "seeds": None,
            "classes": None,
            "per_class": None,
            "vocab_per_class": None,
            "shared_vocab": None,
            "overlap": None,
            "min_tokens": None,
            "max_tokens": None,
            "dimension": None,
            "embed_seed": None,
            "variance": None,
            "fraction": None,
            "months": None,
            "growth": None,
            "vocab_shift": None,
            "launch_months": None,
            "learning_rate": None,
            "l2": None,
            "max_iters": None,
            "tol": None,
            "patience": None,
        },
    )
    _require(params, "kind", "--kind")
    _require(params, "grid", "--grid")
    _require(params, "out", "--out")
    summary = handlers.handle_sweep(
        kind=params["kind"],
        grid=[float(v) for v in params["grid"]],
        out_dir=params["out"],
        seeds=params["seeds"],
        classes=params["classes"],
        per_class=params["per_class"],
        vocab_per_class=params["vocab_per_class"],
        shared_vocab=params["shared_vocab"],
        overlap=params["overlap"],
        min_tokens=params["min_tokens"],
        max_tokens=params["max_tokens"],
        dimension=params["dimension"],
        embed_seed=params["embed_seed"],
        variance=params["variance"],
        fraction=params["fraction"],
        months=params["months"],
        growth=params["growth"],
        vocab_shift=params["vocab_shift"],
        launch_months=params["launch_months"],
        learning_rate=params["learning_rate"],
        l2=params["l2"],
        max_iters=params["max_iters"],
        tol=params["tol"],
        patience=params["patience"],
        jobs=_resolve_jobs(args, config),
    )
    _emit(summary)
    return 1 if summary["n_failures"] > 0 else 0


def cmd_health(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    params = _resolve(
        args,
        config,
        {"baseline": None, "current": None, "threshold": 0.1, "out": None},
    )
    _require(params, "baseline", "--baseline")
    _require(params, "current", "--current")
    payload = handlers.handle_health(
        baseline=params["baseline"],
        current=params["current"],
        threshold=float(params["threshold"]),
        out=params["out"],
    )
    _emit(payload)
    return 0 if payload["action"] == "healthy" else 1


# ---------------------------------------------------------------------------
# Parser


def _add_embedding_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dimension", type=int, help="embedding dimensionality")
    sub.add_argument("--embed-seed", type=int, dest="embed_seed", help="hash-embedding seed")
    sub.add_argument("--table", help="word2vec-text embedding table file")
    sub.add_argument("--oov", choices=["hash", "zero"], help="out-of-vocabulary policy")


def _add_copy_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--fraction", type=float, help="copy sampling fraction in (0, 1]")
    sub.add_argument("--staleness", type=int, help="copy staleness in months")
    sub.add_argument("--copies-seed", type=int, dest="copies_seed", help="copy sampling seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ova-drift",
        description="Dataset-asynchrony metric and accuracy-gap simulations "
        "for one-vs-all classifier systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus and registry manifest")
    p.add_argument("--out", help="output directory")
    p.add_argument("--classes", type=int, help="number of classes (>= 2)")
    p.add_argument("--per-class", type=int, dest="per_class", help="utterances per class")
    p.add_argument("--seed", type=int, help="corpus seed")
    p.add_argument("--vocab-per-class", type=int, dest="vocab_per_class")
    p.add_argument("--shared-vocab", type=int, dest="shared_vocab")
    p.add_argument("--overlap", type=float, help="shared-vocabulary fraction in [0, 1]")
    p.add_argument("--min-tokens", type=int, dest="min_tokens")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--months", type=int, help="evolve the corpus over this many months")
    p.add_argument("--growth", type=float, help="monthly growth fraction")
    p.add_argument("--vocab-shift", type=float, dest="vocab_shift")
    p.add_argument(
        "--launch-months",
        type=_parse_launch_months,
        dest="launch_months",
        help="per-class launch months as class:month pairs, e.g. '4:6'",
    )
    _add_copy_flags(p)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--jobs", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("metric", help="compute the asynchrony report for a registry")
    p.add_argument("--manifest", help="registry manifest path")
    p.add_argument("--variance", type=float, help="KDE kernel variance")
    _add_embedding_flags(p)
    _add_copy_flags(p)
    p.add_argument(
        "--empty-copy-policy",
        choices=["skip", "error"],
        dest="empty_copy_policy",
        help="how to treat empty stale copies",
    )
    p.add_argument("--out", help="also write the report JSON here")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--jobs", type=int, help="worker threads (default $OVA_DRIFT_JOBS or 1)")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("train", help="train the OVA system (and optional baseline)")
    p.add_argument("--manifest", help="registry manifest path")
    p.add_argument("--out", help="output directory for model files")
    p.add_argument("--seed", type=int, help="training seed")
    _add_embedding_flags(p)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--l2", type=float, help="L2 penalty on weights")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float, help="early-stop improvement tolerance")
    p.add_argument("--patience", type=int, help="early-stop patience in iterations")
    p.add_argument(
        "--class-weighted",
        action=argparse.BooleanOptionalAction,
        dest="class_weighted",
        default=None,
        help="inverse-frequency weights for the binary models",
    )
    p.add_argument(
        "--baseline",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="also train the synchronized multi-class baseline",
    )
    _add_copy_flags(p)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--jobs", type=int, help="worker threads (default $OVA_DRIFT_JOBS or 1)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="error rate of a saved model on a test manifest")
    p.add_argument("--model", help="model JSON path (OVA system or softmax baseline)")
    p.add_argument("--manifest", help="test registry manifest path")
    _add_embedding_flags(p)
    p.add_argument("--out", help="also write the result JSON here")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--jobs", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run an asynchrony/size/classes/staleness sweep")
    p.add_argument("--kind", choices=["async", "size", "classes", "staleness"])
    p.add_argument("--grid", type=_parse_float_list, help="comma-separated grid values")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seeds", type=_parse_int_list, help="comma-separated seeds")
    p.add_argument("--classes", type=int, help="base class count")
    p.add_argument("--per-class", type=int, dest="per_class")
    p.add_argument("--vocab-per-class", type=int, dest="vocab_per_class")
    p.add_argument("--shared-vocab", type=int, dest="shared_vocab")
    p.add_argument("--overlap", type=float)
    p.add_argument("--min-tokens", type=int, dest="min_tokens")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--dimension", type=int, help="embedding dimensionality")
    p.add_argument("--embed-seed", type=int, dest="embed_seed", help="hash-embedding seed")
    p.add_argument("--variance", type=float, help="KDE kernel variance")
    p.add_argument("--fraction", type=float, help="fixed sampling fraction for non-async kinds")
    p.add_argument("--months", type=int, help="evolution length for staleness sweeps")
    p.add_argument("--growth", type=float)
    p.add_argument("--vocab-shift", type=float, dest="vocab_shift")
    p.add_argument("--launch-months", type=_parse_launch_months, dest="launch_months")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--l2", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--jobs", type=int, help="worker threads (default $OVA_DRIFT_JOBS or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("health", help="gate a current report against a baseline")
    p.add_argument("--baseline", help="baseline report JSON")
    p.add_argument("--current", help="current report JSON")
    p.add_argument("--threshold", type=float, help="relative degradation threshold")
    p.add_argument("--out", help="also write the verdict JSON here")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--jobs", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_health)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, ParseError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
