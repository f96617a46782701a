"""Command implementations shared by the CLI and the HTTP service.

Each handler takes plain keyword arguments, does the work, writes any
requested files, and returns a JSON-ready dict. Validation failures
raise package errors; callers map those onto exit codes or HTTP status.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..asynchrony import AsynchronyReport, EmptyCopyPolicy, compute_alpha, health_check
from ..embedding import EmbeddingTable, OovPolicy, load_embedding_table
from ..errors import InvalidInputError, ParseError
from ..experiments import (
    RUNNERS,
    BaseConfig,
    SweepConfig,
    SweepKind,
    write_plot_series,
    write_sweep_csv,
)
from ..manifest import RunManifest, config_digest
from ..models import (
    MulticlassModel,
    OvaSystem,
    TrainConfig,
    evaluate,
    predict_multiclass,
    predict_ova,
    train_multiclass,
    train_ova,
)
from ..registry import Registry, generate_evolving_corpus, generate_synthetic_corpus
from ..registry import load_registry as _load_registry
from ..registry import save_registry
from ..seeding import mix_seed


def _dump_json(data: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_table(
    dimension: int,
    embed_seed: int = 0,
    table_path: str | None = None,
    oov_policy: str = "hash",
) -> EmbeddingTable:
    """Hash-derived table by default; a word2vec-text file when given."""
    if oov_policy not in ("hash", "zero"):
        raise InvalidInputError(f"oov_policy must be 'hash' or 'zero', got {oov_policy!r}")
    if table_path is None:
        return EmbeddingTable.hashed(dimension, embed_seed)
    policy = OovPolicy.HASH_FALLBACK if oov_policy == "hash" else OovPolicy.ZERO_VECTOR
    return load_embedding_table(table_path, dimension, policy, hash_seed=embed_seed)


def _materialize_if_needed(
    registry: Registry,
    fraction: float | None,
    staleness: int | None,
    seed: int | None,
) -> None:
    if fraction is None and staleness is None:
        if not registry.fully_materialized:
            raise InvalidInputError(
                "registry manifest has no materialized copies; "
                "pass sampling/staleness flags (--fraction/--staleness/--copies-seed)"
            )
        return
    registry.materialize(
        fraction=1.0 if fraction is None else fraction,
        staleness=0 if staleness is None else staleness,
        seed=0 if seed is None else seed,
    )


# ---------------------------------------------------------------------------
# gen-data


def handle_gen_data(
    out_dir: str,
    classes: int,
    per_class: int,
    seed: int,
    vocab_per_class: int = 40,
    shared_vocab: int | None = None,
    overlap: float = 0.5,
    min_tokens: int = 3,
    max_tokens: int = 8,
    months: int | None = None,
    growth: float = 0.10,
    vocab_shift: float = 0.05,
    launch_months: dict[int, int] | None = None,
    fraction: float | None = None,
    staleness: int | None = None,
    copies_seed: int | None = None,
) -> dict:
    """Generate a synthetic corpus (single- or multi-version) on disk."""
    launches = {int(c): int(m) for c, m in (launch_months or {}).items()}
    config = {
        "command": "gen-data",
        "classes": classes,
        "per_class": per_class,
        "seed": seed,
        "vocab_per_class": vocab_per_class,
        "shared_vocab": shared_vocab,
        "overlap": overlap,
        "min_tokens": min_tokens,
        "max_tokens": max_tokens,
        "months": months,
        "growth": growth,
        "vocab_shift": vocab_shift,
        "launch_months": {str(c): m for c, m in sorted(launches.items())},
        "fraction": fraction,
        "staleness": staleness,
        "copies_seed": copies_seed,
    }
    digest = config_digest(config)

    if months is None:
        datasets = generate_synthetic_corpus(
            classes,
            per_class,
            vocab_per_class,
            overlap,
            (min_tokens, max_tokens),
            seed=seed,
            shared_vocab_size=shared_vocab,
        )
    else:
        datasets = generate_evolving_corpus(
            classes,
            per_class,
            vocab_per_class,
            overlap,
            (min_tokens, max_tokens),
            months=months,
            seed=seed,
            growth=growth,
            vocab_shift=vocab_shift,
            launch_months=launches,
            shared_vocab_size=shared_vocab,
        )
    registry = Registry(datasets=datasets)
    if fraction is not None or staleness is not None:
        registry.materialize(
            fraction=1.0 if fraction is None else fraction,
            staleness=0 if staleness is None else staleness,
            seed=mix_seed(seed, "copies") if copies_seed is None else copies_seed,
        )

    out = Path(out_dir)
    manifest_path = save_registry(registry, out, config_digest=digest)
    corpus_files = sorted(p.name for p in out.glob("class*.txt"))
    outputs = corpus_files + [manifest_path.name]
    RunManifest(command="gen-data", config_digest=digest, seeds=[seed], outputs=outputs).save(
        out / "run_manifest.json"
    )
    return {
        "k": registry.k,
        "n_copies": len(registry.copies),
        "n_corpus_files": len(corpus_files),
        "manifest": str(manifest_path),
        "outputs": outputs,
        "config_digest": digest,
    }


# ---------------------------------------------------------------------------
# metric


def handle_metric(
    manifest: str,
    variance: float = 0.01,
    dimension: int = 16,
    embed_seed: int = 0,
    table_path: str | None = None,
    oov_policy: str = "hash",
    fraction: float | None = None,
    staleness: int | None = None,
    copies_seed: int | None = None,
    empty_copy_policy: str = "skip",
    jobs: int = 1,
    out: str | None = None,
) -> dict:
    """Score a registry manifest; returns the report with its config digest."""
    if empty_copy_policy not in ("skip", "error"):
        raise InvalidInputError(
            f"empty_copy_policy must be 'skip' or 'error', got {empty_copy_policy!r}"
        )
    config = {
        "command": "metric",
        "manifest": str(manifest),
        "variance": variance,
        "dimension": dimension,
        "embed_seed": embed_seed,
        "table_path": table_path,
        "oov_policy": oov_policy,
        "fraction": fraction,
        "staleness": staleness,
        "copies_seed": copies_seed,
        "empty_copy_policy": empty_copy_policy,
    }
    digest = config_digest(config)
    registry = _load_registry(manifest)
    _materialize_if_needed(registry, fraction, staleness, copies_seed)
    table = build_table(dimension, embed_seed, table_path, oov_policy)
    report = compute_alpha(
        registry, table, variance, EmptyCopyPolicy(empty_copy_policy), jobs=jobs
    )
    payload = report.to_dict()
    payload["config_digest"] = digest
    if out is not None:
        _dump_json(payload, out)
    return payload


# ---------------------------------------------------------------------------
# train


def handle_train(
    manifest: str,
    out_dir: str,
    seed: int = 0,
    dimension: int = 16,
    embed_seed: int = 0,
    table_path: str | None = None,
    oov_policy: str = "hash",
    learning_rate: float = 0.1,
    l2: float = 1e-4,
    max_iters: int = 500,
    tol: float = 1e-6,
    patience: int = 20,
    class_weighted: bool = True,
    baseline: bool = False,
    fraction: float | None = None,
    staleness: int | None = None,
    copies_seed: int | None = None,
    jobs: int = 1,
) -> dict:
    """Train the OVA system (and optionally the multi-class baseline)."""
    hyper = TrainConfig(
        learning_rate=learning_rate,
        l2=l2,
        max_iters=max_iters,
        tol=tol,
        patience=patience,
        class_weighted=class_weighted,
    )
    config = {
        "command": "train",
        "manifest": str(manifest),
        "seed": seed,
        "dimension": dimension,
        "embed_seed": embed_seed,
        "table_path": table_path,
        "oov_policy": oov_policy,
        "hyper": hyper.to_dict(),
        "baseline": baseline,
        "fraction": fraction,
        "staleness": staleness,
        "copies_seed": copies_seed,
    }
    digest = config_digest(config)
    registry = _load_registry(manifest)
    _materialize_if_needed(registry, fraction, staleness, copies_seed)
    table = build_table(dimension, embed_seed, table_path, oov_policy)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    system = train_ova(registry, table, hyper, seed=seed, jobs=jobs)
    ova_path = out / "ova_system.json"
    _dump_json({**system.to_dict(), "config_digest": digest}, ova_path)
    outputs = [ova_path.name]

    mc_path = None
    if baseline:
        mc = train_multiclass(registry.datasets, table, hyper, seed=seed)
        mc_path = out / "multiclass.json"
        _dump_json({**mc.to_dict(), "config_digest": digest}, mc_path)
        outputs.append(mc_path.name)

    RunManifest(command="train", config_digest=digest, seeds=[seed], outputs=outputs).save(
        out / "run_manifest.json"
    )
    return {
        "k": registry.k,
        "ova_system": str(ova_path),
        "multiclass": str(mc_path) if mc_path else None,
        "outputs": outputs,
        "config_digest": digest,
    }


# ---------------------------------------------------------------------------
# evaluate


def _load_model(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {exc}")
    if "models" in data:
        return OvaSystem.from_dict(data), "ova"
    if "weights" in data and "biases" in data:
        return MulticlassModel.from_dict(data), "multiclass"
    raise ParseError(f"unrecognized model file {path}: expected an OVA system or softmax model")


def handle_evaluate(
    model: str,
    manifest: str,
    dimension: int = 16,
    embed_seed: int = 0,
    table_path: str | None = None,
    oov_policy: str = "hash",
    out: str | None = None,
) -> dict:
    """Error rate of a saved model over the latest versions in a manifest."""
    config = {
        "command": "evaluate",
        "model": str(model),
        "manifest": str(manifest),
        "dimension": dimension,
        "embed_seed": embed_seed,
        "table_path": table_path,
        "oov_policy": oov_policy,
    }
    digest = config_digest(config)
    loaded, kind = _load_model(model)
    table = build_table(dimension, embed_seed, table_path, oov_policy)
    registry = _load_registry(manifest)
    test_set = [u for d in registry.datasets for u in d.latest.utterances]
    if kind == "ova":
        result = evaluate(lambda t: predict_ova(loaded, t, table), test_set)
    else:
        result = evaluate(lambda t: predict_multiclass(loaded, t, table), test_set)
    payload = {"model_kind": kind, **result.to_dict(), "config_digest": digest}
    if out is not None:
        _dump_json(payload, out)
    return payload


# ---------------------------------------------------------------------------
# sweep


def handle_sweep(
    kind: str,
    grid: list[float],
    out_dir: str,
    seeds: list[int] | None = None,
    classes: int | None = None,
    per_class: int | None = None,
    vocab_per_class: int | None = None,
    shared_vocab: int | None = None,
    overlap: float | None = None,
    min_tokens: int | None = None,
    max_tokens: int | None = None,
    dimension: int | None = None,
    embed_seed: int | None = None,
    variance: float | None = None,
    fraction: float | None = None,
    months: int | None = None,
    growth: float | None = None,
    vocab_shift: float | None = None,
    launch_months: dict[int, int] | None = None,
    learning_rate: float | None = None,
    l2: float | None = None,
    max_iters: int | None = None,
    tol: float | None = None,
    patience: int | None = None,
    jobs: int = 1,
) -> dict:
    """Run one sweep kind over its grid and write CSV/JSON/plot files."""
    try:
        sweep_kind = SweepKind(kind)
    except ValueError:
        valid = ", ".join(k.value for k in SweepKind)
        raise InvalidInputError(f"unknown sweep kind {kind!r}; expected one of: {valid}")

    base = BaseConfig()
    hyper = base.hyper
    overrides = {
        "k": classes,
        "per_class": per_class,
        "vocab_per_class": vocab_per_class,
        "shared_vocab_size": shared_vocab,
        "overlap": overlap,
        "dimension": dimension,
        "embed_seed": embed_seed,
        "variance": variance,
        "fraction": fraction,
        "months": months,
        "growth": growth,
        "vocab_shift": vocab_shift,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(base, name, value)
    if min_tokens is not None or max_tokens is not None:
        lo, hi = base.sentence_length
        base.sentence_length = (
            lo if min_tokens is None else min_tokens,
            hi if max_tokens is None else max_tokens,
        )
    if seeds is not None:
        base.seeds = tuple(int(s) for s in seeds)
    if launch_months is not None:
        base.launch_months = {int(c): int(m) for c, m in launch_months.items()}
    hyper_overrides = {
        "learning_rate": learning_rate,
        "l2": l2,
        "max_iters": max_iters,
        "tol": tol,
        "patience": patience,
    }
    for name, value in hyper_overrides.items():
        if value is not None:
            setattr(hyper, name, value)

    if sweep_kind in (SweepKind.DATA_SIZE, SweepKind.CLASS_COUNT, SweepKind.STALENESS):
        grid = [int(v) for v in grid]
    config = SweepConfig(kind=sweep_kind, grid=list(grid), base=base)
    digest = config_digest(config.to_dict())

    result = RUNNERS[sweep_kind](config, jobs=jobs)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    write_sweep_csv(result, csv_path, digest)
    json_path = out / "result.json"
    _dump_json({**result.to_dict(), "config_digest": digest}, json_path)
    plot_paths = write_plot_series(result, out, digest)
    outputs = [csv_path.name, json_path.name] + [p.name for p in plot_paths]
    RunManifest(
        command="sweep", config_digest=digest, seeds=list(base.seeds), outputs=outputs
    ).save(out / "run_manifest.json")

    means = result.seed_means
    endpoint_delta = None
    if len(means) >= 2:
        endpoint_delta = {
            "gap": means[-1]["gap"] - means[0]["gap"],
            "alpha_abs": means[-1]["alpha_abs"] - means[0]["alpha_abs"],
        }
        if means[0]["rel_gap"] is not None and means[-1]["rel_gap"] is not None:
            endpoint_delta["rel_gap"] = means[-1]["rel_gap"] - means[0]["rel_gap"]
    summary = {
        "kind": sweep_kind.value,
        "grid": list(config.grid),
        "n_rows": len(result.rows),
        "n_failures": len(result.failures),
        "failures": [f.to_dict() for f in result.failures],
        "correlation_abs": result.correlation_abs,
        "first_point": means[0] if means else None,
        "last_point": means[-1] if means else None,
        "endpoint_delta": endpoint_delta,
        "outputs": [str(out / name) for name in outputs],
        "config_digest": digest,
    }
    return summary


# ---------------------------------------------------------------------------
# health


def handle_health(
    baseline: str,
    current: str,
    threshold: float = 0.1,
    out: str | None = None,
) -> dict:
    """Gate a current report against a baseline; dict mirrors HealthVerdict."""
    config = {
        "command": "health",
        "baseline": str(baseline),
        "current": str(current),
        "threshold": threshold,
    }
    digest = config_digest(config)
    baseline_report = AsynchronyReport.load(baseline)
    current_report = AsynchronyReport.load(current)
    verdict = health_check(baseline_report, current_report, threshold)
    payload = {**verdict.to_dict(), "config_digest": digest}
    if out is not None:
        _dump_json(payload, out)
    return payload
