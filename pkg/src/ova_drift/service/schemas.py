"""Pydantic request/response models for the HTTP endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class GenDataRequest(BaseModel):
    out_dir: str
    classes: int = Field(ge=2)
    per_class: int = Field(ge=1)
    seed: int
    vocab_per_class: int = 40
    shared_vocab: int | None = None
    overlap: float = 0.5
    min_tokens: int = 3
    max_tokens: int = 8
    months: int | None = None
    growth: float = 0.10
    vocab_shift: float = 0.05
    launch_months: dict[int, int] = {}
    fraction: float | None = None
    staleness: int | None = None
    copies_seed: int | None = None


class GenDataResponse(BaseModel):
    k: int
    n_copies: int
    n_corpus_files: int
    manifest: str
    outputs: list[str]
    config_digest: str


class MetricRequest(BaseModel):
    manifest: str
    variance: float = 0.01
    dimension: int = 16
    embed_seed: int = 0
    table_path: str | None = None
    oov_policy: str = "hash"
    fraction: float | None = None
    staleness: int | None = None
    copies_seed: int | None = None
    empty_copy_policy: str = "skip"
    jobs: int = 1
    out: str | None = None


class PairScore(BaseModel):
    source: int
    consumer: int
    a: float


class ClassScore(BaseModel):
    class_id: int = Field(alias="class")
    a: float


class SkippedPair(BaseModel):
    source: int
    consumer: int


class MetricResponse(BaseModel):
    k: int
    alpha: float
    alpha_abs: float
    per_pair: list[PairScore]
    per_class: list[ClassScore]
    skipped_pairs: list[SkippedPair]
    config_digest: str


class TrainRequest(BaseModel):
    manifest: str
    out_dir: str
    seed: int = 0
    dimension: int = 16
    embed_seed: int = 0
    table_path: str | None = None
    oov_policy: str = "hash"
    learning_rate: float = 0.1
    l2: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-6
    patience: int = 20
    class_weighted: bool = True
    baseline: bool = False
    fraction: float | None = None
    staleness: int | None = None
    copies_seed: int | None = None
    jobs: int = 1


class TrainResponse(BaseModel):
    k: int
    ova_system: str
    multiclass: str | None
    outputs: list[str]
    config_digest: str


class EvaluateRequest(BaseModel):
    model: str
    manifest: str
    dimension: int = 16
    embed_seed: int = 0
    table_path: str | None = None
    oov_policy: str = "hash"
    out: str | None = None


class EvaluateResponse(BaseModel):
    model_kind: str
    error_rate: float
    n_correct: int
    n_total: int
    per_class_errors: dict[int, int]
    config_digest: str


class SweepRequest(BaseModel):
    kind: str
    grid: list[float]
    out_dir: str
    seeds: list[int] | None = None
    classes: int | None = None
    per_class: int | None = None
    vocab_per_class: int | None = None
    shared_vocab: int | None = None
    overlap: float | None = None
    min_tokens: int | None = None
    max_tokens: int | None = None
    dimension: int | None = None
    embed_seed: int | None = None
    variance: float | None = None
    fraction: float | None = None
    months: int | None = None
    growth: float | None = None
    vocab_shift: float | None = None
    launch_months: dict[int, int] | None = None
    learning_rate: float | None = None
    l2: float | None = None
    max_iters: int | None = None
    tol: float | None = None
    patience: int | None = None
    jobs: int = 1


class SweepResponse(BaseModel):
    kind: str
    grid: list[float]
    n_rows: int
    n_failures: int
    failures: list[dict]
    correlation_abs: float | None
    first_point: dict | None
    last_point: dict | None
    endpoint_delta: dict | None
    outputs: list[str]
    config_digest: str


class HealthRequest(BaseModel):
    baseline: str
    current: str
    threshold: float = 0.1
    out: str | None = None


class HealthResponse(BaseModel):
    baseline_alpha: float
    current_alpha: float
    relative_degradation: float
    threshold: float
    action: str
    config_digest: str


class InfoResponse(BaseModel):
    name: str
    version: str
    commands: list[str]
