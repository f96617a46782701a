"""Trainable classifiers over averaged sentence embeddings.

One binary logistic model per class (trained on its live positives and
the copies it holds of everyone else's data) plus a softmax baseline
trained on the synchronized union. Both are linear models optimized by
full-batch gradient descent with analytic gradients, so the gradients
can be checked against finite differences.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .embedding import EmbeddingTable, embed_sentence, embed_sentences
from .errors import InvalidInputError, ParseError
from .registry import Dataset, DatasetCopy, Registry, Utterance


@dataclass
class TrainConfig:
    """Full-batch gradient descent hyperparameters."""

    learning_rate: float = 0.1
    l2: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-6
    patience: int = 20
    class_weighted: bool = True  # inverse-frequency weights for binary models

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "patience": self.patience,
            "class_weighted": self.class_weighted,
        }


@dataclass(frozen=True)
class BinaryModel:
    class_id: int
    weights: np.ndarray
    bias: float
    training_provenance: dict = field(default_factory=dict)

    def score(self, x: np.ndarray) -> float:
        """Membership probability for one embedded utterance."""
        return float(expit(x @ self.weights + self.bias))

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return expit(X @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "provenance": self.training_provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BinaryModel":
        return cls(
            class_id=int(data["class_id"]),
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            training_provenance=data.get("provenance", {}),
        )


@dataclass(frozen=True)
class MulticlassModel:
    weights: np.ndarray  # (k, d)
    biases: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def logits(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights.T + self.biases

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "biases": self.biases.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MulticlassModel":
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            biases=np.asarray(data["biases"], dtype=np.float64),
        )

    def save(self, path: str | Path) -> None:
        _dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: str | Path) -> "MulticlassModel":
        return cls.from_dict(_load_json(path))


@dataclass(frozen=True)
class OvaSystem:
    models: tuple[BinaryModel, ...]

    def __post_init__(self):
        ids = [m.class_id for m in self.models]
        if ids != list(range(len(self.models))):
            raise InvalidInputError(f"expected one model per class 0..K-1, got ids {ids}")

    @property
    def k(self) -> int:
        return len(self.models)

    def to_dict(self) -> dict:
        return {"models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, data: dict) -> "OvaSystem":
        return cls(models=tuple(BinaryModel.from_dict(m) for m in data["models"]))

    def save(self, path: str | Path) -> None:
        _dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: str | Path) -> "OvaSystem":
        return cls.from_dict(_load_json(path))


@dataclass(frozen=True)
class EvalResult:
    error_rate: float
    n_correct: int
    n_total: int
    per_class_errors: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "error_rate": self.error_rate,
            "n_correct": self.n_correct,
            "n_total": self.n_total,
            "per_class_errors": {str(c): n for c, n in sorted(self.per_class_errors.items())},
        }


def _dump_json(data: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {exc}")


# ---------------------------------------------------------------------------
# Losses (flat parameter vectors so finite-difference checks are direct)


def binary_loss_and_grad(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
    sample_weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Weighted binary cross-entropy plus L2 on the weights (not the bias).

    params = [w_0 .. w_{d-1}, b]. Uses softplus(z) - y*z per sample,
    which never overflows.
    """
    w, b = params[:-1], params[-1]
    n = X.shape[0]
    if sample_weights is None:
        sample_weights = np.ones(n)
    z = X @ w + b
    per_sample = np.logaddexp(0.0, z) - y * z
    loss = float(np.sum(sample_weights * per_sample) / n + 0.5 * l2 * np.sum(w**2))
    dz = sample_weights * (expit(z) - y) / n
    grad = np.concatenate([X.T @ dz + l2 * w, [np.sum(dz)]])
    return loss, grad


def multiclass_loss_and_grad(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
    k: int,
) -> tuple[float, np.ndarray]:
    """Categorical cross-entropy plus L2 on the weight matrix.

    params = [W.ravel(), b], W of shape (k, d).
    """
    d = X.shape[1]
    W = params[: k * d].reshape(k, d)
    b = params[k * d :]
    n = X.shape[0]
    Z = X @ W.T + b
    log_norm = logsumexp(Z, axis=1)
    loss = float(np.mean(log_norm - Z[np.arange(n), y]) + 0.5 * l2 * np.sum(W**2))
    P = np.exp(Z - log_norm[:, None])
    P[np.arange(n), y] -= 1.0
    P /= n
    grad = np.concatenate([(P.T @ X + l2 * W).ravel(), P.sum(axis=0)])
    return loss, grad


def _gradient_descent(
    loss_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    params: np.ndarray,
    hyper: TrainConfig,
    monitor: Callable[[np.ndarray], float] | None = None,
) -> np.ndarray:
    """Full-batch descent from zero init with improvement-based early stop."""
    best = np.inf
    stall = 0
    for _ in range(hyper.max_iters):
        loss, grad = loss_grad(params)
        params = params - hyper.learning_rate * grad
        current = monitor(params) if monitor is not None else loss
        if best - current < hyper.tol:
            stall += 1
            if stall >= hyper.patience:
                break
        else:
            stall = 0
        best = min(best, current)
    return params


def _inverse_frequency_weights(y: np.ndarray) -> np.ndarray:
    """Per-sample weights balancing the two classes; they sum to n."""
    n = len(y)
    n_pos = int(np.sum(y))
    n_neg = n - n_pos
    weights = np.empty(n)
    weights[y == 1] = n / (2.0 * n_pos)
    weights[y == 0] = n / (2.0 * n_neg)
    return weights


def _cap_dev(X_dev: np.ndarray, y_dev: np.ndarray, n_train: int) -> tuple[np.ndarray, np.ndarray]:
    # Development data never exceeds the training set size.
    if X_dev.shape[0] > n_train:
        return X_dev[:n_train], y_dev[:n_train]
    return X_dev, y_dev


# ---------------------------------------------------------------------------
# Training


def train_binary(
    positive: Dataset,
    negatives: Sequence[DatasetCopy],
    table: EmbeddingTable,
    hyper: TrainConfig,
    seed: int = 0,
    dev: tuple[np.ndarray, np.ndarray] | None = None,
) -> BinaryModel:
    """Logistic model separating one class's live data from its pooled copies.

    Initialization is at zero, so training is deterministic; the seed is
    accepted for interface stability but full-batch descent does not
    consume it.
    """
    pos_utts = positive.latest.utterances
    if len(pos_utts) == 0:
        raise InvalidInputError(f"class {positive.class_id} has no positive samples")
    pooled = [copy for copy in negatives if not copy.is_empty]
    if not pooled:
        raise InvalidInputError(
            f"class {positive.class_id} has no non-empty negative copies"
        )
    X_pos = embed_sentences([u.tokens for u in pos_utts], table)
    X_neg = np.vstack(
        [embed_sentences([u.tokens for u in copy.utterances], table) for copy in pooled]
    )
    X = np.vstack([X_pos, X_neg])
    y = np.concatenate([np.ones(len(X_pos)), np.zeros(len(X_neg))])
    weights = _inverse_frequency_weights(y) if hyper.class_weighted else None

    monitor = None
    if dev is not None:
        X_dev, y_dev = _cap_dev(np.asarray(dev[0]), np.asarray(dev[1]), X.shape[0])
        dev_weights = _inverse_frequency_weights(y_dev) if hyper.class_weighted else None
        monitor = lambda p: binary_loss_and_grad(p, X_dev, y_dev, hyper.l2, dev_weights)[0]

    params = _gradient_descent(
        lambda p: binary_loss_and_grad(p, X, y, hyper.l2, weights),
        np.zeros(table.dimension + 1),
        hyper,
        monitor=monitor,
    )
    provenance = {
        "positive_class": positive.class_id,
        "n_positive": len(X_pos),
        "negatives": [
            {
                "source": copy.source_class,
                "n": len(copy.utterances),
                "sampling_fraction": copy.provenance.sampling_fraction,
                "staleness_months": copy.provenance.staleness_months,
            }
            for copy in negatives
        ],
    }
    return BinaryModel(
        class_id=positive.class_id,
        weights=params[:-1],
        bias=float(params[-1]),
        training_provenance=provenance,
    )


def train_ova(
    registry: Registry,
    table: EmbeddingTable,
    hyper: TrainConfig,
    seed: int = 0,
    dev_datasets: list[Dataset] | None = None,
    jobs: int = 1,
) -> OvaSystem:
    """One binary model per class, each seeing only its own copies as negatives."""
    if not registry.fully_materialized:
        missing = [p for p in registry.pairs() if p not in registry.copies]
        raise InvalidInputError(f"registry is missing copies for pairs {missing[:5]}")

    dev_emb = None
    if dev_datasets is not None:
        dev_emb = [
            (embed_sentences([u.tokens for u in d.latest.utterances], table), d.class_id)
            for d in dev_datasets
            if len(d.latest.utterances) > 0
        ]

    def train_one(k: int) -> BinaryModel:
        negatives = [registry.copies[(l, k)] for l in range(registry.k) if l != k]
        dev = None
        if dev_emb:
            X_dev = np.vstack([X for X, _ in dev_emb])
            y_dev = np.concatenate(
                [np.full(len(X), 1.0 if cid == k else 0.0) for X, cid in dev_emb]
            )
            dev = (X_dev, y_dev)
        try:
            return train_binary(registry.datasets[k], negatives, table, hyper, seed=seed, dev=dev)
        except InvalidInputError as exc:
            raise InvalidInputError(f"training model for class {k} failed: {exc}") from exc

    class_ids = list(range(registry.k))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = tuple(pool.map(train_one, class_ids))
    else:
        models = tuple(train_one(k) for k in class_ids)
    return OvaSystem(models=models)


def train_multiclass(
    datasets: list[Dataset],
    table: EmbeddingTable,
    hyper: TrainConfig,
    seed: int = 0,
    dev: tuple[np.ndarray, np.ndarray] | None = None,
) -> MulticlassModel:
    """Softmax model on the synchronized union of latest versions."""
    k = len(datasets)
    if k < 2:
        raise InvalidInputError(f"need at least 2 classes, got {k}")
    blocks, labels = [], []
    for dataset in datasets:
        utts = dataset.latest.utterances
        if len(utts) == 0:
            raise InvalidInputError(f"dataset {dataset.class_id} latest version is empty")
        blocks.append(embed_sentences([u.tokens for u in utts], table))
        labels.append(np.full(len(utts), dataset.class_id, dtype=np.int64))
    X = np.vstack(blocks)
    y = np.concatenate(labels)

    monitor = None
    if dev is not None:
        X_dev, y_dev = _cap_dev(np.asarray(dev[0]), np.asarray(dev[1], dtype=np.int64), X.shape[0])
        monitor = lambda p: multiclass_loss_and_grad(p, X_dev, y_dev, hyper.l2, k)[0]

    d = table.dimension
    params = _gradient_descent(
        lambda p: multiclass_loss_and_grad(p, X, y, hyper.l2, k),
        np.zeros(k * d + k),
        hyper,
        monitor=monitor,
    )
    return MulticlassModel(weights=params[: k * d].reshape(k, d), biases=params[k * d :])


# ---------------------------------------------------------------------------
# Prediction and evaluation


def predict_ova(system: OvaSystem, tokens: Sequence[str], table: EmbeddingTable) -> int:
    """Class whose model scores the utterance highest; ties go to the lowest id."""
    x = embed_sentence(list(tokens), table)
    scores = np.array([m.score(x) for m in system.models])
    return int(np.argmax(scores))


def predict_multiclass(model: MulticlassModel, tokens: Sequence[str], table: EmbeddingTable) -> int:
    x = embed_sentence(list(tokens), table)
    return int(np.argmax(model.logits(x[None, :])[0]))


def evaluate(
    predict_fn: Callable[[Sequence[str]], int], test_set: Sequence[Utterance]
) -> EvalResult:
    """Error rate of a predictor over a labeled test set."""
    if len(test_set) == 0:
        raise InvalidInputError("test set is empty")
    n_correct = 0
    per_class_errors: dict[int, int] = {}
    for utt in test_set:
        if predict_fn(utt.tokens) == utt.class_label:
            n_correct += 1
        else:
            per_class_errors[utt.class_label] = per_class_errors.get(utt.class_label, 0) + 1
    n_total = len(test_set)
    return EvalResult(
        error_rate=1.0 - n_correct / n_total,
        n_correct=n_correct,
        n_total=n_total,
        per_class_errors=per_class_errors,
    )
