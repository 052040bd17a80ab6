"""Retrainable student classifier.

A multinomial softmax (linear) classifier over precomputed feature vectors,
trained by mini-batch gradient descent on accumulated teacher labels.  Targets
are either the teacher's full label distribution ("soft") or its argmax class
("hard").  Every training call starts from zero weights, so retraining is
stateless: identical inputs always produce identical models.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MODEL_FORMAT = "neucache-student"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults are documented tuning knobs."""

    max_epochs: int = 30
    patience: int = 5
    validation_fraction: float = 0.1
    label_mode: str = "soft"  # "soft" | "hard"
    learning_rate: float = 0.1
    batch_size: int = 32
    l2_penalty: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.validation_fraction < 0.5:
            raise ValueError("validation_fraction must be in (0, 0.5)")
        if self.label_mode not in ("soft", "hard"):
            raise ValueError(f"label_mode must be 'soft' or 'hard', got {self.label_mode!r}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2_penalty < 0.0:
            raise ValueError("l2_penalty must be >= 0")


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """One teacher-labelled item: features plus a soft or hard target."""

    features: np.ndarray
    target_logprobs: np.ndarray | None = None  # soft target (log probabilities)
    target_label: int | None = None            # hard target (class index)
    weight: float = 1.0

    def __post_init__(self):
        if self.target_logprobs is None and self.target_label is None:
            raise ValueError("TrainingExample needs a soft or hard target")
        if self.weight <= 0.0:
            raise ValueError("example weight must be > 0")


@dataclass
class TrainMeta:
    epochs_run: int = 0
    best_epoch: int = 0
    best_validation_loss: float = float("nan")
    used_validation: bool = True
    seed: int = 0
    train_size: int = 0

    def to_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "best_validation_loss": self.best_validation_loss,
            "used_validation": self.used_validation,
            "seed": self.seed,
            "train_size": self.train_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainMeta":
        return cls(**d)


@dataclass(eq=False)
class StudentModel:
    """Linear softmax classifier: K x (feature_dim + 1) weights, bias last."""

    weights: np.ndarray
    train_meta: TrainMeta = field(default_factory=TrainMeta)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1] - 1


def zero_model(num_classes: int, feature_dim: int) -> StudentModel:
    """Untrained model: uniform predictions everywhere."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    return StudentModel(weights=np.zeros((num_classes, feature_dim + 1)))


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax_probs(logprobs: np.ndarray) -> np.ndarray:
    """Renormalise a (possibly filler-padded) log-probability vector.

    Exact log probabilities are recovered unchanged; -100 fillers collapse to
    ~0 probability, yielding a proper distribution either way.
    """
    return np.exp(_log_softmax(np.asarray(logprobs, dtype=float)))


def _augment(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        return np.concatenate([features, [1.0]])
    return np.hstack([features, np.ones((features.shape[0], 1))])


def predict(model: StudentModel, features: np.ndarray) -> np.ndarray:
    """Log-probability vector for one feature vector; argmax ties go to the
    lowest class index."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.feature_dim:
        raise ValueError(
            f"feature dimension mismatch: model expects {model.feature_dim}, got {x.shape}"
        )
    return _log_softmax(model.weights @ _augment(x))


def predict_batch(model: StudentModel, features: np.ndarray) -> np.ndarray:
    """Log-probabilities for a batch, one row per input row."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise ValueError(
            f"feature dimension mismatch: model expects {model.feature_dim}, got {x.shape}"
        )
    return _log_softmax(_augment(x) @ model.weights.T)


def predict_labels(model: StudentModel, features: np.ndarray) -> np.ndarray:
    return np.argmax(predict_batch(model, features), axis=1)


def evaluate(model: StudentModel, instances: Sequence) -> float:
    """Fraction of instances whose gold class matches the model argmax."""
    if len(instances) == 0:
        raise ValueError("cannot evaluate on an empty instance list")
    feats = np.stack([inst.features for inst in instances])
    gold = np.array([inst.gold for inst in instances])
    return float(np.mean(predict_labels(model, feats) == gold))


def cross_entropy_loss_and_grad(
    weights: np.ndarray,
    features_aug: np.ndarray,
    targets: np.ndarray,
    sample_weights: np.ndarray,
    l2_penalty: float,
) -> tuple[float, np.ndarray]:
    """Weighted mean cross-entropy vs. target distributions, plus L2 on the
    non-bias columns.  Returns (loss, gradient w.r.t. weights).

    features_aug must already carry the bias column.
    """
    logp = _log_softmax(features_aug @ weights.T)  # n x K
    w = sample_weights / np.sum(sample_weights)
    ce = -np.sum(w * np.sum(targets * logp, axis=1))
    reg = weights.copy()
    reg[:, -1] = 0.0  # bias excluded from the penalty
    loss = ce + 0.5 * l2_penalty * float(np.sum(reg * reg))
    probs = np.exp(logp)
    grad = (probs - targets).T @ (features_aug * w[:, None]) + l2_penalty * reg
    return float(loss), grad


def _targets_matrix(data: Sequence[TrainingExample], num_classes: int, label_mode: str) -> np.ndarray:
    out = np.zeros((len(data), num_classes))
    for i, ex in enumerate(data):
        if label_mode == "soft" and ex.target_logprobs is not None:
            out[i] = softmax_probs(ex.target_logprobs)
        else:
            if ex.target_label is not None:
                label = ex.target_label
            else:
                label = int(np.argmax(ex.target_logprobs))
            out[i, label] = 1.0
    return out


def train_student(
    data: Sequence[TrainingExample],
    config: TrainConfig,
    num_classes: int,
) -> StudentModel:
    """Train from zero weights; returns the best-validation checkpoint.

    The seed governs only the validation split and batch shuffling.  When the
    validation split floors to zero examples, early stopping falls back to the
    training loss and the fallback is flagged in train_meta.
    """
    config.validate()
    if len(data) < 2:
        raise ValueError(f"need at least 2 training examples, got {len(data)}")
    feature_dim = int(np.asarray(data[0].features).shape[0])

    X = _augment(np.stack([np.asarray(ex.features, dtype=float) for ex in data]))
    T = _targets_matrix(data, num_classes, config.label_mode)
    sw = np.array([ex.weight for ex in data], dtype=float)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(data))
    n_val = int(len(data) * config.validation_fraction)
    val_idx, train_idx = order[:n_val], order[n_val:]
    used_validation = n_val >= 1
    if not used_validation:
        train_idx = order

    W = np.zeros((num_classes, feature_dim + 1))
    best_W = W.copy()
    best_loss = float("inf")
    best_epoch = 0
    epochs_run = 0

    def held_out_loss(weights: np.ndarray) -> float:
        idx = val_idx if used_validation else train_idx
        logp = _log_softmax(X[idx] @ weights.T)
        w = sw[idx] / np.sum(sw[idx])
        return float(-np.sum(w * np.sum(T[idx] * logp, axis=1)))

    for epoch in range(1, config.max_epochs + 1):
        epochs_run = epoch
        perm = rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), config.batch_size):
            batch = train_idx[perm[start : start + config.batch_size]]
            _, grad = cross_entropy_loss_and_grad(
                W, X[batch], T[batch], sw[batch], config.l2_penalty
            )
            W -= config.learning_rate * grad
        loss = held_out_loss(W)
        if loss < best_loss:
            best_loss = loss
            best_W = W.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break

    meta = TrainMeta(
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        best_validation_loss=best_loss,
        used_validation=used_validation,
        seed=config.seed,
        train_size=len(train_idx),
    )
    return StudentModel(weights=best_W, train_meta=meta)


def clone_model(model: StudentModel) -> StudentModel:
    return StudentModel(weights=model.weights.copy(), train_meta=copy.deepcopy(model.train_meta))


def save_model(model: StudentModel, path: str) -> None:
    """Versioned JSON record with exact float round-trip."""
    record = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "num_classes": model.num_classes,
        "feature_dim": model.feature_dim,
        "weights": model.weights.tolist(),
        "train_meta": model.train_meta.to_dict(),
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str) -> StudentModel:
    with open(path, "r", encoding="utf-8") as fh:
        record = json.load(fh)
    if record.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a student model file")
    if record.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {record.get('version')}")
    weights = np.asarray(record["weights"], dtype=float)
    if weights.shape != (record["num_classes"], record["feature_dim"] + 1):
        raise ValueError(f"{path}: weight matrix shape does not match header")
    return StudentModel(weights=weights, train_meta=TrainMeta.from_dict(record["train_meta"]))
