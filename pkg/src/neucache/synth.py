"""Synthetic dataset generator for desk-scale experiments.

Builds Gaussian class clusters for features and embeddings, then simulates a
teacher whose accuracy and margin statistics are calibrated by construction:

  * exactly round((1 - accuracy) * n) items receive a wrong teacher label,
    drawn preferentially from items that are hard under the generating model
    (controlled by ``hardness_bias``);
  * per-item teacher margins are sampled and rescaled so the mean margin and
    the mean margin on wrong items hit their targets, keeping wrong-label
    margins systematically lower than correct-label ones.

Everything is deterministic given the generation seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FILLER_LOGPROB, Dataset, Instance

MAX_MARGIN = 90.0  # keeps the runner-up log-prob above the -100 filler


@dataclass(frozen=True)
class SyntheticSpec:
    name: str
    class_names: tuple[str, ...]
    online_size: int
    test_size: int
    feature_dim: int = 16
    embedding_dim: int = 8
    separation: float = 2.0
    embedding_separation: float | None = None  # defaults to `separation`
    teacher_accuracy: float = 0.9
    avg_margin: float = 8.0
    avg_margin_when_wrong: float = 3.0
    hardness_bias: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if len(self.class_names) < 2:
            raise ValueError("need at least 2 classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("duplicate class names")
        if self.online_size < 1 or self.test_size < 0:
            raise ValueError("online_size must be >= 1 and test_size >= 0")
        if self.feature_dim < 1 or self.embedding_dim < 1:
            raise ValueError("dimensions must be positive")
        if not 0.0 <= self.teacher_accuracy <= 1.0:
            raise ValueError("teacher_accuracy must be in [0, 1]")
        if self.separation < 0.0:
            raise ValueError("separation must be >= 0")
        if not 0.0 < self.avg_margin_when_wrong <= self.avg_margin <= MAX_MARGIN:
            raise ValueError(
                "margins must satisfy 0 < avg_margin_when_wrong <= avg_margin <= "
                f"{MAX_MARGIN}"
            )


def _unit_rows(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    m = rng.standard_normal((rows, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _rescale_to_mean(values: np.ndarray, target: float) -> np.ndarray:
    if values.size == 0:
        return values
    scaled = values * (target / float(np.mean(values)))
    return np.clip(scaled, 1e-6, MAX_MARGIN)


def _teacher_logprobs(num_classes: int, top: int, second: int, m: float) -> np.ndarray:
    # Two-mass distribution: p_top + p_second = 1, log-ratio exactly m.
    lp = np.full(num_classes, FILLER_LOGPROB)
    lp_top = -np.log1p(np.exp(-m))
    lp[top] = lp_top
    lp[second] = lp_top - m
    return lp


def generate_dataset(spec: SyntheticSpec) -> Dataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k = len(spec.class_names)
    n = spec.online_size + spec.test_size

    feat_means = _unit_rows(rng, k, spec.feature_dim) * spec.separation
    emb_sep = spec.separation if spec.embedding_separation is None else spec.embedding_separation
    emb_means = _unit_rows(rng, k, spec.embedding_dim) * emb_sep

    gold = rng.integers(0, k, size=n)
    features = feat_means[gold] + rng.standard_normal((n, spec.feature_dim))
    embeddings = emb_means[gold] + rng.standard_normal((n, spec.embedding_dim))

    # Hardness under the generating model: gap between the true-class
    # discriminant and the best rival (isotropic Gaussian, equal priors).
    scores = features @ feat_means.T - 0.5 * np.sum(feat_means**2, axis=1)
    rival = scores.copy()
    rival[np.arange(n), gold] = -np.inf
    runner_up = np.argmax(rival, axis=1)
    gap = scores[np.arange(n), gold] - rival[np.arange(n), runner_up]

    n_wrong = round((1.0 - spec.teacher_accuracy) * n)
    if n_wrong > 0:
        std = float(np.std(gap))
        hardness = -(gap - np.mean(gap)) / (std if std > 0 else 1.0)
        # Gumbel-top-k: weighted sample of wrong items without replacement.
        keys = spec.hardness_bias * hardness + rng.gumbel(size=n)
        wrong_idx = np.argpartition(keys, -n_wrong)[-n_wrong:]
    else:
        wrong_idx = np.array([], dtype=int)
    wrong_mask = np.zeros(n, dtype=bool)
    wrong_mask[wrong_idx] = True

    teacher_top = gold.copy()
    teacher_top[wrong_mask] = runner_up[wrong_mask]
    # Runner-up in the stored distribution: the class the teacher was torn
    # against, i.e. the rival when right and the truth when wrong.
    teacher_second = runner_up.copy()
    teacher_second[wrong_mask] = gold[wrong_mask]

    margins = np.empty(n)
    margins[wrong_mask] = _rescale_to_mean(
        rng.gamma(shape=4.0, scale=1.0, size=int(n_wrong)), spec.avg_margin_when_wrong
    )
    n_correct = n - n_wrong
    if n_correct > 0:
        correct_target = (spec.avg_margin * n - spec.avg_margin_when_wrong * n_wrong) / n_correct
        margins[~wrong_mask] = _rescale_to_mean(
            rng.gamma(shape=4.0, scale=1.0, size=n_correct), correct_target
        )

    instances = []
    width = len(str(n - 1))
    for i in range(n):
        lp = _teacher_logprobs(k, int(teacher_top[i]), int(teacher_second[i]), float(margins[i]))
        instances.append(Instance(
            id=f"{spec.name}-{i:0{width}d}",
            text=None,
            features=features[i],
            embedding=embeddings[i],
            gold=int(gold[i]),
            teacher_logprobs=lp,
        ))

    assignment = rng.permutation(n)
    online = [instances[i] for i in sorted(assignment[: spec.online_size])]
    test = [instances[i] for i in sorted(assignment[spec.online_size :])]
    return Dataset(
        name=spec.name,
        class_names=list(spec.class_names),
        online=online,
        test=test,
        feature_dim=spec.feature_dim,
        embedding_dim=spec.embedding_dim,
        note=f"synthetic (seed={spec.seed})",
    )


@dataclass
class SynthCheckResult:
    realized_teacher_accuracy: float
    target_teacher_accuracy: float
    avg_margin: float
    avg_margin_when_wrong: float | None
    margins_ordered: bool
    accuracy_within_tolerance: bool
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "realized_teacher_accuracy": self.realized_teacher_accuracy,
            "target_teacher_accuracy": self.target_teacher_accuracy,
            "avg_margin": self.avg_margin,
            "avg_margin_when_wrong": self.avg_margin_when_wrong,
            "margins_ordered": self.margins_ordered,
            "accuracy_within_tolerance": self.accuracy_within_tolerance,
            "failures": self.failures,
            "ok": self.ok,
        }


def check_calibration(dataset: Dataset, spec: SyntheticSpec,
                      accuracy_tolerance: float = 0.01) -> SynthCheckResult:
    """Validate a generated dataset against its spec's calibration targets."""
    from .data import dataset_stats

    stats = dataset_stats(dataset)
    failures = []
    acc_ok = abs(stats.teacher_accuracy - spec.teacher_accuracy) <= accuracy_tolerance
    if not acc_ok:
        failures.append(
            f"teacher accuracy {stats.teacher_accuracy:.4f} misses target "
            f"{spec.teacher_accuracy:.4f} by more than {accuracy_tolerance}"
        )
    ordered = True
    if stats.avg_margin_when_wrong is not None:
        ordered = stats.avg_margin_when_wrong < stats.avg_margin
        if not ordered:
            failures.append(
                f"wrong-label mean margin {stats.avg_margin_when_wrong:.3f} is not "
                f"below overall mean margin {stats.avg_margin:.3f}"
            )
    return SynthCheckResult(
        realized_teacher_accuracy=stats.teacher_accuracy,
        target_teacher_accuracy=spec.teacher_accuracy,
        avg_margin=stats.avg_margin,
        avg_margin_when_wrong=stats.avg_margin_when_wrong,
        margins_ordered=ordered,
        accuracy_within_tolerance=acc_ok,
        failures=failures,
    )
