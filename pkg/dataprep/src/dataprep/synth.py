"""Synthetic dataset generation with a noisy-channel simulated teacher.

Features and embeddings are Gaussian class clusters.  The teacher's label
distribution for an item with gold class g is

    log_softmax(sharpness * onehot(g) + noise),   noise ~ N(0, noise_scale^2)

where the sharpness is found by bisection on the realised argmax accuracy of
the actual noise draws, so the target accuracy is hit almost exactly and the
whole construction stays deterministic for a given seed.  Wrong labels arise
where the noise beats the sharpened gold logit, which automatically leaves
their margins below the correct-label margins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import Record, write_dataset_dir


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    name: str
    class_names: tuple[str, ...]
    online_size: int
    test_size: int
    feature_dim: int = 16
    embedding_dim: int = 8
    separation: float = 2.0
    teacher_accuracy: float = 0.9
    noise_scale: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        k = len(self.class_names)
        if k < 2:
            raise SynthError("need at least 2 classes")
        if len(set(self.class_names)) != k:
            raise SynthError("duplicate class names")
        if self.online_size < 1 or self.test_size < 0:
            raise SynthError("online_size must be >= 1 and test_size >= 0")
        if self.feature_dim < 1 or self.embedding_dim < 1:
            raise SynthError("dimensions must be positive")
        if self.separation < 0:
            raise SynthError("separation must be >= 0")
        if self.noise_scale <= 0:
            raise SynthError("noise_scale must be > 0")
        if self.teacher_accuracy >= 1.0:
            raise SynthError(
                "teacher accuracy 1.0 is infeasible with nonzero noise; "
                "pick a target below 1"
            )
        if self.teacher_accuracy <= 1.0 / k:
            raise SynthError(
                f"teacher accuracy must exceed chance (1/{k}); the noisy channel "
                "cannot be calibrated below it"
            )


def _realized_accuracy(sharpness: float, gold: np.ndarray, noise: np.ndarray) -> float:
    logits = noise.copy()
    logits[np.arange(len(gold)), gold] += sharpness
    return float(np.mean(np.argmax(logits, axis=1) == gold))


def calibrate_sharpness(gold: np.ndarray, noise: np.ndarray, target: float,
                        tolerance: float = 0.005) -> float:
    """Bisection on realised accuracy; monotone in the sharpness."""
    lo, hi = 0.0, 1.0
    while _realized_accuracy(hi, gold, noise) < target:
        hi *= 2.0
        if hi > 1e6:  # pragma: no cover - unreachable for valid specs
            raise SynthError("sharpness search diverged")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        acc = _realized_accuracy(mid, gold, noise)
        if abs(acc - target) <= tolerance:
            return mid
        if acc < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(spec: SyntheticSpec) -> tuple[list[Record], list[Record]]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k = len(spec.class_names)
    n = spec.online_size + spec.test_size

    def unit_rows(rows: int, dim: int) -> np.ndarray:
        m = rng.standard_normal((rows, dim))
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    feat_means = unit_rows(k, spec.feature_dim) * spec.separation
    emb_means = unit_rows(k, spec.embedding_dim) * spec.separation
    gold = rng.integers(0, k, size=n)
    features = feat_means[gold] + rng.standard_normal((n, spec.feature_dim))
    embeddings = emb_means[gold] + rng.standard_normal((n, spec.embedding_dim))

    noise = rng.standard_normal((n, k)) * spec.noise_scale
    sharpness = calibrate_sharpness(gold, noise, spec.teacher_accuracy)
    logits = noise
    logits[np.arange(n), gold] += sharpness
    logprobs = logits - np.log(np.sum(np.exp(logits - logits.max(axis=1, keepdims=True)),
                                      axis=1, keepdims=True)) - logits.max(axis=1, keepdims=True)

    width = len(str(n - 1))
    records = [
        Record(
            id=f"{spec.name}-{i:0{width}d}",
            text=None,
            features=[float(v) for v in features[i]],
            embedding=[float(v) for v in embeddings[i]],
            gold=int(gold[i]),
            teacher_logprobs=[float(v) for v in logprobs[i]],
        )
        for i in range(n)
    ]
    assignment = rng.permutation(n)
    online = [records[i] for i in sorted(assignment[: spec.online_size])]
    test = [records[i] for i in sorted(assignment[spec.online_size :])]
    return online, test


def generate_to_dir(spec: SyntheticSpec, out_dir: str) -> None:
    online, test = generate(spec)
    write_dataset_dir(
        out_dir,
        name=spec.name,
        class_names=list(spec.class_names),
        online=online,
        test=test,
        note=f"synthetic noisy-channel teacher (seed={spec.seed})",
    )


def teacher_stats(records: list[Record]) -> dict:
    """Realised accuracy and margin means, for calibration checks."""
    correct, margins_right, margins_wrong = 0, [], []
    for r in records:
        lp = np.asarray(r.teacher_logprobs)
        top2 = np.partition(lp, -2)[-2:]
        m = float(top2[1] - top2[0])
        if int(np.argmax(lp)) == r.gold:
            correct += 1
            margins_right.append(m)
        else:
            margins_wrong.append(m)
    return {
        "accuracy": correct / len(records),
        "mean_margin_correct": float(np.mean(margins_right)) if margins_right else None,
        "mean_margin_wrong": float(np.mean(margins_wrong)) if margins_wrong else None,
    }
