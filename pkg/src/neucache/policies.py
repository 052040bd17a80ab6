"""Selection policies: decide, per stream instance, whether to call the teacher.

Six policy kinds:

  fr       front-loading: call while budget remains
  random   per-instance Bernoulli at the remaining spend rate
  ms       margin sampling on the student's top-two log-probabilities
  pe       prediction entropy of the student distribution
  qbc      committee disagreement against prior student snapshots
  cs       embedding dissimilarity against past teacher-annotated inputs

Score-based kinds run in one of two threshold modes: "fixed" (a constant
threshold in the criterion's natural units) or "adaptive" (the percentile of
the score history matching the remaining spend rate).  All scores are
normalised internally to uncertainty orientation, where higher always means
"more uncertain, prefer calling the teacher".
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .student import StudentModel, predict

POLICY_KINDS = ("fr", "random", "ms", "pe", "qbc", "cs")
SCORE_KINDS = ("ms", "pe", "qbc", "cs")

# Sentinel similarity for an empty coreset store: below any real threshold.
EMPTY_STORE_SIMILARITY = float("-inf")

DEFAULT_FIXED_THRESHOLDS = {
    "ms": 5.0,
    "pe": 0.5,
    # Disagreement fraction; at committee size 4 this selects when at least
    # one member contradicts the current student.
    "qbc": 0.25,
}


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "ms"
    mode: str = "adaptive"  # "fixed" | "adaptive"
    fixed_threshold: float | None = None
    committee_size: int = 4
    coreset_threshold: float = 0.9  # cosine similarity s; call when below
    invert_margin: bool = False     # ablation: treat high margin as uncertain
    label: str | None = None

    def validate(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"policy mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if self.committee_size < 1:
            raise ValueError("committee_size must be >= 1")
        if not -1.0 <= self.coreset_threshold <= 1.0:
            raise ValueError("coreset_threshold must be a cosine similarity in [-1, 1]")
        if self.kind in ("ms", "pe", "qbc") and self.mode == "fixed":
            if self.effective_fixed_threshold() is None:
                raise ValueError(f"fixed mode for {self.kind} needs fixed_threshold")

    def effective_fixed_threshold(self) -> float | None:
        if self.fixed_threshold is not None:
            return self.fixed_threshold
        return DEFAULT_FIXED_THRESHOLDS.get(self.kind)

    @property
    def name(self) -> str:
        return self.label if self.label else self.kind


@dataclass(frozen=True)
class CriterionScore:
    """A raw criterion value plus its orientation.

    `higher_is_uncertain` fixes how the value maps onto the shared
    "most-uncertain first" scale used for all threshold comparisons.
    """

    value: float
    higher_is_uncertain: bool

    def uncertainty(self) -> float:
        return self.value if self.higher_is_uncertain else -self.value

    def negated(self) -> "CriterionScore":
        return CriterionScore(-self.value, not self.higher_is_uncertain)


@dataclass(frozen=True)
class Decision:
    call_teacher: bool
    score: CriterionScore | None = None
    threshold_used: float | None = None  # uncertainty orientation
    forced_by_budget: bool = False


@dataclass
class PolicyState:
    """Per-run mutable policy memory; owned by exactly one run."""

    config: PolicyConfig
    rng: np.random.Generator
    history: list[float] = field(default_factory=list)  # uncertainty-oriented
    committee: deque = field(default_factory=deque)      # prior StudentModel snapshots
    coreset_store: list = field(default_factory=list)    # unit-norm embeddings
    qbc_degenerate_decisions: int = 0

    def record_teacher_annotation(self, embedding: np.ndarray) -> None:
        """Grow the coreset store with a teacher-annotated input."""
        if self.config.kind != "cs":
            return
        emb = np.asarray(embedding, dtype=float)
        norm = np.linalg.norm(emb)
        if norm == 0.0:
            raise ValueError("coreset store requires nonzero-norm embeddings")
        self.coreset_store.append(emb / norm)


def new_policy_state(config: PolicyConfig, rng_seed: int) -> PolicyState:
    config.validate()
    return PolicyState(config=config, rng=np.random.default_rng(rng_seed))


def margin(logprobs: np.ndarray) -> float:
    """Difference between the top-two log-probabilities; lower means more
    uncertain.  Shift-invariant, so raw stored teacher values need no
    renormalisation."""
    lp = np.asarray(logprobs, dtype=float)
    if lp.shape[0] < 2:
        raise ValueError("margin needs at least 2 classes")
    if not np.all(np.isfinite(lp)):
        raise ValueError("margin requires finite log-probabilities")
    top2 = np.partition(lp, -2)[-2:]
    return float(top2[1] - top2[0])


def entropy(logprobs: np.ndarray) -> float:
    """Shannon entropy (nats) of softmax(logprobs); higher means more
    uncertain.  Softmax renormalisation makes filler values (-100) harmless."""
    lp = np.asarray(logprobs, dtype=float)
    if not np.all(np.isfinite(lp)):
        raise ValueError("entropy requires finite log-probabilities")
    z = lp - np.max(lp)
    logp = z - math.log(float(np.sum(np.exp(z))))
    p = np.exp(logp)
    return float(-np.sum(np.where(p > 0.0, p * logp, 0.0)))


def qbc_disagreement(current_label: int, committee_labels: list[int]) -> float:
    """Fraction of committee labels contradicting the current student; an
    empty committee carries no disagreement signal and scores 0."""
    if not committee_labels:
        return 0.0
    disagree = sum(1 for lbl in committee_labels if lbl != current_label)
    return disagree / len(committee_labels)


def coreset_max_similarity(embedding: np.ndarray, store: list[np.ndarray]) -> float:
    """Maximum cosine similarity against the store of unit-norm embeddings;
    an empty store yields -inf (always below any real threshold)."""
    emb = np.asarray(embedding, dtype=float)
    norm = np.linalg.norm(emb)
    if norm == 0.0:
        raise ValueError("embedding must have nonzero norm")
    if not store:
        return EMPTY_STORE_SIMILARITY
    sims = np.asarray(store) @ (emb / norm)
    return float(np.max(sims))


def adaptive_threshold(
    history: list[float], remaining_budget: float, remaining_instances: int
) -> float:
    """Threshold at the spend-rate percentile of the score history.

    With q = min(1, remaining_budget / remaining_instances), returns the
    nearest-rank q-th percentile counted from the most-uncertain end of the
    history, so that a score at least as uncertain as the threshold selects
    roughly a q fraction of comparable traffic.  An empty history (or q >= 1)
    yields a fully permissive threshold.
    """
    if remaining_instances < 1:
        raise ValueError("remaining_instances must be >= 1")
    q = min(1.0, remaining_budget / remaining_instances)
    if not history or q >= 1.0:
        return float("-inf")
    if q <= 0.0:
        return float("inf")
    ordered = sorted(history, reverse=True)  # most uncertain first
    rank = math.ceil(q * len(ordered))
    return ordered[min(rank, len(ordered)) - 1]


def snapshot_committee(state: PolicyState, model: StudentModel) -> None:
    """Append a retired student snapshot, evicting the oldest beyond the
    configured committee size."""
    state.committee.append(model)
    while len(state.committee) > state.config.committee_size:
        state.committee.popleft()


def _score(state: PolicyState, student_logprobs: np.ndarray, features: np.ndarray | None,
           embedding: np.ndarray | None) -> CriterionScore:
    kind = state.config.kind
    if kind == "ms":
        m = margin(student_logprobs)
        return CriterionScore(m, higher_is_uncertain=state.config.invert_margin)
    if kind == "pe":
        return CriterionScore(entropy(student_logprobs), higher_is_uncertain=True)
    if kind == "qbc":
        if not state.committee:
            state.qbc_degenerate_decisions += 1
            return CriterionScore(0.0, higher_is_uncertain=True)
        current = int(np.argmax(student_logprobs))
        labels = [int(np.argmax(predict(m, features))) for m in state.committee]
        return CriterionScore(qbc_disagreement(current, labels), higher_is_uncertain=True)
    if kind == "cs":
        if embedding is None:
            raise ValueError("coreset policy needs the instance embedding")
        sim = coreset_max_similarity(embedding, state.coreset_store)
        return CriterionScore(sim, higher_is_uncertain=False)
    raise ValueError(f"{kind} is not a score-based policy")


def _fixed_threshold_uncertainty(config: PolicyConfig) -> float:
    raw = config.effective_fixed_threshold()
    if config.kind == "ms":
        return raw if config.invert_margin else -raw
    return raw  # pe, qbc: already uncertainty-oriented


def decide(
    state: PolicyState,
    student_logprobs: np.ndarray,
    remaining_budget: float,
    cost: float,
    remaining_instances: int,
    features: np.ndarray | None = None,
    embedding: np.ndarray | None = None,
) -> Decision:
    """One routing decision.  The caller charges the ledger and records the
    teacher annotation afterwards; call_teacher is forced false whenever the
    remaining budget cannot cover this instance's cost.

    In adaptive mode the incoming score is compared against the history of
    earlier scores before being appended to it.
    """
    config = state.config
    affordable = remaining_budget >= cost

    if config.kind == "fr":
        return Decision(call_teacher=affordable, forced_by_budget=not affordable)

    if config.kind == "random":
        rate = min(1.0, remaining_budget / max(remaining_instances, 1))
        want = bool(state.rng.random() < rate)
        return Decision(call_teacher=want and affordable,
                        forced_by_budget=want and not affordable)

    score = _score(state, student_logprobs, features, embedding)
    u = score.uncertainty()

    if config.kind == "cs" and config.mode == "fixed":
        # Similarity rule: call only when no stored input is close enough.
        sim = score.value
        want = sim < config.coreset_threshold
        threshold = -config.coreset_threshold
    elif config.kind == "qbc" and config.mode == "fixed" and not state.committee:
        # Degenerate committee carries no signal: never select.
        want = False
        threshold = _fixed_threshold_uncertainty(config)
    elif config.mode == "fixed":
        threshold = _fixed_threshold_uncertainty(config)
        want = u >= threshold
    else:
        threshold = adaptive_threshold(state.history, remaining_budget, remaining_instances)
        want = u >= threshold
        state.history.append(u)

    return Decision(
        call_teacher=want and affordable,
        score=score,
        threshold_used=threshold,
        forced_by_budget=want and not affordable,
    )
