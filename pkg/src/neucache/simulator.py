"""Replay engine: streams instances past a student, routing to the teacher.

One run walks a seeded stream order.  The first ``warmup`` instances are
teacher-annotated (not charged against the budget) and train the initial
student.  Each later instance is scored by the policy, which decides whether
to spend budget on the teacher; teacher answers accumulate into the training
pool, and in the retraining regime the student is rebuilt from scratch on
that pool every ``retrain_frequency`` instances.

Seed scheme: every run owns a single integer seed.  The stream order, the
policy RNG and each training call use seeds derived from it via
``derive_seed``.  Training seeds are keyed by the size of the training pool,
so retraining on an unchanged pool reproduces the identical model (and a
zero-budget run therefore emits exactly the initial student's labels).

Runs are strictly sequential internally; distinct runs share no mutable
state, so sweep cells can execute in parallel in any order.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import Dataset, Instance, StreamOrder, make_stream, stream_instances
from .policies import (
    SCORE_KINDS,
    PolicyConfig,
    PolicyState,
    decide,
    new_policy_state,
    snapshot_committee,
)
from .student import (
    StudentModel,
    TrainConfig,
    TrainingExample,
    predict,
    train_student,
    zero_model,
)

_STREAM_TAG = 101
_POLICY_TAG = 102
_TRAIN_TAG = 103

# Committee prefill for frozen-student runs: snapshots trained on these
# fractions of the warmup pool (e.g. 900/800/700/600 examples at warmup 1000).
PREFILL_FRACTIONS = (0.9, 0.8, 0.7, 0.6)


def derive_seed(run_seed: int, *parts: int) -> int:
    """Deterministic child seed from the run seed and a tag path."""
    if run_seed < 0:
        raise ValueError("run seed must be >= 0")
    ss = np.random.SeedSequence([run_seed, *parts])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ConstantCost:
    """Picklable constant cost function (the stock per-call charge)."""

    value: float

    def __call__(self, _instance: Instance) -> float:
        return self.value


@dataclass
class BudgetLedger:
    """Tracks teacher spend; remaining = initial - sum(costs), never negative."""

    initial: float
    remaining: float
    cost_fn: Callable[[Instance], float]
    spend_log: list[tuple[int, float]] = field(default_factory=list)

    @classmethod
    def constant(cls, budget: float, cost: float = 1.0) -> "BudgetLedger":
        if budget < 0:
            raise ValueError("budget must be >= 0")
        if cost <= 0:
            raise ValueError("cost must be > 0")
        return cls(initial=budget, remaining=budget, cost_fn=ConstantCost(cost))

    def cost(self, instance: Instance) -> float:
        return self.cost_fn(instance)

    @property
    def spent(self) -> float:
        return sum(c for _, c in self.spend_log)

    def charge(self, position: int, cost: float) -> None:
        if cost > self.remaining:
            raise RuntimeError(
                f"ledger overdraft at stream position {position}: "
                f"cost {cost} > remaining {self.remaining}"
            )
        self.remaining -= cost
        self.spend_log.append((position, cost))


@dataclass(frozen=True)
class ExperimentConfig:
    budget: float
    policy: PolicyConfig
    train: TrainConfig = TrainConfig()
    retrain_frequency: int = 1000
    warmup: int = 100
    seed: int = 0
    regime: str = "retrain"  # "retrain" | "no_retrain"
    oracle_filter: bool = False
    cost: float = 1.0

    def validate(self) -> None:
        if self.retrain_frequency < 1:
            raise ValueError("retrain_frequency must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.cost <= 0:
            raise ValueError("cost must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.regime not in ("retrain", "no_retrain"):
            raise ValueError(f"regime must be 'retrain' or 'no_retrain', got {self.regime!r}")
        self.policy.validate()
        self.train.validate()
        if (self.regime == "no_retrain" and self.policy.kind in SCORE_KINDS
                and self.policy.mode != "adaptive"):
            raise ValueError(
                "policy.mode: the no_retrain regime requires adaptive thresholds "
                f"for score-based policies (got mode={self.policy.mode!r})"
            )


@dataclass(frozen=True)
class TraceEntry:
    position: int
    id: str
    student_label: int  # -1 during warmup (no student existed yet)
    teacher_called: bool
    emitted_label: int
    correct: bool

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "id": self.id,
            "student_label": self.student_label,
            "teacher_called": self.teacher_called,
            "emitted_label": self.emitted_label,
            "correct": self.correct,
        }


@dataclass(frozen=True)
class RetrainEvent:
    position: int
    pool_size: int
    epochs_run: int


@dataclass
class Warmup:
    model: StudentModel
    examples: list[TrainingExample]
    cursor: int
    trace: list[TraceEntry]


@dataclass
class RunRecord:
    policy: str
    budget: float
    seed: int
    regime: str
    warmup_size: int
    trace: list[TraceEntry]           # post-warmup scored window
    warmup_trace: list[TraceEntry]
    retrain_events: list[RetrainEvent]
    ledger: BudgetLedger
    initial_model: StudentModel
    final_model: StudentModel
    pool_size: int                    # accumulated teacher-labelled examples
    filtered_drops: int
    qbc_degenerate_decisions: int


def _teacher_example(inst: Instance) -> TrainingExample:
    return TrainingExample(
        features=inst.features,
        target_logprobs=inst.teacher_logprobs,
        target_label=inst.teacher_label,
    )


def _train_or_zero(examples: Sequence[TrainingExample], train: TrainConfig,
                   run_seed: int, num_classes: int, feature_dim: int) -> StudentModel:
    # Seed keyed by pool size: unchanged pool -> identical model.
    if len(examples) < 2:
        return zero_model(num_classes, feature_dim)
    seeded = dataclasses.replace(train, seed=derive_seed(run_seed, _TRAIN_TAG, len(examples)))
    return train_student(examples, seeded, num_classes)


def run_warmup(dataset: Dataset, stream: StreamOrder, n_warmup: int,
               train: TrainConfig, run_seed: int) -> Warmup:
    """Teacher-annotate the first n_warmup stream instances (not charged) and
    train the initial student on them.  Warmup labels are kept unfiltered so
    paired oracle-filter runs share the same initial student."""
    if n_warmup > len(stream):
        raise ValueError(f"warmup {n_warmup} exceeds stream length {len(stream)}")
    insts = stream_instances(dataset, stream)[:n_warmup]
    examples = [_teacher_example(inst) for inst in insts]
    model = _train_or_zero(examples, train, run_seed, dataset.num_classes, dataset.feature_dim)
    trace = [
        TraceEntry(
            position=i,
            id=inst.id,
            student_label=-1,
            teacher_called=True,
            emitted_label=inst.teacher_label,
            correct=inst.teacher_label == inst.gold,
        )
        for i, inst in enumerate(insts)
    ]
    return Warmup(model=model, examples=examples, cursor=n_warmup, trace=trace)


def _prefill_committee(state: PolicyState, warmup: Warmup, train: TrainConfig,
                       run_seed: int, num_classes: int, feature_dim: int) -> None:
    # Oldest (smallest prefix) first, matching snapshot order in live runs.
    sizes = []
    for frac in PREFILL_FRACTIONS:
        size = min(round(frac * len(warmup.examples)), len(warmup.examples))
        if size >= 2:
            sizes.append(size)
    for size in sorted(sizes):
        model = _train_or_zero(
            warmup.examples[:size], train, run_seed, num_classes, feature_dim
        )
        snapshot_committee(state, model)


def _execute(dataset: Dataset, stream: StreamOrder, config: ExperimentConfig,
             warmup: Warmup, retrain_enabled: bool) -> RunRecord:
    config.validate()
    insts = stream_instances(dataset, stream)
    start = warmup.cursor
    window = insts[start:]

    ledger = BudgetLedger.constant(config.budget, config.cost)
    state = new_policy_state(config.policy, derive_seed(config.seed, _POLICY_TAG))
    if config.policy.kind == "cs":
        for inst in insts[:start]:
            state.record_teacher_annotation(inst.embedding)
    if not retrain_enabled and config.policy.kind == "qbc":
        _prefill_committee(state, warmup, config.train, config.seed,
                           dataset.num_classes, dataset.feature_dim)

    model = warmup.model
    pool = list(warmup.examples)
    trace: list[TraceEntry] = []
    retrain_events: list[RetrainEvent] = []
    drops = 0

    for j, inst in enumerate(window):
        position = start + j
        if retrain_enabled and j % config.retrain_frequency == 0:
            outgoing = model
            model = _train_or_zero(pool, config.train, config.seed,
                                   dataset.num_classes, dataset.feature_dim)
            snapshot_committee(state, outgoing)
            retrain_events.append(RetrainEvent(
                position=position,
                pool_size=len(pool),
                epochs_run=model.train_meta.epochs_run,
            ))

        logprobs = predict(model, inst.features)
        student_label = int(np.argmax(logprobs))
        decision = decide(
            state,
            logprobs,
            remaining_budget=ledger.remaining,
            cost=ledger.cost(inst),
            remaining_instances=len(window) - j,
            features=inst.features,
            embedding=inst.embedding,
        )

        if decision.call_teacher:
            ledger.charge(position, ledger.cost(inst))
            emitted = inst.teacher_label
            state.record_teacher_annotation(inst.embedding)
            if config.oracle_filter and emitted != inst.gold:
                drops += 1  # charged and emitted, but excluded from training
            else:
                pool.append(_teacher_example(inst))
        else:
            emitted = student_label

        trace.append(TraceEntry(
            position=position,
            id=inst.id,
            student_label=student_label,
            teacher_called=decision.call_teacher,
            emitted_label=emitted,
            correct=emitted == inst.gold,
        ))

    return RunRecord(
        policy=config.policy.name,
        budget=config.budget,
        seed=config.seed,
        regime=config.regime,
        warmup_size=warmup.cursor,
        trace=trace,
        warmup_trace=list(warmup.trace),
        retrain_events=retrain_events,
        ledger=ledger,
        initial_model=warmup.model,
        final_model=model,
        pool_size=len(pool),
        filtered_drops=drops,
        qbc_degenerate_decisions=state.qbc_degenerate_decisions,
    )


def run_stream(dataset: Dataset, stream: StreamOrder, config: ExperimentConfig,
               warmup: Warmup) -> RunRecord:
    """Full run with periodic retraining (the retrain regime)."""
    if config.regime != "retrain":
        raise ValueError(f"run_stream expects regime='retrain', got {config.regime!r}")
    return _execute(dataset, stream, config, warmup, retrain_enabled=True)


def run_no_retrain(dataset: Dataset, stream: StreamOrder, config: ExperimentConfig,
                   warmup: Warmup) -> RunRecord:
    """Frozen-student run; the committee is prefilled from warmup prefixes."""
    if config.regime != "no_retrain":
        raise ValueError(f"run_no_retrain expects regime='no_retrain', got {config.regime!r}")
    return _execute(dataset, stream, config, warmup, retrain_enabled=False)


def run_experiment(dataset: Dataset, config: ExperimentConfig) -> RunRecord:
    """Stream order + warmup + regime dispatch for a single run seed."""
    config.validate()
    stream = make_stream(dataset, derive_seed(config.seed, _STREAM_TAG))
    warmup = run_warmup(dataset, stream, config.warmup, config.train, config.seed)
    if config.regime == "retrain":
        return run_stream(dataset, stream, config, warmup)
    return run_no_retrain(dataset, stream, config, warmup)


def export_trace(record: RunRecord, path: str, include_warmup: bool = False) -> None:
    """Write the per-instance trace as JSONL (atomic)."""
    entries = (record.warmup_trace + record.trace) if include_warmup else record.trace
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
    os.replace(tmp, path)


@dataclass
class SweepCell:
    policy: str
    budget: float
    seed: int
    record: RunRecord
    metrics: "RunMetrics"  # noqa: F821  (metrics imported lazily)


_WORKER: dict = {}


def _cell_config(base: ExperimentConfig, policy: PolicyConfig, budget: float,
                 seed: int) -> ExperimentConfig:
    return dataclasses.replace(base, policy=policy, budget=budget, seed=seed)


def _run_cell(args: tuple) -> SweepCell:
    from .metrics import run_metrics

    policy, budget, seed = args
    dataset = _WORKER["dataset"]
    base = _WORKER["base"]
    trace_dir = _WORKER["trace_dir"]
    config = _cell_config(base, policy, budget, seed)
    record = run_experiment(dataset, config)
    if trace_dir is not None:
        fname = f"{config.policy.name}-{budget:g}-{seed}.jsonl"
        export_trace(record, os.path.join(trace_dir, fname))
    metrics = run_metrics(record, dataset, include_warmup=_WORKER["include_warmup"])
    return SweepCell(policy=config.policy.name, budget=budget, seed=seed,
                     record=record, metrics=metrics)


def _init_worker(dataset: Dataset, base: ExperimentConfig, trace_dir: str | None,
                 include_warmup: bool) -> None:
    _WORKER["dataset"] = dataset
    _WORKER["base"] = base
    _WORKER["trace_dir"] = trace_dir
    _WORKER["include_warmup"] = include_warmup


def run_sweep(
    dataset: Dataset,
    config: ExperimentConfig,
    budgets: Sequence[float],
    seeds: Sequence[int],
    policies: Sequence[PolicyConfig] | None = None,
    jobs: int = 1,
    trace_dir: str | None = None,
    include_warmup: bool = False,
) -> list[SweepCell]:
    """Cross-product of policies x budgets x seeds; cells are independent and
    the result order is deterministic regardless of execution order."""
    if not budgets:
        raise ValueError("budget grid must be nonempty")
    if not seeds:
        raise ValueError("seed list must be nonempty")
    policy_list = list(policies) if policies else [config.policy]
    labels = [p.name for p in policy_list]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate policy labels in sweep: {labels}")
    if trace_dir is not None:
        os.makedirs(trace_dir, exist_ok=True)

    tasks = [(policy, float(budget), int(seed))
             for policy in policy_list for budget in budgets for seed in seeds]

    if jobs <= 1 or len(tasks) == 1:
        _init_worker(dataset, config, trace_dir, include_warmup)
        try:
            cells = [_run_cell(task) for task in tasks]
        finally:
            _WORKER.clear()
    else:
        import multiprocessing
        from concurrent.futures import ProcessPoolExecutor

        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(
            max_workers=min(jobs, len(tasks)),
            mp_context=ctx,
            initializer=_init_worker,
            initargs=(dataset, config, trace_dir, include_warmup),
        ) as pool:
            cells = list(pool.map(_run_cell, tasks))

    cells.sort(key=lambda c: (c.policy, c.budget, c.seed))
    return cells
