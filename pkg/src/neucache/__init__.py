"""neucache: replay simulator and policy library for budget-constrained
teacher/student request routing.

A stream of classification requests is served by a cheap retrainable student
while a selection policy decides which requests are worth spending budget on
a recorded teacher oracle, whose answers continuously train the student.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    DatasetError,
    DatasetStats,
    Instance,
    StreamOrder,
    dataset_stats,
    load_dataset,
    make_stream,
    save_dataset,
    split_online_test,
)
from .metrics import (
    RunMetrics,
    SweepReport,
    aggregate_seeds,
    auc_over_budgets,
    build_report,
    online_accuracy,
    oracle_delta,
    run_metrics,
    teacher_wrong_subset_accuracy,
)
from .policies import (
    CriterionScore,
    Decision,
    PolicyConfig,
    PolicyState,
    adaptive_threshold,
    coreset_max_similarity,
    decide,
    entropy,
    margin,
    new_policy_state,
    qbc_disagreement,
    snapshot_committee,
)
from .simulator import (
    BudgetLedger,
    ExperimentConfig,
    RunRecord,
    TraceEntry,
    derive_seed,
    run_experiment,
    run_no_retrain,
    run_stream,
    run_sweep,
    run_warmup,
)
from .student import (
    StudentModel,
    TrainConfig,
    TrainingExample,
    evaluate,
    load_model,
    predict,
    save_model,
    train_student,
    zero_model,
)
from .synth import SyntheticSpec, check_calibration, generate_dataset

__all__ = [
    "BudgetLedger",
    "CriterionScore",
    "Dataset",
    "DatasetError",
    "DatasetStats",
    "Decision",
    "ExperimentConfig",
    "Instance",
    "PolicyConfig",
    "PolicyState",
    "RunMetrics",
    "RunRecord",
    "StreamOrder",
    "StudentModel",
    "SweepReport",
    "SyntheticSpec",
    "TraceEntry",
    "TrainConfig",
    "TrainingExample",
    "adaptive_threshold",
    "aggregate_seeds",
    "auc_over_budgets",
    "build_report",
    "check_calibration",
    "coreset_max_similarity",
    "dataset_stats",
    "decide",
    "derive_seed",
    "entropy",
    "evaluate",
    "generate_dataset",
    "load_dataset",
    "load_model",
    "make_stream",
    "margin",
    "new_policy_state",
    "online_accuracy",
    "oracle_delta",
    "predict",
    "qbc_disagreement",
    "run_experiment",
    "run_metrics",
    "run_no_retrain",
    "run_stream",
    "run_sweep",
    "run_warmup",
    "save_dataset",
    "save_model",
    "snapshot_committee",
    "split_online_test",
    "teacher_wrong_subset_accuracy",
    "train_student",
    "zero_model",
]
