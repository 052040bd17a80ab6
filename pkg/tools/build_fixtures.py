#!/usr/bin/env python3
"""Rebuild the vendored benchmark fixtures under data/fixtures/.

Each fixture is a deterministic synthetic sample whose teacher accuracy and
margin statistics are calibrated to the published values for the
corresponding annotation benchmark.  They are stand-ins that keep the stats
and replay pipelines testable offline; they are not the original datasets.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from neucache.data import save_dataset
from neucache.synth import SyntheticSpec, generate_dataset

FIXTURES = [
    SyntheticSpec(
        name="isear",
        class_names=("joy", "fear", "shame", "sadness", "guilt", "disgust", "anger"),
        online_size=1200, test_size=300,
        feature_dim=16, embedding_dim=8,
        separation=1.4,
        teacher_accuracy=0.68, avg_margin=10.0, avg_margin_when_wrong=4.2,
        hardness_bias=1.0, seed=101,
    ),
    SyntheticSpec(
        name="rtpolarity",
        class_names=("positive", "negative"),
        online_size=1200, test_size=300,
        feature_dim=16, embedding_dim=8,
        separation=1.6,
        teacher_accuracy=0.91, avg_margin=15.4, avg_margin_when_wrong=10.3,
        hardness_bias=1.0, seed=102,
    ),
    SyntheticSpec(
        name="fever",
        class_names=("true", "false"),
        online_size=1200, test_size=300,
        feature_dim=16, embedding_dim=8,
        separation=0.9,
        teacher_accuracy=0.78, avg_margin=9.2, avg_margin_when_wrong=6.9,
        hardness_bias=1.0, seed=103,
    ),
    SyntheticSpec(
        name="openbook",
        class_names=("A", "B", "C", "D"),
        online_size=1200, test_size=300,
        feature_dim=16, embedding_dim=8,
        separation=0.8,
        teacher_accuracy=0.80, avg_margin=10.3, avg_margin_when_wrong=5.3,
        hardness_bias=1.0, seed=104,
    ),
]

NOTE = ("synthetic stand-in calibrated to the published teacher accuracy and "
        "margin statistics of this benchmark; not the original annotations")


def main() -> int:
    out_root = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")
    for spec in FIXTURES:
        dataset = generate_dataset(spec)
        dataset.note = NOTE
        path = os.path.normpath(os.path.join(out_root, spec.name))
        save_dataset(dataset, path)
        print(f"wrote {path} ({len(dataset.online)} online, {len(dataset.test)} test)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
