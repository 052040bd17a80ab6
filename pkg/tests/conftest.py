import numpy as np
import pytest

from neucache.data import Dataset, Instance
from neucache.synth import SyntheticSpec, generate_dataset


def make_instance(idx, features, gold, teacher_logprobs, embedding=None, k=None):
    features = np.asarray(features, dtype=float)
    if embedding is None:
        embedding = features[:2] if features.shape[0] >= 2 else np.ones(2)
    return Instance(
        id=f"inst-{idx}",
        text=None,
        features=features,
        embedding=np.asarray(embedding, dtype=float),
        gold=gold,
        teacher_logprobs=np.asarray(teacher_logprobs, dtype=float),
    )


def tiny_dataset():
    """Four online + two test instances, K=2, hand-checkable."""
    online = [
        make_instance(0, [1.0, 0.0], 0, [-0.1, -2.5]),
        make_instance(1, [0.9, 0.1], 0, [-0.2, -1.8]),
        make_instance(2, [0.0, 1.0], 1, [-2.0, -0.15]),
        make_instance(3, [0.1, 0.9], 1, [-1.5, -0.3]),
    ]
    test = [
        make_instance(4, [1.1, -0.1], 0, [-0.05, -3.0]),
        make_instance(5, [-0.1, 1.1], 1, [-2.2, -0.1]),
    ]
    return Dataset(
        name="tiny",
        class_names=["alpha", "beta"],
        online=online,
        test=test,
        feature_dim=2,
        embedding_dim=2,
    )


@pytest.fixture
def tiny():
    return tiny_dataset()


@pytest.fixture(scope="session")
def small_synth():
    """Learnable 3-class clusters with a decent teacher; session-cached."""
    spec = SyntheticSpec(
        name="small",
        class_names=("a", "b", "c"),
        online_size=600,
        test_size=150,
        feature_dim=8,
        embedding_dim=6,
        separation=1.8,
        teacher_accuracy=0.9,
        avg_margin=8.0,
        avg_margin_when_wrong=3.0,
        seed=11,
    )
    return generate_dataset(spec)
