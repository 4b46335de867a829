import numpy as np
import pytest

from degnn import Dataset, LabelVector, build_graph


def cycle(n):
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def star(leaves):
    return build_graph([(0, i) for i in range(1, leaves + 1)], leaves + 1)


def random_edges(rng, n, p):
    upper = np.triu_indices(n, k=1)
    keep = rng.random(upper[0].size) < p
    return np.stack([upper[0][keep], upper[1][keep]], axis=1)


def random_dataset(n=30, p=0.25, d=6, classes=3, seed=0, name="rand"):
    """Small dataset with balanced classes and noise features."""
    rng = np.random.default_rng(seed)
    g = build_graph(random_edges(rng, n, p), n)
    labels = rng.permutation(np.arange(n) % classes)
    features = rng.uniform(0.0, 1.0, size=(n, d)).astype(np.float32)
    return Dataset(g, features, LabelVector(labels, classes), name)


@pytest.fixture
def path3():
    return build_graph([(0, 1), (1, 2)], 3)


@pytest.fixture
def path4():
    return build_graph([(0, 1), (1, 2), (2, 3)], 4)


@pytest.fixture
def triangle():
    return cycle(3)
