import os

import numpy as np
import pytest

from tpmsvm import datasets as ds
from tpmsvm.trainer import Dataset

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data")


@pytest.fixture(scope="session")
def manifest():
    path = os.path.join(DATA_DIR, "manifest.txt")
    if not os.path.exists(path):
        ds.materialize(DATA_DIR)
    return ds.load_manifest(path)


@pytest.fixture(scope="session")
def iris_table(manifest):
    return ds.resolve_table("iris", manifest)


@pytest.fixture(scope="session")
def wine_table(manifest):
    return ds.resolve_table("wine", manifest)


def blobs(seed, centers, counts, scale=0.3, ndim=2):
    """Gaussian blob dataset with labels 1..C."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for cid, (center, count) in enumerate(zip(centers, counts), start=1):
        X.append(rng.normal(center, scale, size=(count, ndim)))
        y += [cid] * count
    return Dataset(np.vstack(X), np.array(y))


@pytest.fixture
def toy3():
    return blobs(42, [(0, 0), (2, 0), (1, 2)], [10, 12, 9])


@pytest.fixture
def toy2():
    return blobs(3, [(0, 0), (2, 1)], [11, 9])
