import numpy as np
import pytest

from edgehealth import _backend, explain, gbdt
from edgehealth.data import Dataset, FeatureSchema, generate_synthetic, train_test_split
from edgehealth.gbdt import BoostHyperparams, train

BACKENDS = sorted(_backend.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    mod = _backend.available_backends()[request.param]
    monkeypatch.setattr(gbdt, "kernels", mod)
    monkeypatch.setattr(explain, "kernels", mod)
    return request.param


@pytest.fixture(scope="session")
def small_data():
    return generate_synthetic(400, 0.3, seed=3)


@pytest.fixture(scope="session")
def small_split(small_data):
    return train_test_split(small_data, 0.25, seed=0)


@pytest.fixture(scope="session")
def small_model(small_split):
    train_set, _ = small_split
    return train(train_set, BoostHyperparams(num_rounds=15, max_depth=3))


def random_dataset(rng, n, d, integer=False):
    X = rng.integers(0, 5, size=(n, d)).astype(float) if integer else rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1
    return Dataset(X, y, FeatureSchema(tuple(f"f{i}" for i in range(d))))
