import numpy as np
import pytest

from boostbench import boost
from boostbench.data import NUMERIC, Dataset, FeatureColumn
from boostbench.tree import TreeParams


def make_dataset(X, y, name="synthetic") -> Dataset:
    """Dense numeric Dataset from a (n, F) matrix and integer labels."""
    X = np.asarray(X, dtype=np.float64)
    columns = [FeatureColumn(f"f{j}", NUMERIC, values=X[:, j])
               for j in range(X.shape[1])]
    return Dataset(columns, np.asarray(y, dtype=np.int64), name=name)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every growth/split kernel once so per-test timings stay honest."""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + 0.3 * rng.normal(size=40) > 0).astype(int)
    ds = make_dataset(X, y)
    for growth, split in (("depthwise", "exact"), ("depthwise", "histogram"),
                          ("leafwise", "exact"), ("leafwise", "histogram"),
                          ("oblivious", "histogram")):
        cfg = boost.BoostConfig(
            n_estimators=2,
            tree=TreeParams(growth=growth, split_algorithm=split, max_depth=3))
        boost.fit(ds, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
