import os
import subprocess
import sys

import numpy as np
import pytest

from boostbench import kernels
from boostbench.boost import BoostConfig, GossParams, fit
from boostbench.data import to_matrices
from boostbench.errors import ParameterError
from boostbench.tree import GradientPairs, TreeParams, fit_tree
from conftest import make_dataset

CONFIGS = [
    TreeParams(growth="depthwise", split_algorithm="exact", max_depth=4),
    TreeParams(growth="depthwise", split_algorithm="histogram", max_depth=4,
               max_bins=16),
    TreeParams(growth="leafwise", split_algorithm="exact", num_leaves=9),
    TreeParams(growth="leafwise", split_algorithm="histogram", num_leaves=9,
               max_bins=16),
    TreeParams(growth="oblivious", split_algorithm="histogram", max_depth=4,
               max_bins=16),
]


@pytest.fixture
def restore_backend():
    before = kernels.backend_name()
    yield
    kernels.set_backend(before)


def random_instance(rng):
    n = int(rng.integers(10, 120))
    f = int(rng.integers(1, 6))
    X = rng.normal(size=(n, f))
    X[rng.random((n, f)) < 0.15] = np.nan
    X[rng.random((n, f)) < 0.2] = 0.0  # duplicated values force tied splits
    y = rng.integers(0, 2, size=n)
    g = rng.normal(size=n)
    h = rng.uniform(0.05, 2.0, size=n)
    return make_dataset(X, y), g, h


def tree_arrays(tree):
    return (tree.feature, tree.threshold, tree.default_left, tree.left,
            tree.right, tree.weight, tree.raw_gain, tree.sum_g, tree.sum_h,
            tree.count)


def test_backend_selection_api(restore_backend):
    assert kernels.backend_name() in ("numba", "numpy")
    np_backend = kernels.set_backend("numpy")
    assert kernels.backend_name() == "numpy"
    assert kernels.active() is np_backend
    nb_backend = kernels.set_backend("numba")
    assert nb_backend is not np_backend
    with pytest.raises(ParameterError):
        kernels.set_backend("cuda")
    assert kernels.get_backend("numpy") is np_backend
    assert kernels.backend_name() == "numba"


def test_env_var_controls_initial_backend():
    code = ("import boostbench.kernels as k; print(k.backend_name())")
    for want in ("numpy", "numba"):
        env = dict(os.environ, BOOSTBENCH_BACKEND=want)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == want
    env = dict(os.environ, BOOSTBENCH_BACKEND="garbage")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0


def test_tree_kernels_agree_bitwise_across_backends(restore_backend, rng):
    for trial in range(12):
        ds, g, h = random_instance(rng)
        for params in CONFIGS:
            lam = float(rng.choice([0.0, 1.0]))
            params = TreeParams(**{**params.__dict__, "lambda_l2": lam})
            kernels.set_backend("numba")
            a = fit_tree(ds, GradientPairs(g, h), params=params)
            kernels.set_backend("numpy")
            b = fit_tree(ds, GradientPairs(g, h), params=params)
            for x, y_arr in zip(tree_arrays(a), tree_arrays(b)):
                np.testing.assert_array_equal(x, y_arr)


def test_leaf_assignment_agrees_across_backends(restore_backend, rng):
    ds, g, h = random_instance(rng)
    params = TreeParams(max_depth=4, split_algorithm="exact")
    kernels.set_backend("numba")
    tree = fit_tree(ds, GradientPairs(g, h), params=params)
    vals, absent = to_matrices(ds, params.sparsity_aware)
    got_nb = tree.assign(vals, absent)
    kernels.set_backend("numpy")
    got_np = tree.assign(vals, absent)
    np.testing.assert_array_equal(got_nb, got_np)


def test_full_ensemble_fits_identically_across_backends(restore_backend):
    rng = np.random.default_rng(77)
    X = rng.normal(size=(150, 5))
    X[rng.random((150, 5)) < 0.1] = np.nan
    y = (X[:, 0] + 0.5 * rng.normal(size=150) > 0).astype(int)
    ds = make_dataset(np.nan_to_num(X, nan=np.nan), y)
    configs = [
        BoostConfig(n_estimators=8, subsample=0.8, colsample=0.7, seed=5,
                    tree=TreeParams(max_depth=4, split_algorithm="exact")),
        BoostConfig(n_estimators=8, goss=GossParams(0.2, 0.2), seed=5,
                    tree=TreeParams(growth="leafwise", num_leaves=15,
                                    max_bins=32)),
        BoostConfig(n_estimators=8, seed=5,
                    tree=TreeParams(growth="oblivious", max_depth=4,
                                    max_bins=32)),
    ]
    for cfg in configs:
        kernels.set_backend("numba")
        a = fit(ds, cfg)
        kernels.set_backend("numpy")
        b = fit(ds, cfg)
        assert a.to_json() == b.to_json()
        vals, absent = to_matrices(ds, cfg.tree.sparsity_aware)
        np.testing.assert_array_equal(a.probabilities(vals, absent),
                                      b.probabilities(vals, absent))
