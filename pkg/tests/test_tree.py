import math

import numpy as np
import pytest

from boostbench.data import NUMERIC, Dataset, FeatureColumn
from boostbench.errors import DegenerateError, ParameterError
from boostbench.tree import (
    GradientPairs,
    TreeParams,
    best_split_exact,
    best_split_histogram,
    fit_tree,
    gamma_prune,
    leaf_weight,
    prepare_fit_data,
    quantile_bin_edges,
    soft_threshold,
    split_gain,
)
from conftest import make_dataset


def exhaustive_best_gain(col, g, h, lambda_l2=0.0, gamma=0.0,
                         min_samples_split=2):
    """Reference search: every (midpoint, missing side) pair, literal gain
    formula, child validity = one present row per side and positive H+lambda.
    Returns the best penalized gain, or None."""
    col = np.asarray(col, float)
    g = np.asarray(g, float)
    h = np.asarray(h, float)
    present = ~np.isnan(col)
    if len(col) < min_samples_split:
        return None
    distinct = np.unique(col[present])
    g_miss, h_miss = g[~present].sum(), h[~present].sum()
    g_tot, h_tot = g.sum(), h.sum()
    best = None
    for lo, hi in zip(distinct, distinct[1:]):
        t = (lo + hi) / 2.0
        left = present & (col <= t)
        right = present & (col > t)
        if left.sum() < 1 or right.sum() < 1:
            continue
        gl, hl = g[left].sum(), h[left].sum()
        gr, hr = g[right].sum(), h[right].sum()
        for miss_left in (True, False):
            gL = gl + (g_miss if miss_left else 0.0)
            hL = hl + (h_miss if miss_left else 0.0)
            gR = gr + (0.0 if miss_left else g_miss)
            hR = hr + (0.0 if miss_left else h_miss)
            if hL + lambda_l2 <= 0.0 or hR + lambda_l2 <= 0.0:
                continue
            gain = 0.5 * (gL * gL / (hL + lambda_l2)
                          + gR * gR / (hR + lambda_l2)
                          - g_tot * g_tot / (h_tot + lambda_l2)) - gamma
            if gain > 0.0 and (best is None or gain > best):
                best = gain
    return best


# ---------------------------------------------------------------------------
# leaf weights and gains


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(2.0, 0.0) == 2.0


def test_leaf_weight_hand_cases():
    assert leaf_weight(2.0, 1.0) == -2.0
    assert leaf_weight(2.0, 1.0, lambda_l2=1.0) == -1.0
    assert leaf_weight(0.5, 1.0, alpha_l1=1.0) == 0.0


def test_leaf_weight_degenerate_denominator():
    with pytest.raises(DegenerateError):
        leaf_weight(1.0, 0.0)
    assert leaf_weight(1.0, 0.0, lambda_l2=0.5) == -2.0


def test_leaf_weight_shrinks_with_l2(rng):
    for _ in range(30):
        G = float(rng.normal(scale=3))
        H = float(rng.uniform(0.1, 5))
        lams = sorted(rng.uniform(0, 4, size=2))
        assert abs(leaf_weight(G, H, lams[0])) >= abs(leaf_weight(G, H, lams[1]))


def test_split_gain_hand_cases():
    assert split_gain(2.0, 1.0, -2.0, 1.0) == 4.0
    assert split_gain(2.0, 1.0, -2.0, 1.0, gamma=1.0) == 3.0
    assert split_gain(1.0, 1.0, 1.0, 1.0) == 0.0


def test_split_gain_matches_literal_formula(rng):
    for _ in range(40):
        gl, gr = rng.normal(size=2) * 3
        hl, hr = rng.uniform(0.1, 4, size=2)
        lam = float(rng.uniform(0, 2))
        gam = float(rng.uniform(0, 1))
        want = 0.5 * (gl**2 / (hl + lam) + gr**2 / (hr + lam)
                      - (gl + gr)**2 / (hl + hr + lam)) - gam
        assert split_gain(gl, hl, gr, hr, lam, gam) == pytest.approx(want, abs=1e-14)


# ---------------------------------------------------------------------------
# binning


def test_quantile_edges_distinct_fit_within_budget():
    vals = np.array([1.0, 2.0, 2.0, 3.0, 7.0])
    edges = quantile_bin_edges(vals, max_bins=8)
    np.testing.assert_allclose(edges, [1.5, 2.5, 5.0])


def test_quantile_edges_capped_count():
    vals = np.arange(1000.0)
    edges = quantile_bin_edges(vals, max_bins=4)
    assert len(edges) == 3
    assert np.all(np.diff(edges) > 0)


def test_quantile_edges_constant_column():
    assert len(quantile_bin_edges(np.full(10, 3.3), max_bins=8)) == 0


# ---------------------------------------------------------------------------
# single-column split search


def test_best_split_exact_hand_case():
    col = np.array([1.0, 2.0, 3.0, 4.0])
    grads = GradientPairs(np.array([1.0, 1.0, -1.0, -1.0]), np.full(4, 0.5))
    cand = best_split_exact(col, grads)
    assert cand.threshold == 2.5
    assert cand.gain == pytest.approx(4.0, abs=1e-12)


def test_best_split_constant_column():
    grads = GradientPairs(np.array([1.0, -1.0]), np.ones(2))
    assert best_split_exact(np.array([5.0, 5.0]), grads) is None


def test_best_split_missing_tie_goes_left():
    # symmetric gradients: routing the missing row left or right gives the
    # same gain, so default_left must be True
    col = np.array([1.0, 2.0, np.nan])
    grads = GradientPairs(np.array([1.0, -1.0, 0.0]), np.array([1.0, 1.0, 0.0]))
    cand = best_split_exact(col, grads)
    assert cand is not None and cand.default_left


def test_best_split_missing_prefers_gainful_side():
    # the missing row carries a strong negative gradient: joining the right
    # (negative) side must win
    col = np.array([1.0, 2.0, 3.0, 4.0, np.nan])
    grads = GradientPairs(np.array([1.0, 1.0, -1.0, -1.0, -2.0]),
                          np.ones(5))
    cand = best_split_exact(col, grads)
    assert not cand.default_left
    want = exhaustive_best_gain(col, grads.g, grads.h)
    assert cand.gain == pytest.approx(want, abs=1e-12)


def test_best_split_min_samples_split_blocks():
    col = np.array([1.0, 2.0, 3.0])
    grads = GradientPairs(np.array([2.0, -1.0, -1.0]), np.ones(3))
    assert best_split_exact(col, grads) is not None
    blocked = TreeParams(min_samples_split=4)
    assert best_split_exact(col, grads, params=blocked) is None


def test_best_split_exact_matches_exhaustive_oracle(rng):
    for _ in range(60):
        n = int(rng.integers(2, 40))
        col = rng.integers(0, 8, size=n).astype(float)
        col[rng.random(n) < 0.25] = np.nan
        g = rng.normal(size=n)
        h = rng.uniform(0.05, 2.0, size=n)
        lam = float(rng.choice([0.0, 0.5, 2.0]))
        gam = float(rng.choice([0.0, 0.3]))
        params = TreeParams(lambda_l2=lam, gamma=gam)
        cand = best_split_exact(col, GradientPairs(g, h), params=params)
        want = exhaustive_best_gain(col, g, h, lam, gam)
        if want is None:
            assert cand is None
        else:
            assert cand is not None
            assert cand.gain == pytest.approx(want, abs=1e-10)


def test_best_split_histogram_equals_exact_when_bins_cover(rng):
    for _ in range(25):
        n = int(rng.integers(3, 30))
        col = rng.integers(0, 10, size=n).astype(float)
        col[rng.random(n) < 0.2] = np.nan
        g = rng.normal(size=n)
        h = rng.uniform(0.1, 1.5, size=n)
        params = TreeParams(max_bins=64)
        e = best_split_exact(col, GradientPairs(g, h), params=params)
        hst = best_split_histogram(col, GradientPairs(g, h), params=params)
        if e is None:
            assert hst is None
        else:
            assert hst.threshold == e.threshold
            assert hst.default_left == e.default_left
            assert hst.gain == pytest.approx(e.gain, abs=1e-12)


def test_best_split_histogram_thresholds_come_from_edges(rng):
    col = rng.random(1000) * 100
    g = np.where(col > 50, -1.0, 1.0) + rng.normal(scale=0.1, size=1000)
    params = TreeParams(max_bins=4)
    cand = best_split_histogram(col, GradientPairs(g, np.ones(1000)),
                                params=params)
    edges = quantile_bin_edges(col, 4)
    assert cand.threshold in set(edges)


def test_best_split_histogram_single_bin_is_none():
    col = np.full(8, 2.0)
    grads = GradientPairs(np.array([1.0, -1] * 4, float), np.ones(8))
    assert best_split_histogram(col, grads, params=TreeParams(max_bins=4)) is None


# ---------------------------------------------------------------------------
# whole-tree growth


def stump_dataset():
    rng = np.random.default_rng(7)
    x = np.arange(20.0)
    other = rng.normal(size=20) * 0.01
    g = np.where(x < 10, 1.0, -1.0)
    ds = make_dataset(np.column_stack([x, other]), (x >= 10).astype(int))
    return ds, GradientPairs(g, np.ones(20))


def test_depthwise_stump_hits_oracle_threshold():
    ds, grads = stump_dataset()
    params = TreeParams(max_depth=1, split_algorithm="exact")
    tree = fit_tree(ds, grads, params=params)
    assert tree.feature[0] == 0
    assert tree.threshold[0] == 9.5
    vals = ds.column("f0").values
    want = exhaustive_best_gain(vals, grads.g, grads.h)
    assert tree.raw_gain[0] == pytest.approx(want, abs=1e-10)


def test_leafwise_two_leaves_equals_depthwise_stump(rng):
    for _ in range(10):
        X = rng.normal(size=(25, 3))
        g = rng.normal(size=25)
        h = rng.uniform(0.2, 1.0, size=25)
        ds = make_dataset(X, rng.integers(0, 2, 25))
        a = fit_tree(ds, GradientPairs(g, h),
                     params=TreeParams(growth="leafwise", num_leaves=2,
                                       split_algorithm="exact"))
        b = fit_tree(ds, GradientPairs(g, h),
                     params=TreeParams(growth="depthwise", max_depth=1,
                                       split_algorithm="exact"))
        assert a.feature[0] == b.feature[0]
        assert a.threshold[0] == b.threshold[0]
        np.testing.assert_array_equal(np.sort(a.weight[a.leaf_ids()]),
                                      np.sort(b.weight[b.leaf_ids()]))


def test_depthwise_respects_max_depth(rng):
    X = rng.normal(size=(200, 4))
    g = rng.normal(size=200)
    ds = make_dataset(X, rng.integers(0, 2, 200))
    for depth in (1, 2, 3):
        tree = fit_tree(ds, GradientPairs(g, np.ones(200)),
                        params=TreeParams(max_depth=depth))
        assert tree.depth <= depth
        assert tree.n_leaves <= 2 ** depth


def test_leafwise_respects_leaf_cap(rng):
    X = rng.normal(size=(300, 4))
    g = rng.normal(size=300)
    ds = make_dataset(X, rng.integers(0, 2, 300))
    for cap in (2, 5, 9):
        tree = fit_tree(ds, GradientPairs(g, np.ones(300)),
                        params=TreeParams(growth="leafwise", num_leaves=cap))
        assert tree.n_leaves <= cap


def test_oblivious_levels_share_split(rng):
    X = rng.normal(size=(200, 5))
    g = rng.normal(size=200)
    ds = make_dataset(X, rng.integers(0, 2, 200))
    tree = fit_tree(ds, GradientPairs(g, np.ones(200)),
                    params=TreeParams(growth="oblivious", max_depth=3))
    internal = np.flatnonzero(tree.feature >= 0)
    pairs = {(int(tree.feature[i]), float(tree.threshold[i])) for i in internal}
    assert len(pairs) <= 3
    # within a level every internal node is identical
    level = {0: 0}
    for nid in internal:
        for child in (tree.left[nid], tree.right[nid]):
            level[int(child)] = level[int(nid)] + 1
    by_level = {}
    for nid in internal:
        by_level.setdefault(level[int(nid)], set()).add(
            (int(tree.feature[nid]), float(tree.threshold[nid])))
    assert all(len(s) == 1 for s in by_level.values())


def test_oblivious_rejects_exact_search():
    ds, grads = stump_dataset()
    with pytest.raises(ParameterError):
        fit_tree(ds, grads, params=TreeParams(growth="oblivious",
                                              split_algorithm="exact"))


def test_no_positive_gain_gives_single_leaf():
    ds = make_dataset(np.arange(4.0)[:, None], np.array([0, 1, 0, 1]))
    grads = GradientPairs(np.full(4, 1.0), np.ones(4))  # uniform gradients
    tree = fit_tree(ds, grads, params=TreeParams(max_depth=3,
                                                 split_algorithm="exact"))
    assert tree.node_count == 1
    assert tree.weight[0] == pytest.approx(-1.0)  # -G/H = -4/4


def test_row_subset_restricts_statistics():
    ds, grads = stump_dataset()
    sub = np.arange(10)  # only positive-gradient rows: no useful split
    tree = fit_tree(ds, grads, row_subset=sub,
                    params=TreeParams(max_depth=2, split_algorithm="exact"))
    assert tree.count[0] == 10
    assert tree.sum_g[0] == pytest.approx(10.0)


def test_feature_subset_excludes_features():
    ds, grads = stump_dataset()
    tree = fit_tree(ds, grads, feature_subset=np.array([1]),
                    params=TreeParams(max_depth=1, split_algorithm="exact"))
    assert tree.feature[0] in (-1, 1)


def test_predict_routing_conventions():
    ds, grads = stump_dataset()
    tree = fit_tree(ds, grads, params=TreeParams(max_depth=1,
                                                 split_algorithm="exact"))
    left_w = tree.weight[tree.left[0]]
    right_w = tree.weight[tree.right[0]]
    assert tree.predict(np.array([9.5, 0.0])) == left_w  # <= goes left
    assert tree.predict(np.array([9.6, 0.0])) == right_w
    missing = np.array([np.nan, 0.0])
    want = left_w if tree.default_left[0] else right_w
    assert tree.predict(missing) == want


def test_predict_many_matches_scalar_predict(rng):
    X = rng.normal(size=(50, 3))
    X[rng.random((50, 3)) < 0.1] = np.nan
    g = rng.normal(size=50)
    ds = make_dataset(X, rng.integers(0, 2, 50))
    params = TreeParams(max_depth=3, split_algorithm="exact")
    tree = fit_tree(ds, GradientPairs(g, np.ones(50)), params=params)
    data = prepare_fit_data(ds, params)
    many = tree.predict_many(data.values, data.absent)
    single = np.array([tree.predict(X[i]) for i in range(50)])
    np.testing.assert_array_equal(many, single)


def test_tree_dict_round_trip(rng):
    from boostbench.tree import RegressionTree
    X = rng.normal(size=(40, 3))
    ds = make_dataset(X, rng.integers(0, 2, 40))
    tree = fit_tree(ds, GradientPairs(rng.normal(size=40), np.ones(40)),
                    params=TreeParams(max_depth=3, split_algorithm="exact"))
    again = RegressionTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(again.feature, tree.feature)
    np.testing.assert_array_equal(again.threshold, tree.threshold)
    np.testing.assert_array_equal(again.weight, tree.weight)


# ---------------------------------------------------------------------------
# gamma pruning


def collapsible_tree():
    # root split is strong; child splits have tiny gain
    col = np.array([0.0, 1.0, 2.0, 3.0])
    g = np.array([-4.0, -3.9, 3.0, 3.1])
    ds = make_dataset(col[:, None], np.array([0, 0, 1, 1]))
    params = TreeParams(max_depth=2, split_algorithm="exact")
    return fit_tree(ds, GradientPairs(g, np.ones(4)), params=params), params


def test_gamma_prune_zero_is_identity():
    tree, _ = collapsible_tree()
    pruned = gamma_prune(tree, 0.0)
    np.testing.assert_array_equal(pruned.feature, tree.feature)
    np.testing.assert_array_equal(pruned.weight, tree.weight)


def test_gamma_prune_collapses_weak_children_keeps_root():
    tree, _ = collapsible_tree()
    assert tree.n_leaves == 4
    child_gains = [tree.raw_gain[i] for i in (tree.left[0], tree.right[0])]
    cut = max(child_gains) * 1.5
    assert cut < tree.raw_gain[0]
    pruned = gamma_prune(tree, cut)
    assert pruned.n_leaves == 2
    assert pruned.feature[0] == tree.feature[0]
    # merged leaf weight recomputed from the merged statistics
    left = pruned.left[0]
    assert pruned.weight[left] == pytest.approx(
        -tree.sum_g[tree.left[0]] / tree.sum_h[tree.left[0]])


def test_gamma_prune_above_max_gain_leaves_single_leaf():
    tree, _ = collapsible_tree()
    pruned = gamma_prune(tree, float(tree.raw_gain[0]) + 1.0)
    assert pruned.node_count == 1
    assert pruned.weight[0] == pytest.approx(-tree.sum_g[0] / tree.sum_h[0])


def test_gamma_prune_fixpoint_no_collapsible_node(rng):
    X = rng.normal(size=(120, 3))
    g = rng.normal(size=120)
    ds = make_dataset(X, rng.integers(0, 2, 120))
    tree = fit_tree(ds, GradientPairs(g, np.ones(120)),
                    params=TreeParams(max_depth=4, split_algorithm="exact"))
    for gam in (0.05, 0.2, 1.0):
        pruned = gamma_prune(tree, gam)
        leafy = pruned.feature < 0
        for nid in range(pruned.node_count):
            if leafy[nid]:
                continue
            l, r = pruned.left[nid], pruned.right[nid]
            if leafy[l] and leafy[r]:
                assert pruned.raw_gain[nid] >= gam


def test_gamma_prune_rejects_negative():
    tree, _ = collapsible_tree()
    with pytest.raises(ParameterError):
        gamma_prune(tree, -0.5)


# ---------------------------------------------------------------------------
# invariants


def test_params_validation():
    with pytest.raises(ParameterError):
        TreeParams(max_depth=0)
    with pytest.raises(ParameterError):
        TreeParams(num_leaves=1)
    with pytest.raises(ParameterError):
        TreeParams(max_bins=1)
    with pytest.raises(ParameterError):
        TreeParams(growth="bushy")


def test_dense_vs_sparse_trees_agree_when_not_sparsity_aware(rng):
    n = 60
    dense_vals = np.where(rng.random(n) < 0.5, 0.0, rng.normal(size=n))
    idx = np.flatnonzero(dense_vals != 0.0)
    labels = rng.integers(0, 2, n)
    g = rng.normal(size=n)
    dense = Dataset([FeatureColumn("f", NUMERIC, values=dense_vals)],
                    labels, n_rows=n)
    sparse = Dataset([FeatureColumn("f", "text-derived",
                                    sparse_indices=idx,
                                    sparse_values=dense_vals[idx])],
                     labels, n_rows=n)
    params = TreeParams(max_depth=3, sparsity_aware=False,
                        split_algorithm="exact")
    t1 = fit_tree(dense, GradientPairs(g, np.ones(n)), params=params)
    t2 = fit_tree(sparse, GradientPairs(g, np.ones(n)), params=params)
    np.testing.assert_array_equal(t1.feature, t2.feature)
    np.testing.assert_array_equal(t1.threshold, t2.threshold)
    np.testing.assert_array_equal(t1.weight, t2.weight)
