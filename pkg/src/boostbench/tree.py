"""Regression tree base learner.

Gain computation, exact and histogram split search, three growth strategies
(depth-wise, leaf-wise, oblivious), gamma pruning, and regularized leaf
weights.  Heavy lifting happens in :mod:`boostbench.kernels`; this module
owns parameter validation, binning, and the tree object itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .data import Dataset, to_matrices
from .errors import DegenerateError, ParameterError

GROWTH_DEPTHWISE = "depthwise"
GROWTH_LEAFWISE = "leafwise"
GROWTH_OBLIVIOUS = "oblivious"
SPLIT_EXACT = "exact"
SPLIT_HISTOGRAM = "histogram"

_GROWTHS = (GROWTH_DEPTHWISE, GROWTH_LEAFWISE, GROWTH_OBLIVIOUS)
_SPLITS = (SPLIT_EXACT, SPLIT_HISTOGRAM)

# oblivious trees allocate the full 2^(d+1)-1 node tableau
_OBLIVIOUS_DEPTH_CAP = 16


@dataclass(frozen=True)
class TreeParams:
    """Growth and regularization knobs for a single tree."""

    growth: str = GROWTH_DEPTHWISE
    max_depth: int = 6
    num_leaves: int = 31
    min_samples_split: int = 2
    gamma: float = 0.0
    lambda_l2: float = 0.0
    alpha_l1: float = 0.0
    max_bins: int = 256
    sparsity_aware: bool = True
    split_algorithm: str = SPLIT_HISTOGRAM

    def __post_init__(self):
        if self.growth not in _GROWTHS:
            raise ParameterError(f"unknown growth strategy {self.growth!r}")
        if self.split_algorithm not in _SPLITS:
            raise ParameterError(f"unknown split algorithm {self.split_algorithm!r}")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        if self.num_leaves < 2:
            raise ParameterError("num_leaves must be >= 2")
        if self.max_bins < 2:
            raise ParameterError("max_bins must be >= 2")
        if self.min_samples_split < 1:
            raise ParameterError("min_samples_split must be >= 1")
        for name in ("gamma", "lambda_l2", "alpha_l1"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0")
        if self.growth == GROWTH_OBLIVIOUS:
            if self.split_algorithm == SPLIT_EXACT:
                raise ParameterError("oblivious growth requires histogram splits")
            if self.max_depth > _OBLIVIOUS_DEPTH_CAP:
                raise ParameterError(
                    f"oblivious max_depth capped at {_OBLIVIOUS_DEPTH_CAP}")

    def to_dict(self) -> dict:
        return {
            "growth": self.growth,
            "max_depth": self.max_depth,
            "num_leaves": self.num_leaves,
            "min_samples_split": self.min_samples_split,
            "gamma": self.gamma,
            "lambda_l2": self.lambda_l2,
            "alpha_l1": self.alpha_l1,
            "max_bins": self.max_bins,
            "sparsity_aware": self.sparsity_aware,
            "split_algorithm": self.split_algorithm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        return cls(**d)


@dataclass(frozen=True)
class GradientPair:
    """Per-sample first/second order statistics with a sample weight."""

    g: float
    h: float
    w_sample: float = 1.0

    def __post_init__(self):
        if self.h < 0:
            raise ParameterError("h must be >= 0")
        if not self.w_sample > 0:
            raise ParameterError("w_sample must be > 0")


class GradientPairs:
    """Column-oriented gradient pairs; ``effective()`` folds in weights."""

    __slots__ = ("g", "h", "w")

    def __init__(self, g, h, w=None):
        self.g = np.ascontiguousarray(g, dtype=np.float64)
        self.h = np.ascontiguousarray(h, dtype=np.float64)
        if self.g.shape != self.h.shape or self.g.ndim != 1:
            raise ParameterError("g and h must be equal-length vectors")
        if np.any(self.h < 0):
            raise ParameterError("h must be >= 0")
        if w is None:
            self.w = np.ones_like(self.g)
        else:
            self.w = np.ascontiguousarray(w, dtype=np.float64)
            if self.w.shape != self.g.shape:
                raise ParameterError("w must match g in length")
            if np.any(self.w <= 0):
                raise ParameterError("sample weights must be > 0")

    def __len__(self) -> int:
        return self.g.shape[0]

    def effective(self):
        """(g*w, h*w) ready for the kernels."""
        return self.g * self.w, self.h * self.w


def soft_threshold(g: float, alpha: float) -> float:
    if g > alpha:
        return g - alpha
    if g < -alpha:
        return g + alpha
    return 0.0


def leaf_weight(G: float, H: float, lambda_l2: float = 0.0,
                alpha_l1: float = 0.0) -> float:
    """Regularized Newton leaf value -soft_threshold(G, a) / (H + lambda)."""
    if not H + lambda_l2 > 0.0:
        raise DegenerateError("H + lambda_l2 must be > 0 for a leaf weight")
    return -soft_threshold(G, alpha_l1) / (H + lambda_l2)


def _leaf_value_array(G, H, lambda_l2, alpha_l1):
    """Vectorized leaf_weight with a 0.0 fallback for H + lambda <= 0."""
    G = np.asarray(G, np.float64)
    H = np.asarray(H, np.float64)
    num = np.where(G > alpha_l1, G - alpha_l1,
                   np.where(G < -alpha_l1, G + alpha_l1, 0.0))
    denom = H + lambda_l2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = -num / denom
    return np.where(denom > 0.0, w, 0.0)


def split_gain(G_L: float, H_L: float, G_R: float, H_R: float,
               lambda_l2: float = 0.0, gamma: float = 0.0) -> float:
    """Second-order gain of a (left, right) partition, gamma-penalized."""
    if not (H_L + lambda_l2 > 0.0 and H_R + lambda_l2 > 0.0):
        raise ParameterError("each side needs H + lambda_l2 > 0")
    G = G_L + G_R
    H = H_L + H_R
    return 0.5 * (G_L * G_L / (H_L + lambda_l2)
                  + G_R * G_R / (H_R + lambda_l2)
                  - G * G / (H + lambda_l2)) - gamma


def quantile_bin_edges(present_values: np.ndarray, max_bins: int) -> np.ndarray:
    """Equal-frequency bin edges (strictly increasing midpoints).

    When the column has at most ``max_bins`` distinct values every distinct
    value gets its own bin, which makes histogram search degenerate to exact.
    """
    vals = np.asarray(present_values, np.float64)
    u = np.unique(vals)
    if u.size <= 1:
        return np.empty(0, np.float64)
    if u.size <= max_bins:
        return kernels.get_backend("numpy").guarded_midpoints(u)
    sv = np.sort(vals)
    pos = (np.arange(1, max_bins) * sv.size) // max_bins
    cuts = np.unique(sv[pos])
    idx = np.searchsorted(u, cuts)
    keep = idx > 0
    idx = idx[keep]
    lo = u[idx - 1]
    hi = u[idx]
    mids = 0.5 * (lo + hi)
    bad = ~((lo <= mids) & (mids < hi))
    mids[bad] = lo[bad]
    return np.unique(mids)


class FitData:
    """Feature matrices plus the per-feature index structures the kernels
    need: bin codes/edges for histogram search, value-sorted row orders for
    exact search.  Built once per training fold and reused across trees."""

    __slots__ = ("values", "absent", "n_rows", "n_features", "params",
                 "codes", "nbins", "edges_flat", "edge_off",
                 "order_flat", "order_off")

    def __init__(self, values: np.ndarray, absent: np.ndarray, params: TreeParams):
        values = np.ascontiguousarray(values, np.float64)
        absent = np.ascontiguousarray(absent).astype(np.uint8)
        if values.ndim != 2 or absent.shape != values.shape:
            raise ParameterError("values and absent must be matching (F, n) matrices")
        self.values = values
        self.absent = absent
        self.n_features, self.n_rows = values.shape
        self.params = params
        self.codes = None
        self.nbins = None
        self.edges_flat = None
        self.edge_off = None
        self.order_flat = None
        self.order_off = None
        if params.split_algorithm == SPLIT_HISTOGRAM:
            self._build_bins(params.max_bins)
        else:
            self._build_orders()

    def _build_bins(self, max_bins: int):
        F, n = self.n_features, self.n_rows
        codes = np.full((F, n), -1, np.int32)
        nbins = np.zeros(F, np.int64)
        edge_off = np.zeros(F + 1, np.int64)
        parts = []
        for f in range(F):
            pres = np.flatnonzero(self.absent[f] == 0)
            edges = quantile_bin_edges(self.values[f, pres], max_bins)
            nbins[f] = edges.size + 1
            edge_off[f + 1] = edge_off[f] + edges.size
            parts.append(edges)
            codes[f, pres] = np.searchsorted(
                edges, self.values[f, pres], side="left").astype(np.int32)
        self.codes = codes
        self.nbins = nbins
        self.edges_flat = (np.concatenate(parts) if parts
                           else np.empty(0, np.float64))
        self.edge_off = edge_off

    def _build_orders(self):
        F = self.n_features
        order_off = np.zeros(F + 1, np.int64)
        parts = []
        for f in range(F):
            pres = np.flatnonzero(self.absent[f] == 0)
            o = pres[np.argsort(self.values[f, pres], kind="stable")]
            parts.append(o.astype(np.int64))
            order_off[f + 1] = order_off[f] + o.size
        self.order_flat = (np.concatenate(parts) if parts
                           else np.empty(0, np.int64))
        self.order_off = order_off


def prepare_fit_data(dataset: Dataset, params: TreeParams) -> FitData:
    values, absent = to_matrices(dataset, sparsity_aware=params.sparsity_aware)
    return FitData(values, absent, params)


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    gain: float
    default_left: bool


@dataclass(frozen=True)
class RegressionTree:
    """Flat-array binary tree.  ``feature[i] < 0`` marks a leaf; internal
    nodes carry the gamma-free raw gain for later pruning."""

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    raw_gain: np.ndarray
    sum_g: np.ndarray
    sum_h: np.ndarray
    count: np.ndarray
    depth: int
    params: TreeParams
    n_features: int

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    def leaf_ids(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def predict(self, row: np.ndarray, absent: Optional[np.ndarray] = None) -> float:
        """Route a single row to its leaf weight."""
        row = np.asarray(row, np.float64)
        if row.ndim != 1 or row.shape[0] != self.n_features:
            raise ParameterError(
                f"row must have {self.n_features} features, got {row.shape}")
        if absent is None:
            if self.params.sparsity_aware:
                absent = np.isnan(row)
            else:
                row = np.where(np.isnan(row), 0.0, row)
                absent = np.zeros(row.shape[0], bool)
        nid = 0
        while self.feature[nid] >= 0:
            f = self.feature[nid]
            if absent[f]:
                go_left = bool(self.default_left[nid])
            else:
                go_left = row[f] <= self.threshold[nid]
            nid = self.left[nid] if go_left else self.right[nid]
        return float(self.weight[nid])

    def assign(self, values: np.ndarray, absent: np.ndarray) -> np.ndarray:
        """Leaf node id for every column of a (F, n) matrix pair."""
        backend = kernels.active()
        return np.asarray(backend.assign_leaves(
            self.feature, self.threshold, self.default_left,
            self.left, self.right,
            np.ascontiguousarray(values, np.float64),
            np.ascontiguousarray(absent).astype(np.uint8)))

    def predict_many(self, values: np.ndarray, absent: np.ndarray) -> np.ndarray:
        return self.weight[self.assign(values, absent)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "default_left": self.default_left.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "weight": self.weight.tolist(),
            "raw_gain": self.raw_gain.tolist(),
            "sum_g": self.sum_g.tolist(),
            "sum_h": self.sum_h.tolist(),
            "count": self.count.tolist(),
            "depth": self.depth,
            "params": self.params.to_dict(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(d["feature"], np.int32),
            threshold=np.asarray(d["threshold"], np.float64),
            default_left=np.asarray(d["default_left"], np.uint8),
            left=np.asarray(d["left"], np.int32),
            right=np.asarray(d["right"], np.int32),
            weight=np.asarray(d["weight"], np.float64),
            raw_gain=np.asarray(d["raw_gain"], np.float64),
            sum_g=np.asarray(d["sum_g"], np.float64),
            sum_h=np.asarray(d["sum_h"], np.float64),
            count=np.asarray(d["count"], np.int64),
            depth=int(d["depth"]),
            params=TreeParams.from_dict(d["params"]),
            n_features=int(d["n_features"]),
        )


def _as_subset_mask(n: int, row_subset) -> np.ndarray:
    if row_subset is None:
        return np.ones(n, np.uint8)
    rs = np.asarray(row_subset)
    if rs.dtype == bool:
        if rs.shape[0] != n:
            raise ParameterError("boolean row subset length mismatch")
        return rs.astype(np.uint8)
    mask = np.zeros(n, np.uint8)
    rs = rs.astype(np.int64)
    if rs.size and (rs.min() < 0 or rs.max() >= n):
        raise ParameterError("row subset index out of range")
    mask[rs] = 1
    return mask


def _as_feature_array(n_features: int, feature_subset) -> np.ndarray:
    if feature_subset is None:
        return np.arange(n_features, dtype=np.int64)
    fs = np.unique(np.asarray(feature_subset, np.int64))
    if fs.size == 0:
        raise ParameterError("feature subset is empty")
    if fs.min() < 0 or fs.max() >= n_features:
        raise ParameterError("feature subset index out of range")
    return fs


def _node_cap(params: TreeParams, n_sub: int) -> int:
    if params.growth == GROWTH_LEAFWISE:
        return 2 * max(params.num_leaves, 2) - 1
    full = 2 ** (params.max_depth + 1) - 1 if params.max_depth < 60 else None
    if params.growth == GROWTH_OBLIVIOUS:
        return full
    by_rows = 2 * max(n_sub, 1) + 1
    return by_rows if full is None else min(full, by_rows)


def fit_tree(data, grads: GradientPairs, row_subset=None, feature_subset=None,
             params: Optional[TreeParams] = None, seed=None) -> RegressionTree:
    """Grow one regression tree on the given gradient pairs.

    ``data`` is a Dataset or a prebuilt FitData.  ``seed`` is accepted for
    interface stability; every growth strategy here is deterministic.
    """
    if params is None:
        params = data.params if isinstance(data, FitData) else TreeParams()
    if isinstance(data, Dataset):
        data = prepare_fit_data(data, params)
    elif data.params.split_algorithm != params.split_algorithm or (
            params.split_algorithm == SPLIT_HISTOGRAM
            and data.params.max_bins != params.max_bins):
        raise ParameterError("FitData was prepared with incompatible params")
    n = data.n_rows
    if len(grads) != n:
        raise ParameterError("gradient count does not match row count")
    in_subset = _as_subset_mask(n, row_subset)
    if not in_subset.any():
        raise ParameterError("row subset is empty")
    feats = _as_feature_array(data.n_features, feature_subset)
    g, h = grads.effective()
    backend = kernels.active()
    cap = _node_cap(params, int(in_subset.sum()))
    size_arg = (params.num_leaves if params.growth == GROWTH_LEAFWISE
                else params.max_depth)
    common = (feats, in_subset, g, h, size_arg, params.min_samples_split,
              float(params.gamma), float(params.lambda_l2), cap)
    if params.split_algorithm == SPLIT_HISTOGRAM:
        fn = {GROWTH_DEPTHWISE: backend.grow_depthwise_hist,
              GROWTH_LEAFWISE: backend.grow_leafwise_hist,
              GROWTH_OBLIVIOUS: backend.grow_oblivious_hist}[params.growth]
        res = fn(data.codes, data.nbins, data.edges_flat, data.edge_off, *common)
    else:
        fn = {GROWTH_DEPTHWISE: backend.grow_depthwise_exact,
              GROWTH_LEAFWISE: backend.grow_leafwise_exact}[params.growth]
        res = fn(data.values, data.absent, data.order_flat, data.order_off, *common)
    (node_count, feature, threshold, default_left, left, right, raw_gain,
     sum_g, sum_h, count, depth, _node_of_row) = res
    nc = int(node_count)
    feature = np.asarray(feature)[:nc].copy()
    sum_g = np.asarray(sum_g)[:nc].copy()
    sum_h = np.asarray(sum_h)[:nc].copy()
    is_leaf = feature < 0
    weight = np.where(
        is_leaf,
        _leaf_value_array(sum_g, sum_h, params.lambda_l2, params.alpha_l1),
        0.0)
    return RegressionTree(
        feature=feature,
        threshold=np.asarray(threshold)[:nc].copy(),
        default_left=np.asarray(default_left)[:nc].copy(),
        left=np.asarray(left)[:nc].copy(),
        right=np.asarray(right)[:nc].copy(),
        weight=weight,
        raw_gain=np.asarray(raw_gain)[:nc].copy(),
        sum_g=sum_g,
        sum_h=sum_h,
        count=np.asarray(count)[:nc].copy(),
        depth=int(depth),
        params=params,
        n_features=data.n_features,
    )


def _single_column_search(column, grads: GradientPairs, row_subset, params,
                          algorithm: str) -> Optional[SplitCandidate]:
    col = np.asarray(column, np.float64).ravel()
    if params is None:
        params = TreeParams(split_algorithm=algorithm, max_depth=1,
                            growth=GROWTH_DEPTHWISE)
    else:
        params = replace(params, split_algorithm=algorithm, max_depth=1,
                         growth=GROWTH_DEPTHWISE)
    if params.sparsity_aware:
        absent = np.isnan(col)
        values = np.where(absent, 0.0, col)
    else:
        values = np.where(np.isnan(col), 0.0, col)
        absent = np.zeros(col.shape[0], bool)
    data = FitData(values[None, :], absent[None, :].astype(np.uint8), params)
    tree = fit_tree(data, grads, row_subset=row_subset, params=params)
    if tree.feature[0] < 0:
        return None
    return SplitCandidate(
        feature=0,
        threshold=float(tree.threshold[0]),
        gain=float(tree.raw_gain[0]) - params.gamma,
        default_left=bool(tree.default_left[0]),
    )


def best_split_exact(column, grads: GradientPairs, row_subset=None,
                     params: Optional[TreeParams] = None):
    """Best single-feature split by scanning sorted present values.

    Candidate thresholds are midpoints between consecutive distinct present
    values; missing rows take the side that maximizes gain (ties go left).
    Returns None when no candidate has strictly positive penalized gain.
    """
    return _single_column_search(column, grads, row_subset, params, SPLIT_EXACT)


def best_split_histogram(column, grads: GradientPairs, row_subset=None,
                         params: Optional[TreeParams] = None):
    """Best single-feature split over precomputed quantile bin boundaries.

    Bin edges come from the full column (the training fold); the search
    itself honors ``row_subset``.  Contract otherwise matches
    :func:`best_split_exact`.
    """
    return _single_column_search(column, grads, row_subset, params,
                                 SPLIT_HISTOGRAM)


def gamma_prune(tree: RegressionTree, gamma: float) -> RegressionTree:
    """Collapse internal nodes with two leaf children and raw gain < gamma,
    repeating to fixpoint, then compact node ids."""
    if gamma < 0 or not np.isfinite(gamma):
        raise ParameterError("gamma must be finite and >= 0")
    feature = tree.feature.copy()
    weight = tree.weight.copy()
    nc = tree.node_count
    changed = True
    while changed:
        changed = False
        is_leaf = feature < 0
        for nid in range(nc):
            if is_leaf[nid]:
                continue
            l, r = tree.left[nid], tree.right[nid]
            if is_leaf[l] and is_leaf[r] and tree.raw_gain[nid] < gamma:
                feature[nid] = -1
                weight[nid] = float(_leaf_value_array(
                    tree.sum_g[nid], tree.sum_h[nid],
                    tree.params.lambda_l2, tree.params.alpha_l1))
                is_leaf[nid] = True
                changed = True
    # compact: renumber nodes reachable from the root in BFS order
    order = []
    queue = [0]
    while queue:
        nid = queue.pop(0)
        order.append(nid)
        if feature[nid] >= 0:
            queue.append(int(tree.left[nid]))
            queue.append(int(tree.right[nid]))
    old = np.asarray(order, np.int64)
    remap = np.full(nc, -1, np.int64)
    remap[old] = np.arange(old.size)
    new_feature = feature[old]
    new_left = np.where(new_feature >= 0, remap[tree.left[old]], -1).astype(np.int32)
    new_right = np.where(new_feature >= 0, remap[tree.right[old]], -1).astype(np.int32)
    # recompute depth over the compacted tree
    depth = 0
    node_depth = np.zeros(old.size, np.int64)
    for i in range(old.size):
        if new_feature[i] >= 0:
            d = node_depth[i] + 1
            node_depth[new_left[i]] = d
            node_depth[new_right[i]] = d
            if d > depth:
                depth = int(d)
    return RegressionTree(
        feature=new_feature,
        threshold=tree.threshold[old],
        default_left=tree.default_left[old],
        left=new_left,
        right=new_right,
        weight=weight[old],
        raw_gain=tree.raw_gain[old],
        sum_g=tree.sum_g[old],
        sum_h=tree.sum_h[old],
        count=tree.count[old],
        depth=depth,
        params=tree.params,
        n_features=tree.n_features,
    )
