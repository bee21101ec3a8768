"""Gradient boosting for classification.

Binary log-loss boosting with shrinkage, stochastic row/feature subsampling,
GOSS, optional extra leaf-estimation passes, and a one-vs-rest reduction for
multiclass.  Margins are raw additive scores F; sigmoid-of-2F gives the
positive-class probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, to_matrices
from .errors import DegenerateError, ParameterError, PredictionError
from .seeding import derive_rng
from .tree import (FitData, GradientPairs, RegressionTree, TreeParams,
                   _leaf_value_array, fit_tree, gamma_prune, prepare_fit_data)

MARGIN_CLAMP = 36.0

_ENSEMBLE_FORMAT = "boostbench-ensemble"
_ENSEMBLE_VERSION = 1


@dataclass(frozen=True)
class GossParams:
    """Gradient one-side sampling rates: keep top_rate by |g|, sample
    other_rate from the rest reweighted by (1 - top_rate) / other_rate."""

    top_rate: float
    other_rate: float

    def __post_init__(self):
        if not (self.top_rate >= 0 and self.other_rate > 0):
            raise ParameterError("need top_rate >= 0 and other_rate > 0")
        if self.top_rate + self.other_rate > 1.0:
            raise ParameterError("top_rate + other_rate must be <= 1")


@dataclass(frozen=True)
class BoostConfig:
    n_estimators: int = 100
    learning_rate: float = 0.1
    subsample: float = 1.0
    colsample: float = 1.0
    goss: Optional[GossParams] = None
    tree: TreeParams = field(default_factory=TreeParams)
    seed: int = 0
    leaf_refinement: int = 1

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ParameterError("n_estimators must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ParameterError("learning_rate must be in (0, 1]")
        for name in ("subsample", "colsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must be in (0, 1]")
        if self.leaf_refinement < 1:
            raise ParameterError("leaf_refinement must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "subsample": self.subsample,
            "colsample": self.colsample,
            "goss": (None if self.goss is None else
                     {"top_rate": self.goss.top_rate,
                      "other_rate": self.goss.other_rate}),
            "tree": self.tree.to_dict(),
            "seed": self.seed,
            "leaf_refinement": self.leaf_refinement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostConfig":
        d = dict(d)
        if d.get("goss") is not None:
            d["goss"] = GossParams(**d["goss"])
        d["tree"] = TreeParams.from_dict(d["tree"])
        return cls(**d)


def init_f0(labels) -> float:
    """F0 = half log((1 + ybar) / (1 - ybar)) for labels in {-1, +1}."""
    y = np.asarray(labels, np.float64)
    if y.size == 0:
        raise DegenerateError("empty label vector")
    ybar = float(np.mean(y))
    if not -1.0 < ybar < 1.0:
        raise DegenerateError("single-class labels give an infinite F0")
    return 0.5 * math.log((1.0 + ybar) / (1.0 - ybar))


def pseudo_residuals(labels, margins) -> np.ndarray:
    """ytil = 2y / (1 + exp(2 y F)), with F clamped to +-36 first."""
    y = np.asarray(labels, np.float64)
    F = np.clip(np.asarray(margins, np.float64), -MARGIN_CLAMP, MARGIN_CLAMP)
    return 2.0 * y / (1.0 + np.exp(2.0 * y * F))


def gradient_pairs(labels, margins) -> GradientPairs:
    """The (g, h) view of the pseudo-residuals: g = -ytil, h = |ytil|(2-|ytil|)."""
    r = pseudo_residuals(labels, margins)
    a = np.abs(r)
    return GradientPairs(-r, a * (2.0 - a))


def leaf_gamma_logloss(residuals) -> float:
    """Closed-form leaf value sum(ytil) / sum(|ytil| (2 - |ytil|)).

    An all-saturated region (every ytil in {0, +-2}) has a zero denominator
    and falls back to a 0.0 leaf.
    """
    r = np.asarray(residuals, np.float64)
    a = np.abs(r)
    den = float(np.sum(a * (2.0 - a)))
    if den == 0.0:
        return 0.0
    return float(np.sum(r)) / den


def goss_sample(gradients, top_rate: float, other_rate: float, seed):
    """Row subset and per-row weights for gradient one-side sampling.

    Keeps the ceil(a*N) rows of largest |g| (ties by row index) at weight 1
    and samples ceil(b*N) of the remainder uniformly without replacement at
    weight (1-a)/b.  Returns (rows ascending, weights aligned to rows).
    """
    if not (top_rate >= 0 and other_rate > 0 and top_rate + other_rate <= 1):
        raise ParameterError("invalid GOSS rates")
    g = np.asarray(gradients, np.float64)
    n = g.shape[0]
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed)
    n_top = int(math.ceil(top_rate * n))
    n_other = int(math.ceil(other_rate * n))
    order = np.argsort(-np.abs(g), kind="stable")
    top = order[:n_top]
    rest = np.sort(order[n_top:])
    n_other = min(n_other, rest.size)
    sampled = rng.choice(rest, size=n_other, replace=False) if n_other else rest[:0]
    rows = np.concatenate([top, sampled])
    weights = np.concatenate([
        np.ones(top.size),
        np.full(sampled.size, (1.0 - top_rate) / other_rate),
    ])
    o = np.argsort(rows, kind="stable")
    return rows[o], weights[o]


@dataclass(frozen=True)
class BoostedEnsemble:
    """Fitted one-vs-rest boosted model.

    ``trees[c][m]`` is iteration m of the chain for class c; binary problems
    use a single chain for the positive class (dense label id 1).
    """

    f0: np.ndarray
    trees: tuple
    nu: float
    classes: int
    label_names: tuple
    n_features: int
    config: BoostConfig

    @property
    def n_chains(self) -> int:
        return len(self.trees)

    def _check(self, values: np.ndarray):
        if values.ndim != 2 or values.shape[0] != self.n_features:
            raise PredictionError(
                f"expected a ({self.n_features}, n) value matrix, "
                f"got shape {values.shape}")

    def margins(self, values: np.ndarray, absent: np.ndarray) -> np.ndarray:
        """Per-chain raw scores F, shape (n, n_chains)."""
        values = np.ascontiguousarray(values, np.float64)
        absent = np.ascontiguousarray(absent)
        self._check(values)
        n = values.shape[1]
        out = np.empty((n, self.n_chains))
        for c in range(self.n_chains):
            F = np.full(n, self.f0[c])
            for t in self.trees[c]:
                F += self.nu * t.predict_many(values, absent)
            out[:, c] = F
        return out

    def probabilities(self, values: np.ndarray, absent: np.ndarray) -> np.ndarray:
        """(n, classes) probabilities: binary [p-, p+]; multiclass one-vs-rest
        scores normalized by their sum."""
        raw = _sigmoid2(self.margins(values, absent))
        if self.n_chains == 1:
            p_plus = raw[:, 0]
            return np.column_stack([1.0 - p_plus, p_plus])
        return raw / raw.sum(axis=1, keepdims=True)

    def labels(self, values: np.ndarray, absent: np.ndarray) -> np.ndarray:
        """Dense class ids; binary positive only when p+ strictly exceeds p-,
        multiclass argmax of the raw one-vs-rest scores."""
        raw = _sigmoid2(self.margins(values, absent))
        if self.n_chains == 1:
            p_plus = raw[:, 0]
            return (p_plus > 1.0 - p_plus).astype(np.int64)
        return np.argmax(raw, axis=1)

    def to_json(self) -> str:
        doc = {
            "format": _ENSEMBLE_FORMAT,
            "version": _ENSEMBLE_VERSION,
            "f0": self.f0.tolist(),
            "nu": self.nu,
            "classes": self.classes,
            "label_names": list(self.label_names),
            "n_features": self.n_features,
            "config": self.config.to_dict(),
            "trees": [[t.to_dict() for t in chain] for chain in self.trees],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "BoostedEnsemble":
        doc = json.loads(text)
        if doc.get("format") != _ENSEMBLE_FORMAT:
            raise ParameterError("not an ensemble document")
        if doc.get("version") != _ENSEMBLE_VERSION:
            raise ParameterError(f"unsupported ensemble version {doc.get('version')!r}")
        trees = tuple(
            tuple(RegressionTree.from_dict(td) for td in chain)
            for chain in doc["trees"])
        return cls(
            f0=np.asarray(doc["f0"], np.float64),
            trees=trees,
            nu=float(doc["nu"]),
            classes=int(doc["classes"]),
            label_names=tuple(doc["label_names"]),
            n_features=int(doc["n_features"]),
            config=BoostConfig.from_dict(doc["config"]),
        )


def _sigmoid2(F: np.ndarray) -> np.ndarray:
    """(1 + exp(-2F))^-1 with the +-36 margin clamp."""
    Fc = np.clip(F, -MARGIN_CLAMP, MARGIN_CLAMP)
    return 1.0 / (1.0 + np.exp(-2.0 * Fc))


def _fit_chain(data: FitData, y: np.ndarray, config: BoostConfig, chain: int):
    n = data.n_rows
    F0 = init_f0(y)
    F = np.full(n, F0)
    lam = config.tree.lambda_l2
    alpha = config.tree.alpha_l1
    trees = []
    for m in range(config.n_estimators):
        rng = derive_rng(config.seed, chain, m)
        resid = pseudo_residuals(y, F)
        g = -resid
        h = np.abs(resid) * (2.0 - np.abs(resid))
        w = np.ones(n)
        if config.goss is not None:
            rows, rows_w = goss_sample(g, config.goss.top_rate,
                                       config.goss.other_rate, rng)
            w[rows] = rows_w
        elif config.subsample < 1.0:
            k = int(math.ceil(config.subsample * n))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        else:
            rows = None
        if config.colsample < 1.0:
            kf = int(math.ceil(config.colsample * data.n_features))
            feats = np.sort(rng.choice(data.n_features, size=kf, replace=False))
        else:
            feats = None
        grads = GradientPairs(g, h, w)
        tree = fit_tree(data, grads, row_subset=rows, feature_subset=feats,
                        params=config.tree)
        # leaf rule from the stored node stats: -soft_threshold(G, a)/(H + lam),
        # which reduces to the Algorithm 1 closed form when lam = a = 0
        leaf_w = np.where(tree.feature < 0,
                          _leaf_value_array(tree.sum_g, tree.sum_h, lam, alpha),
                          0.0)
        tree = replace(tree, weight=leaf_w)
        if config.tree.gamma > 0.0:
            tree = gamma_prune(tree, config.tree.gamma)
        leaf_of = tree.assign(data.values, data.absent)
        if config.leaf_refinement > 1:
            sub = np.arange(n) if rows is None else np.asarray(rows)
            tree = _refine_leaves(tree, leaf_of, y, F, w, sub, lam, alpha,
                                  config.leaf_refinement - 1)
        F = F + config.learning_rate * tree.weight[leaf_of]
        trees.append(tree)
    return F0, tuple(trees)


def _refine_leaves(tree, leaf_of, y, F, w, rows, lam, alpha, passes):
    """Extra Newton passes over the leaf values on the fitted subset."""
    weight = tree.weight.copy()
    nc = tree.node_count
    leaves = leaf_of[rows]
    for _ in range(passes):
        Ft = F[rows] + weight[leaves]
        resid = pseudo_residuals(y[rows], Ft)
        gw = -resid * w[rows]
        hw = np.abs(resid) * (2.0 - np.abs(resid)) * w[rows]
        G = np.bincount(leaves, weights=gw, minlength=nc)
        H = np.bincount(leaves, weights=hw, minlength=nc)
        weight = weight + np.where(tree.feature < 0,
                                   _leaf_value_array(G, H, lam, alpha), 0.0)
    return replace(tree, weight=weight)


def fit(dataset: Dataset, config: BoostConfig) -> BoostedEnsemble:
    """Train a boosted ensemble; one chain for binary, one per class otherwise.

    Each (class, iteration) derives its own random stream from
    (config.seed, class, iteration); rows are drawn before features.
    """
    classes = len(dataset.label_names)
    if classes < 2:
        raise DegenerateError("need at least 2 classes")
    data = prepare_fit_data(dataset, config.tree)
    labels = dataset.labels
    if classes == 2:
        chain_targets = [np.where(labels == 1, 1.0, -1.0)]
    else:
        chain_targets = [np.where(labels == c, 1.0, -1.0) for c in range(classes)]
    f0 = np.empty(len(chain_targets))
    chains = []
    for c, y in enumerate(chain_targets):
        F0, trees = _fit_chain(data, y, config, c)
        f0[c] = F0
        chains.append(trees)
    return BoostedEnsemble(
        f0=f0,
        trees=tuple(chains),
        nu=config.learning_rate,
        classes=classes,
        label_names=dataset.label_names,
        n_features=data.n_features,
        config=config,
    )


def _row_matrices(ensemble: BoostedEnsemble, row) -> tuple:
    row = np.asarray(row, np.float64).ravel()
    if row.shape[0] != ensemble.n_features:
        raise PredictionError(
            f"row has {row.shape[0]} features, model expects {ensemble.n_features}")
    if ensemble.config.tree.sparsity_aware:
        absent = np.isnan(row)
        values = np.where(absent, 0.0, row)
    else:
        values = np.where(np.isnan(row), 0.0, row)
        absent = np.zeros(row.shape[0], bool)
    return values[:, None], absent[:, None]


def predict_margin(ensemble: BoostedEnsemble, row) -> np.ndarray:
    values, absent = _row_matrices(ensemble, row)
    return ensemble.margins(values, absent)[0]


def predict_proba(ensemble: BoostedEnsemble, row) -> np.ndarray:
    values, absent = _row_matrices(ensemble, row)
    return ensemble.probabilities(values, absent)[0]


def predict_label(ensemble: BoostedEnsemble, row) -> int:
    values, absent = _row_matrices(ensemble, row)
    return int(ensemble.labels(values, absent)[0])
