"""Model-family presets and the shared preprocessing pipeline.

Four named presets mirror the compared boosting engines inside the one
in-repo engine:

* ``gbm``  - exact splits, depth-wise growth, no regularization terms,
  missing values imputed as 0.0 (no sparsity routing);
* ``xgb``  - exact splits, depth-wise growth, gamma/alpha/lambda penalties,
  sparsity-aware default directions;
* ``lgbm`` - histogram splits, leaf-wise growth, gradient one-side sampling;
* ``cat``  - histogram splits, oblivious trees, L2 leaf penalty, repeated
  Newton refinement of leaf values.

Every preset shares one preprocessing contract: raw categorical columns get
ordered target-statistics encoding and text columns get TF-IDF, both fitted
on the training portion only.  Hyperparameter names follow the conventions
of the engine each preset mirrors (``lambda``/``reg_lambda``/``l2_leaf_reg``
all map onto the same L2 leaf penalty).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import boost
from .boost import BoostConfig, GossParams
from .data import (
    CATEGORICAL,
    TEXT,
    Dataset,
    OrderedTargetEncoder,
    TfidfVectorizer,
    to_matrices,
)
from .errors import ParameterError
from .seeding import derive_seed
from .tree import (
    GROWTH_DEPTHWISE,
    GROWTH_LEAFWISE,
    GROWTH_OBLIVIOUS,
    SPLIT_EXACT,
    SPLIT_HISTOGRAM,
    TreeParams,
)
from .tune import ParamSpec

FAMILIES = ("gbm", "xgb", "lgbm", "cat")

FAMILY_LABELS = {
    "gbm": "GBM",
    "xgb": "XGBoost-style",
    "lgbm": "LightGBM-style",
    "cat": "CatBoost-style",
}

DEFAULT_VOCAB_SIZE = 512
_PRIOR_WEIGHT = 1.0

# parameter-name translation onto BoostConfig / TreeParams / GossParams
_BOOST_KEYS = {
    "n_estimators": "n_estimators",
    "learning_rate": "learning_rate",
    "subsample": "subsample",
    "colsample": "colsample",
    "leaf_estimation_iterations": "leaf_refinement",
}
_TREE_KEYS = {
    "max_depth": "max_depth",
    "num_leaves": "num_leaves",
    "min_samples_split": "min_samples_split",
    "gamma": "gamma",
    "lambda": "lambda_l2",
    "reg_lambda": "lambda_l2",
    "l2_leaf_reg": "lambda_l2",
    "alpha": "alpha_l1",
    "reg_alpha": "alpha_l1",
    "max_bins": "max_bins",
}
_GOSS_KEYS = ("top_rate", "other_rate")
_INT_KEYS = ("n_estimators", "leaf_estimation_iterations", "max_depth",
             "num_leaves", "min_samples_split", "max_bins")


@dataclass(frozen=True)
class FamilyPreset:
    name: str
    growth: str
    split_algorithm: str
    sparsity_aware: bool
    uses_goss: bool
    init: dict
    space: tuple


_DEPTHS = (2, 3, 4, 5, 8, 10)

_PRESETS = {
    "gbm": FamilyPreset(
        name="gbm",
        growth=GROWTH_DEPTHWISE,
        split_algorithm=SPLIT_EXACT,
        sparsity_aware=False,
        uses_goss=False,
        init={
            "n_estimators": 150,
            "learning_rate": 0.1,
            "subsample": 1.0,
            "colsample": 0.6,
            "max_depth": 3,
            "min_samples_split": 2,
        },
        space=(
            ParamSpec.choice("max_depth", _DEPTHS),
            ParamSpec.loguniform("learning_rate", 0.01, 0.3),
            ParamSpec.choice("min_samples_split", (2, 5, 10)),
        ),
    ),
    "xgb": FamilyPreset(
        name="xgb",
        growth=GROWTH_DEPTHWISE,
        split_algorithm=SPLIT_EXACT,
        sparsity_aware=True,
        uses_goss=False,
        init={
            "n_estimators": 150,
            "learning_rate": 0.3,
            "subsample": 1.0,
            "colsample": 0.6,
            "max_depth": 6,
            "lambda": 1.0,
            "alpha": 0.0,
            "gamma": 0.0,
        },
        space=(
            ParamSpec.choice("max_depth", _DEPTHS),
            ParamSpec.loguniform("learning_rate", 0.01, 0.3),
            ParamSpec.uniform("gamma", 0.0, 3.0),
            ParamSpec.uniform("alpha", 0.0, 1.0),
            ParamSpec.uniform("lambda", 0.0, 3.0),
        ),
    ),
    "lgbm": FamilyPreset(
        name="lgbm",
        growth=GROWTH_LEAFWISE,
        split_algorithm=SPLIT_HISTOGRAM,
        sparsity_aware=True,
        uses_goss=True,
        init={
            "n_estimators": 150,
            "learning_rate": 0.1,
            "colsample": 0.6,
            "num_leaves": 31,
            "top_rate": 0.2,
            "other_rate": 0.1,
            "reg_alpha": 0.0,
            "reg_lambda": 0.0,
            "max_bins": 255,
        },
        space=(
            ParamSpec.choice("num_leaves", (3, 7, 15, 31, 127)),
            ParamSpec.loguniform("learning_rate", 0.01, 0.3),
            ParamSpec.uniform("top_rate", 0.1, 0.5),
            ParamSpec.uniform("other_rate", 0.05, 0.2),
            ParamSpec.uniform("reg_alpha", 0.0, 1.0),
            ParamSpec.uniform("reg_lambda", 0.0, 3.0),
        ),
    ),
    "cat": FamilyPreset(
        name="cat",
        growth=GROWTH_OBLIVIOUS,
        split_algorithm=SPLIT_HISTOGRAM,
        sparsity_aware=True,
        uses_goss=False,
        init={
            "n_estimators": 150,
            "learning_rate": 0.1,
            "subsample": 1.0,
            "colsample": 0.6,
            "max_depth": 6,
            "l2_leaf_reg": 3.0,
            "leaf_estimation_iterations": 10,
            "max_bins": 254,
        },
        space=(
            ParamSpec.choice("max_depth", _DEPTHS),
            ParamSpec.choice("leaf_estimation_iterations", (1, 10)),
            ParamSpec.uniform("l2_leaf_reg", 0.0, 5.0),
        ),
    ),
}


def family_preset(family: str) -> FamilyPreset:
    if family not in _PRESETS:
        raise ParameterError(f"unknown family {family!r}; choose from {FAMILIES}")
    return _PRESETS[family]


def search_space(family: str) -> list:
    return list(family_preset(family).space)


def init_params(family: str) -> dict:
    return dict(family_preset(family).init)


def build_config(family: str, overrides: dict | None = None,
                 init: dict | None = None, seed: int = 0) -> BoostConfig:
    """Resolve a preset plus override layers into a BoostConfig.

    Later layers win: preset defaults, then ``init``, then ``overrides``.
    Unknown parameter names are rejected.
    """
    preset = family_preset(family)
    params = dict(preset.init)
    for layer in (init, overrides):
        if not layer:
            continue
        for key, value in layer.items():
            if key not in _BOOST_KEYS and key not in _TREE_KEYS \
                    and key not in _GOSS_KEYS:
                raise ParameterError(f"unknown parameter {key!r} for family {family!r}")
            if key in _GOSS_KEYS and not preset.uses_goss:
                raise ParameterError(f"{key!r} only applies to the lgbm preset")
            params[key] = value

    boost_kw = {"seed": int(seed)}
    tree_kw = {
        "growth": preset.growth,
        "split_algorithm": preset.split_algorithm,
        "sparsity_aware": preset.sparsity_aware,
    }
    goss_kw = {}
    for key, value in params.items():
        value = int(value) if key in _INT_KEYS else float(value)
        if key in _GOSS_KEYS:
            goss_kw[key] = value
        elif key in _BOOST_KEYS:
            boost_kw[_BOOST_KEYS[key]] = value
        else:
            tree_kw[_TREE_KEYS[key]] = value
    goss = GossParams(**goss_kw) if preset.uses_goss else None
    return BoostConfig(goss=goss, tree=TreeParams(**tree_kw), **boost_kw)


def _splice_text(dataset: Dataset, name: str, columns) -> Dataset:
    cols = []
    for c in dataset.columns:
        if c.name == name:
            cols.extend(columns)
        else:
            cols.append(c)
    return Dataset(cols, dataset.labels, dataset.n_rows, dataset.label_names,
                   dataset.name, _check_classes=False)


class FittedPipeline:
    """Training-fold preprocessing plus the fitted ensemble.

    Encoders and vectorizers are fitted on the training portion only;
    evaluation data is transformed with the frozen training statistics.
    """

    def __init__(self, family: str, model: boost.BoostedEnsemble,
                 encoders: dict, vectorizers: dict):
        self.family = family
        self.model = model
        self.encoders = encoders
        self.vectorizers = vectorizers

    def transform(self, dataset: Dataset) -> Dataset:
        out = dataset
        for col in dataset.columns:
            if col.kind == CATEGORICAL:
                if col.name not in self.encoders:
                    raise ParameterError(
                        f"categorical column {col.name!r} unseen at fit time")
                out = out.replace_column(col.name, self.encoders[col.name].transform(col))
            elif col.kind == TEXT:
                if col.name not in self.vectorizers:
                    raise ParameterError(
                        f"text column {col.name!r} unseen at fit time")
                vec = self.vectorizers[col.name]
                out = _splice_text(out, col.name,
                                   vec.transform(col.documents, prefix=col.name))
        return out

    def _matrices(self, dataset: Dataset):
        encoded = self.transform(dataset)
        return to_matrices(encoded, self.model.config.tree.sparsity_aware)

    def predict_proba(self, dataset: Dataset) -> np.ndarray:
        values, absent = self._matrices(dataset)
        return self.model.probabilities(values, absent)

    def predict_labels(self, dataset: Dataset) -> np.ndarray:
        values, absent = self._matrices(dataset)
        return self.model.labels(values, absent)


def fit_pipeline(train: Dataset, family: str, overrides: dict | None = None,
                 init: dict | None = None, seed: int = 0,
                 vocab_size: int = DEFAULT_VOCAB_SIZE) -> FittedPipeline:
    """Encode the training portion, fit the family preset, return both."""
    config = build_config(family, overrides=overrides, init=init, seed=seed)
    encoders: dict = {}
    vectorizers: dict = {}
    encoded = train
    for col in train.columns:
        if col.kind == CATEGORICAL:
            enc = OrderedTargetEncoder(_PRIOR_WEIGHT)
            new = enc.fit_transform(col, train.labels, train.n_classes,
                                    derive_seed(seed, "encode", col.name))
            encoded = encoded.replace_column(col.name, new)
            encoders[col.name] = enc
        elif col.kind == TEXT:
            vec = TfidfVectorizer(vocab_size).fit(col.documents)
            encoded = _splice_text(encoded, col.name,
                                   vec.transform(col.documents, prefix=col.name))
            vectorizers[col.name] = vec
    model = boost.fit(encoded, config)
    return FittedPipeline(family, model, encoders, vectorizers)
