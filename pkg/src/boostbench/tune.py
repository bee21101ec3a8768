"""Hyperparameter search: the search-space grammar, randomized search, and
tree-structured Parzen estimator (TPE) suggestion.

Search spaces are lists of :class:`ParamSpec` (choice / uniform / loguniform).
Randomized search draws every trial independently; TPE splits the history
into good/bad quantiles and proposes the candidate maximizing the density
ratio l(x)/g(x) of one-dimensional Parzen mixtures.  Scores are minimized.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import stratified_kfold
from .errors import ParameterError
from .metrics import log_loss
from .seeding import derive_rng, derive_seed
from .special import normal_cdf

KIND_CHOICE = "choice"
KIND_UNIFORM = "uniform"
KIND_LOGUNIFORM = "loguniform"

TPE_ALPHA = 0.25
TPE_STARTUP = 10
TPE_CANDIDATES = 24

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_REJECT_CAP = 100


@dataclass(frozen=True)
class ParamSpec:
    """One tunable dimension.

    Continuous kinds need lo < hi with finite bounds; loguniform additionally
    needs lo > 0.  Choice values are kept verbatim (integers stay integers).
    """

    name: str
    kind: str
    choices: tuple = ()
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise ParameterError("parameter name must be nonempty")
        if self.kind == KIND_CHOICE:
            if len(self.choices) == 0:
                raise ParameterError(f"{self.name}: choice list is empty")
        elif self.kind in (KIND_UNIFORM, KIND_LOGUNIFORM):
            if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
                raise ParameterError(f"{self.name}: bounds must be finite")
            if not self.lo < self.hi:
                raise ParameterError(f"{self.name}: need lo < hi")
            if self.kind == KIND_LOGUNIFORM and self.lo <= 0.0:
                raise ParameterError(f"{self.name}: loguniform needs lo > 0")
        else:
            raise ParameterError(f"{self.name}: unknown kind {self.kind!r}")

    @classmethod
    def choice(cls, name: str, values) -> "ParamSpec":
        return cls(name, KIND_CHOICE, choices=tuple(values))

    @classmethod
    def uniform(cls, name: str, lo: float, hi: float) -> "ParamSpec":
        return cls(name, KIND_UNIFORM, lo=float(lo), hi=float(hi))

    @classmethod
    def loguniform(cls, name: str, lo: float, hi: float) -> "ParamSpec":
        return cls(name, KIND_LOGUNIFORM, lo=float(lo), hi=float(hi))

    def contains(self, value) -> bool:
        if self.kind == KIND_CHOICE:
            return any(value == c for c in self.choices)
        return bool(self.lo <= value <= self.hi)

    def to_dict(self) -> dict:
        if self.kind == KIND_CHOICE:
            return {"name": self.name, "kind": self.kind, "choices": list(self.choices)}
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSpec":
        if d.get("kind") == KIND_CHOICE:
            return cls.choice(d["name"], d["choices"])
        return cls(d["name"], d["kind"], lo=float(d["lo"]), hi=float(d["hi"]))


@dataclass(frozen=True)
class Trial:
    """One evaluated configuration; failed trials carry score +inf."""

    config: dict
    score: float
    fold_scores: tuple = ()
    wall_time: float = 0.0
    error: Optional[str] = None


@dataclass
class TuningHistory:
    """Ordered trial log of one tuning run; the objective is minimized."""

    trials: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trials)

    def append(self, trial: Trial) -> None:
        self.trials.append(trial)

    @property
    def scores(self) -> np.ndarray:
        return np.array([t.score for t in self.trials], dtype=np.float64)

    def best_index(self) -> int:
        """Lowest score; ties go to the earliest trial."""
        if not self.trials:
            raise ParameterError("history is empty")
        best = 0
        for i, t in enumerate(self.trials):
            if t.score < self.trials[best].score:
                best = i
        return best

    def best(self) -> Trial:
        return self.trials[self.best_index()]

    def best_so_far(self) -> np.ndarray:
        """Running minimum of scores; non-increasing by construction."""
        return np.minimum.accumulate(self.scores)


def _rng_of(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_rng(seed)


def _draw_one(spec: ParamSpec, rng: np.random.Generator):
    if spec.kind == KIND_CHOICE:
        return spec.choices[int(rng.integers(len(spec.choices)))]
    u = float(rng.random())
    if spec.kind == KIND_UNIFORM:
        return spec.lo + (spec.hi - spec.lo) * u
    lo, hi = math.log(spec.lo), math.log(spec.hi)
    return math.exp(lo + (hi - lo) * u)


def sample_random(space, seed) -> dict:
    """Draw one config with every parameter independent per its kind."""
    if not space:
        raise ParameterError("empty search space")
    rng = _rng_of(seed)
    return {spec.name: _draw_one(spec, rng) for spec in space}


def _trial_list(history):
    if isinstance(history, TuningHistory):
        return history.trials
    return list(history)


def tpe_split_history(history, alpha: float = TPE_ALPHA):
    """Partition trials into (good, bad): good = ceil(alpha*n) lowest scores.

    Score ties break by insertion order; both lists keep insertion order.
    """
    trials = _trial_list(history)
    n = len(trials)
    if n == 0:
        raise ParameterError("history is empty")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    n_good = math.ceil(alpha * n)
    order = sorted(range(n), key=lambda i: (trials[i].score, i))
    good_idx = set(order[:n_good])
    good = [trials[i] for i in range(n) if i in good_idx]
    bad = [trials[i] for i in range(n) if i not in good_idx]
    return good, bad


def _parzen_components(xs: np.ndarray, lo: float, hi: float):
    """Kernel centers and adaptive bandwidths for one continuous dimension.

    Bandwidth of x_i = max distance to its sorted neighbors, with the domain
    bounds acting as virtual neighbors; clipped to [(hi-lo)/100, hi-lo].
    """
    xs = np.sort(np.asarray(xs, dtype=np.float64))
    span = hi - lo
    if xs.size == 0:
        return xs, xs
    left = np.concatenate(([lo], xs[:-1]))
    right = np.concatenate((xs[1:], [hi]))
    bw = np.maximum(xs - left, right - xs)
    bw = np.clip(bw, span / 100.0, span)
    return xs, bw


def _parzen_logpdf(v: np.ndarray, mu: np.ndarray, bw: np.ndarray,
                   lo: float, hi: float) -> np.ndarray:
    """Log density of the mixture: n truncated Gaussians plus one uniform
    prior over [lo, hi], all weighted 1/(n+1)."""
    span = hi - lo
    dens = np.full(v.shape[0], 1.0 / span)
    if mu.size:
        z = (v[:, None] - mu[None, :]) / bw[None, :]
        kern = np.exp(-0.5 * z * z) / (_SQRT_2PI * bw[None, :])
        mass = np.array([
            normal_cdf((hi - m) / b) - normal_cdf((lo - m) / b)
            for m, b in zip(mu, bw)
        ])
        dens = dens + (kern / mass[None, :]).sum(axis=1)
    return np.log(dens / (mu.size + 1.0))


def _draw_truncated(rng: np.random.Generator, mu: float, sigma: float,
                    lo: float, hi: float) -> float:
    v = mu
    for _ in range(_REJECT_CAP):
        v = mu + sigma * float(rng.standard_normal())
        if lo <= v <= hi:
            return v
    return min(max(v, lo), hi)


def _suggest_continuous(spec, good_vals, bad_vals, n_candidates, rng):
    logspace = spec.kind == KIND_LOGUNIFORM
    lo = math.log(spec.lo) if logspace else spec.lo
    hi = math.log(spec.hi) if logspace else spec.hi
    gx = np.log(np.asarray(good_vals, np.float64)) if logspace \
        else np.asarray(good_vals, np.float64)
    bx = np.log(np.asarray(bad_vals, np.float64)) if logspace \
        else np.asarray(bad_vals, np.float64)
    mu_l, bw_l = _parzen_components(gx, lo, hi)
    mu_g, bw_g = _parzen_components(bx, lo, hi)
    draws = np.empty(n_candidates)
    for j in range(n_candidates):
        comp = int(rng.integers(mu_l.size + 1))
        if comp == mu_l.size:
            draws[j] = lo + (hi - lo) * float(rng.random())
        else:
            draws[j] = _draw_truncated(rng, float(mu_l[comp]), float(bw_l[comp]), lo, hi)
    score = _parzen_logpdf(draws, mu_l, bw_l, lo, hi) \
        - _parzen_logpdf(draws, mu_g, bw_g, lo, hi)
    values = np.exp(draws) if logspace else draws
    values = np.clip(values, spec.lo, spec.hi)
    return list(values), score


def _choice_probs(idx: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    return (counts + 1.0) / (counts.sum() + k)


def _suggest_choice(spec, good_vals, bad_vals, n_candidates, rng):
    k = len(spec.choices)
    pos = {c: i for i, c in enumerate(spec.choices)}
    g_idx = np.array([pos[v] for v in good_vals], dtype=np.int64)
    b_idx = np.array([pos[v] for v in bad_vals], dtype=np.int64)
    p_l = _choice_probs(g_idx, k)
    p_g = _choice_probs(b_idx, k)
    draws = rng.choice(k, size=n_candidates, p=p_l)
    score = np.log(p_l[draws]) - np.log(p_g[draws])
    return [spec.choices[int(d)] for d in draws], score


def tpe_suggest(space, history, alpha: float = TPE_ALPHA,
                n_candidates: int = TPE_CANDIDATES, seed=0,
                n_startup: int = TPE_STARTUP) -> dict:
    """Propose the candidate maximizing sum of log l(x) - log g(x).

    Falls back to :func:`sample_random` until the history holds n_startup
    trials.  Candidates are drawn dimension by dimension from the good-side
    mixture; the acquisition argmax breaks ties toward the first candidate.
    """
    if not space:
        raise ParameterError("empty search space")
    if n_candidates < 1:
        raise ParameterError("n_candidates must be >= 1")
    trials = _trial_list(history)
    rng = _rng_of(seed)
    if len(trials) < n_startup:
        return sample_random(space, rng)
    good, bad = tpe_split_history(trials, alpha)
    columns = []
    total = np.zeros(n_candidates)
    for spec in space:
        good_vals = [t.config[spec.name] for t in good]
        bad_vals = [t.config[spec.name] for t in bad]
        if spec.kind == KIND_CHOICE:
            vals, score = _suggest_choice(spec, good_vals, bad_vals, n_candidates, rng)
        else:
            vals, score = _suggest_continuous(spec, good_vals, bad_vals, n_candidates, rng)
        columns.append(vals)
        total += score
    best = int(np.argmax(total))
    out = {}
    for spec, vals in zip(space, columns):
        v = vals[best]
        out[spec.name] = float(v) if spec.kind != KIND_CHOICE else v
    return out


def tune(dataset, family: str, space, init: Optional[dict] = None,
         method: str = "random", n_iter: int = 30, inner_k: int = 5, seed: int = 0,
         alpha: float = TPE_ALPHA, n_candidates: int = TPE_CANDIDATES,
         n_startup: int = TPE_STARTUP):
    """Search hyperparameters for one model family on one training portion.

    Every trial trains the family preset (``init`` overridden by the sampled
    values) on inner_k stratified folds and is scored by the mean validation
    log loss.  The inner fold plan is derived once per call, so all trials
    see identical splits.  A trial that raises is recorded with score +inf
    and the run continues.  Returns (best config, TuningHistory); ties on
    the best score go to the earliest trial.
    """
    from . import presets  # deferred; presets imports this module

    if inner_k < 2:
        raise ParameterError("inner_k must be >= 2")
    if n_iter < 1:
        raise ParameterError("n_iter must be >= 1")
    if method not in ("random", "tpe"):
        raise ParameterError(f"unknown tuning method {method!r}")
    if not space:
        raise ParameterError("empty search space")

    plan = stratified_kfold(dataset.labels, inner_k, derive_seed(seed, "inner-folds"))
    history = TuningHistory()
    for t in range(n_iter):
        sample_seed = derive_seed(seed, "trial", t)
        if method == "tpe":
            overrides = tpe_suggest(space, history, alpha=alpha,
                                    n_candidates=n_candidates, seed=sample_seed,
                                    n_startup=n_startup)
        else:
            overrides = sample_random(space, sample_seed)
        start = time.perf_counter()
        fold_scores = []
        error = None
        try:
            fit_seed = derive_seed(seed, "fit", t)
            for f in range(plan.k):
                train = dataset.subset(plan.train_rows(f))
                valid = dataset.subset(plan.test_rows(f))
                model = presets.fit_pipeline(train, family, overrides=overrides,
                                             init=init, seed=fit_seed)
                fold_scores.append(log_loss(valid.labels, model.predict_proba(valid)))
            score = float(np.mean(fold_scores))
        except Exception as exc:  # noqa: BLE001 - budget honesty over abort
            score = math.inf
            error = f"{type(exc).__name__}: {exc}"
        history.append(Trial(
            config=dict(overrides),
            score=score,
            fold_scores=tuple(fold_scores),
            wall_time=time.perf_counter() - start,
            error=error,
        ))
    return dict(history.best().config), history
