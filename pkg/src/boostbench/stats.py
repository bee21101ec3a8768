"""Nonparametric model comparison: Wilcoxon signed-ranks, Friedman ranking,
and the Nemenyi critical difference.

Conventions used throughout:

- Ranks run 1..k per dataset with the BEST model receiving rank k (a higher
  rank implies better performance); ties get the average rank.
- Wilcoxon drops zero differences, uses mid-ranks for tied |d|, computes an
  exact p-value over all 2^n sign assignments for n <= 25 (via a polynomial
  convolution equivalent to the enumeration), and a tie-corrected normal
  approximation with 0.5 continuity correction beyond that.
- Tail probabilities come from :mod:`boostbench.special`; nothing here calls
  an external statistics library.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .special import chi2_sf, f_sf, normal_cdf, normal_sf

# Nemenyi critical values q_alpha(k) for k = 2..20: studentized range quantile
# with infinite degrees of freedom divided by sqrt(2).
_NEMENYI_Q = {
    0.05: (
        1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878,
        3.101730, 3.163684, 3.218654, 3.268004, 3.312739, 3.353618, 3.391230,
        3.426041, 3.458425, 3.488685, 3.517073, 3.543799,
    ),
    0.10: (
        1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884,
        2.854606, 2.919889, 2.977768, 3.029694, 3.076733, 3.119693, 3.159199,
        3.195743, 3.229723, 3.261461, 3.291224, 3.319233,
    ),
}

_EXACT_LIMIT = 25


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test."""

    statistic: float
    p_value: float
    method: str
    alternative: str | None = None
    alpha: float | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.p_value <= 1.0):
            raise ParameterError(f"p_value must lie in (0, 1], got {self.p_value}")


@dataclass(frozen=True)
class ScoreMatrix:
    """D datasets x k models grid of mean metric values."""

    values: np.ndarray
    model_names: tuple[str, ...]
    dataset_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ParameterError("score matrix must be 2-dimensional")
        d, k = values.shape
        if d < 2 or k < 2:
            raise ParameterError("score matrix needs at least 2 datasets and 2 models")
        if len(self.model_names) != k:
            raise ParameterError("model_names length does not match column count")
        if len(self.dataset_names) != d:
            raise ParameterError("dataset_names length does not match row count")
        if not np.all(np.isfinite(values)):
            raise ParameterError("score matrix has missing or non-finite cells")

    @property
    def n_datasets(self) -> int:
        return self.values.shape[0]

    @property
    def n_models(self) -> int:
        return self.values.shape[1]


def load_score_matrix(path) -> ScoreMatrix:
    """Read a score matrix from CSV: header row of model names, one row per
    dataset with the dataset name in the first column."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or len(rows[0]) < 3:
        raise ParameterError("score CSV needs a header plus >= 2 datasets and >= 2 models")
    model_names = tuple(name.strip() for name in rows[0][1:])
    dataset_names = []
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(model_names) + 1:
            raise ParameterError(f"score CSV line {lineno}: expected {len(model_names) + 1} cells")
        dataset_names.append(row[0].strip())
        try:
            values.append([float(cell) for cell in row[1:]])
        except ValueError as exc:
            raise ParameterError(f"score CSV line {lineno}: non-numeric cell ({exc})") from exc
    return ScoreMatrix(np.array(values), model_names, tuple(dataset_names))


def rank_midrank(values: np.ndarray) -> np.ndarray:
    """Ascending ranks 1..n with average ranks for ties."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _wilcoxon_exact_tail(doubled_ranks: np.ndarray, w_plus_doubled: int, alternative: str) -> float:
    """Exact tail of W+ by convolving the 2^n sign assignments.

    Mid-ranks are multiples of 1/2, so doubling makes every rank an integer;
    the counts polynomial then enumerates exactly the 2^n assignments.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    upper = 0
    for dr in doubled_ranks:
        dr = int(dr)
        upper += dr
        counts[dr : upper + 1] += counts[0 : upper + 1 - dr]
    n_assign = 2.0 ** len(doubled_ranks)
    p_ge = counts[w_plus_doubled:].sum() / n_assign
    p_le = counts[: w_plus_doubled + 1].sum() / n_assign
    if alternative == "greater":
        return min(p_ge, 1.0)
    if alternative == "less":
        return min(p_le, 1.0)
    return min(1.0, 2.0 * min(p_ge, p_le))


def _wilcoxon_normal_tail(
    ranks: np.ndarray, w_plus: float, alternative: str
) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0.0:
        return 1.0
    sd = var**0.5
    if alternative == "greater":
        return min(1.0, normal_sf((w_plus - mean - 0.5) / sd))
    if alternative == "less":
        return min(1.0, normal_cdf((w_plus - mean + 0.5) / sd))
    z = (abs(w_plus - mean) - 0.5) / sd
    return min(1.0, 2.0 * normal_sf(z))


def wilcoxon_signed_rank(a, b, alternative: str = "two-sided") -> TestResult:
    """Paired Wilcoxon signed-ranks test of a versus b.

    ``alternative='greater'`` tests whether a tends to exceed b.  Zero
    differences are dropped; returns p = 1.0 when every pair ties.
    """
    if alternative not in ("greater", "less", "two-sided"):
        raise ParameterError(f"unknown alternative {alternative!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("wilcoxon_signed_rank needs two equal-length 1-D samples")
    if a.shape[0] < 1:
        raise ParameterError("wilcoxon_signed_rank needs n >= 1")
    d = a - b
    d = d[d != 0.0]
    n = d.shape[0]
    if n == 0:
        return TestResult(0.0, 1.0, "wilcoxon-exact", alternative, details={"n": 0})
    ranks = rank_midrank(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= _EXACT_LIMIT:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        w2 = int(round(2.0 * w_plus))
        p = _wilcoxon_exact_tail(doubled, w2, alternative)
        method = "wilcoxon-exact"
    else:
        p = _wilcoxon_normal_tail(ranks, w_plus, alternative)
        method = "wilcoxon-normal"
    return TestResult(w_plus, max(p, 5e-324), method, alternative, details={"n": n})


def average_ranks(scores: ScoreMatrix, higher_better: bool = True) -> np.ndarray:
    """Mean rank per model over datasets; the best model gets rank k."""
    ranked = np.empty_like(scores.values)
    for i in range(scores.n_datasets):
        row = scores.values[i] if higher_better else -scores.values[i]
        ranked[i] = rank_midrank(row)
    return ranked.mean(axis=0)


def friedman_test(scores: ScoreMatrix, higher_better: bool = True) -> TestResult:
    """Friedman rank test over a D x k score matrix.

    The chi-square p-value gates; the Iman-Davenport F refinement is carried
    in ``details``.
    """
    d = scores.n_datasets
    k = scores.n_models
    mean_ranks = average_ranks(scores, higher_better)
    chi2 = 12.0 * d / (k * (k + 1.0)) * float(np.sum(mean_ranks**2)) - 3.0 * d * (k + 1.0)
    chi2 = max(chi2, 0.0)
    p = chi2_sf(chi2, k - 1)
    details = {"mean_ranks": mean_ranks, "k": k, "d": d}
    denom = d * (k - 1.0) - chi2
    if denom > 1e-12:
        f_stat = (d - 1.0) * chi2 / denom
        details["iman_davenport_F"] = f_stat
        details["iman_davenport_p"] = f_sf(f_stat, k - 1.0, (k - 1.0) * (d - 1.0))
    else:
        details["iman_davenport_F"] = float("inf")
        details["iman_davenport_p"] = 0.0
    return TestResult(chi2, p, "friedman-chi2", details=details)


def nemenyi_cd(k: int, d: int, alpha: float = 0.05) -> float:
    """Critical difference of mean ranks for k models over d datasets."""
    if alpha not in _NEMENYI_Q:
        raise ParameterError(f"alpha must be 0.05 or 0.10, got {alpha}")
    if not 2 <= k <= 20:
        raise ParameterError(f"k outside tabulated range 2..20: {k}")
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    q = _NEMENYI_Q[alpha][k - 2]
    return q * (k * (k + 1.0) / (6.0 * d)) ** 0.5


def nemenyi_significance(mean_ranks, d: int, alpha: float = 0.05) -> np.ndarray:
    """Symmetric boolean matrix: |mean rank difference| exceeds the CD."""
    mean_ranks = np.asarray(mean_ranks, dtype=np.float64)
    cd = nemenyi_cd(mean_ranks.shape[0], d, alpha)
    diff = np.abs(mean_ranks[:, None] - mean_ranks[None, :])
    return diff > cd
