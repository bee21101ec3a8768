"""Experiment orchestration: nested cross-validation over model-family
presets and tuning regimes, with CSV / Markdown report emission.

A run evaluates every (dataset, family, regime) cell against one shared
outer stratified fold plan per dataset; tuned regimes search on each outer
training portion with an inner stratified plan, refit the best configuration
on the full training portion, and score the held-out fold.  Every random
draw derives from (seed, dataset, family, regime, fold), so metric values
are identical across re-runs and schedules; only wall-clock timings vary.

Report files written by :func:`emit_report`:

- ``report.json``            full machine-readable record (always written)
- ``foldplans/<ds>.json``    the serialized outer fold plan per dataset
- ``fold_scores.csv``        one row per (dataset, family, regime, fold)
- ``summary.csv``            per-cell means, standard deviations, timings
- ``pct_diff.csv``           percentage gain/loss of tuned vs untuned cells
- ``ranks.csv``              per-metric mean Friedman ranks, CD, test stats
- ``pairwise.csv``           per-metric pairwise rank gaps and significance
- ``trials.csv``             every tuning trial with score and wall time
- ``digest.md``              human-readable summary
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import presets
from .data import load_csv, stratified_kfold
from .errors import ParameterError, ReportError
from .metrics import accuracy, auc_binary, auc_weighted_ovr, f1, log_loss
from .seeding import derive_seed
from .stats import (
    ScoreMatrix,
    average_ranks,
    friedman_test,
    nemenyi_cd,
    wilcoxon_signed_rank,
)
from .tune import tune

REGIMES = ("none", "tpe", "random")
DEFAULT_METRICS = ("accuracy", "f1", "auc", "log_loss")
ENV_MAX_WORKERS = "BOOSTBENCH_MAX_WORKERS"

_REPORT_FORMAT = "boostbench-report"
_REPORT_VERSION = 1


def max_workers_from_env() -> int:
    raw = os.environ.get(ENV_MAX_WORKERS, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{ENV_MAX_WORKERS} must be an integer, got {raw!r}")
    if value < 1:
        raise ParameterError(f"{ENV_MAX_WORKERS} must be >= 1, got {value}")
    return value


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetSpec:
    """One dataset entry: a CSV path plus its column schema."""

    name: str
    path: str
    schema: dict

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = "") -> "DatasetSpec":
        """Accepts either an explicit ``schema`` map or the shorthand
        ``label_column`` / ``categorical_columns`` / ``text_columns``
        (remaining header columns default to numeric)."""
        name = doc.get("name")
        path = doc.get("path")
        if not name or not path:
            raise ParameterError("dataset entries need 'name' and 'path'")
        path = _resolve_path(path, base_dir)
        if "schema" in doc:
            return cls(name, path, dict(doc["schema"]))
        label = doc.get("label_column")
        if not label:
            raise ParameterError(
                f"dataset {name!r}: give a 'schema' or a 'label_column'")
        categorical = set(doc.get("categorical_columns", ()))
        text = set(doc.get("text_columns", ()))
        with open(path, newline="", encoding="utf-8") as fh:
            header = [h.strip() for h in next(csv.reader(fh))]
        schema = {}
        for col in header:
            if col == label:
                schema[col] = "label"
            elif col in categorical:
                schema[col] = "categorical"
            elif col in text:
                schema[col] = "text"
            else:
                schema[col] = "numeric"
        missing = (categorical | text | {label}) - set(header)
        if missing:
            raise ParameterError(f"dataset {name!r}: columns not in file: {sorted(missing)}")
        return cls(name, path, schema)


def _resolve_path(path: str, base_dir: str) -> str:
    """As given if it resolves; else relative to the config file's directory,
    then to that directory's parent (configs/ next to data/)."""
    if os.path.isabs(path) or os.path.exists(path) or not base_dir:
        return path
    for root in (base_dir, os.path.dirname(base_dir)):
        alt = os.path.join(root, path)
        if os.path.exists(alt):
            return alt
    return path


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs; loadable from a JSON document."""

    datasets: tuple
    families: tuple = presets.FAMILIES
    regimes: tuple = REGIMES
    outer_k: int = 10
    inner_k: int = 5
    tpe_iter: int = 15
    random_iter: int = 30
    seed: int = 0
    metrics: tuple = DEFAULT_METRICS
    output_dir: str = "results"
    name: str = "experiment"
    overrides: dict = field(default_factory=dict)
    family_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "regimes", tuple(self.regimes))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.outer_k < 2 or self.inner_k < 2:
            raise ParameterError("outer_k and inner_k must be >= 2")
        if self.tpe_iter < 1 or self.random_iter < 1:
            raise ParameterError("tuning budgets must be >= 1")
        for fam in self.families:
            if fam not in presets.FAMILIES:
                raise ParameterError(f"unknown family {fam!r}")
        for regime in self.regimes:
            if regime not in REGIMES:
                raise ParameterError(f"unknown regime {regime!r}")
        for metric in self.metrics:
            if metric not in DEFAULT_METRICS:
                raise ParameterError(f"unknown metric {metric!r}")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ParameterError("duplicate dataset names")
        for fam in self.family_overrides:
            if fam not in presets.FAMILIES:
                raise ParameterError(f"family_overrides for unknown family {fam!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "datasets": [
                {"name": d.name, "path": d.path, "schema": dict(d.schema)}
                for d in self.datasets
            ],
            "families": list(self.families),
            "regimes": list(self.regimes),
            "outer_k": self.outer_k,
            "inner_k": self.inner_k,
            "tpe_iter": self.tpe_iter,
            "random_iter": self.random_iter,
            "seed": self.seed,
            "metrics": list(self.metrics),
            "output_dir": self.output_dir,
            "overrides": dict(self.overrides),
            "family_overrides": {k: dict(v) for k, v in self.family_overrides.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = "") -> "ExperimentConfig":
        known = {
            "name", "datasets", "families", "regimes", "outer_k", "inner_k",
            "tpe_iter", "random_iter", "seed", "metrics", "output_dir",
            "overrides", "family_overrides",
        }
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        if "datasets" not in doc:
            raise ParameterError("config needs a 'datasets' list")
        kwargs = {k: v for k, v in doc.items() if k != "datasets"}
        datasets = tuple(
            DatasetSpec.from_dict(d, base_dir) for d in doc["datasets"])
        return cls(datasets=datasets, **kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ExperimentConfig.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# run records


def _num(value):
    """JSON-safe float: non-finite values become None."""
    value = float(value)
    return value if math.isfinite(value) else None


def _unnum(value) -> float:
    return math.inf if value is None else float(value)


@dataclass(frozen=True)
class FoldRecord:
    dataset: str
    family: str
    regime: str
    fold: int
    metrics: dict
    fit_time: float
    tune_time: float
    best_params: dict
    plan_sha256: str

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset, "family": self.family,
            "regime": self.regime, "fold": self.fold,
            "metrics": {k: _num(v) for k, v in self.metrics.items()},
            "fit_time": self.fit_time, "tune_time": self.tune_time,
            "best_params": dict(self.best_params),
            "plan_sha256": self.plan_sha256,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldRecord":
        d = dict(d)
        d["metrics"] = {k: _unnum(v) for k, v in d["metrics"].items()}
        return cls(**d)


@dataclass(frozen=True)
class TrialRecord:
    dataset: str
    family: str
    regime: str
    fold: int
    trial: int
    params: dict
    score: float
    wall_time: float
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset, "family": self.family,
            "regime": self.regime, "fold": self.fold, "trial": self.trial,
            "params": dict(self.params), "score": _num(self.score),
            "wall_time": self.wall_time, "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        d = dict(d)
        d["score"] = _unnum(d["score"])
        return cls(**d)


@dataclass(frozen=True)
class CellError:
    """A recorded failure; fold -1 marks a dataset-level failure."""

    dataset: str
    family: str
    regime: str
    fold: int
    message: str

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "family": self.family,
                "regime": self.regime, "fold": self.fold, "message": self.message}

    @classmethod
    def from_dict(cls, d: dict) -> "CellError":
        return cls(**d)


@dataclass
class ExperimentReport:
    """Everything a run produced, JSON round-trippable."""

    config: dict
    folds: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    foldplans: dict = field(default_factory=dict)
    total_time: float = 0.0

    def to_json(self) -> str:
        doc = {
            "format": _REPORT_FORMAT,
            "version": _REPORT_VERSION,
            "config": self.config,
            "folds": [r.to_dict() for r in self.folds],
            "trials": [t.to_dict() for t in self.trials],
            "errors": [e.to_dict() for e in self.errors],
            "foldplans": dict(self.foldplans),
            "total_time": self.total_time,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        doc = json.loads(text)
        if doc.get("format") != _REPORT_FORMAT:
            raise ReportError("not an experiment report document")
        if doc.get("version") != _REPORT_VERSION:
            raise ReportError(f"unsupported report version {doc.get('version')!r}")
        return cls(
            config=doc["config"],
            folds=[FoldRecord.from_dict(d) for d in doc["folds"]],
            trials=[TrialRecord.from_dict(d) for d in doc["trials"]],
            errors=[CellError.from_dict(d) for d in doc["errors"]],
            foldplans=dict(doc["foldplans"]),
            total_time=float(doc["total_time"]),
        )


# ---------------------------------------------------------------------------
# the run itself


def _score_all(names, truth, predicted, probs, n_classes: int) -> dict:
    out = {}
    for m in names:
        if m == "accuracy":
            out[m] = accuracy(truth, predicted)
        elif m == "f1":
            out[m] = f1(truth, predicted, "binary" if n_classes == 2 else "weighted")
        elif m == "auc":
            out[m] = (auc_binary(truth, probs[:, 1]) if n_classes == 2
                      else auc_weighted_ovr(truth, probs))
        elif m == "log_loss":
            out[m] = log_loss(truth, probs)
        else:
            raise ParameterError(f"unknown metric {m!r}")
    return out


def _merged_init(config: ExperimentConfig, family: str):
    init = dict(config.overrides)
    init.update(config.family_overrides.get(family, {}))
    return init or None


def _fold_job(config, dataset, plan, family, regime, fold):
    """Evaluate one (family, regime, fold) cell; never raises."""
    try:
        # re-serialize the plan this cell actually uses so the recorded
        # digest can verify split identity across all cells of a dataset
        plan_sha = hashlib.sha256(plan.to_json().encode("utf-8")).hexdigest()
        train = dataset.subset(plan.train_rows(fold))
        test = dataset.subset(plan.test_rows(fold))
        init = _merged_init(config, family)
        best: dict = {}
        tune_time = 0.0
        trial_records = []
        if regime != "none":
            method = "tpe" if regime == "tpe" else "random"
            n_iter = config.tpe_iter if regime == "tpe" else config.random_iter
            t0 = time.perf_counter()
            best, history = tune(
                train, family, presets.search_space(family), init=init,
                method=method, n_iter=n_iter, inner_k=config.inner_k,
                seed=derive_seed(config.seed, dataset.name, family, regime, fold))
            tune_time = time.perf_counter() - t0
            trial_records = [
                TrialRecord(dataset.name, family, regime, fold, i,
                            dict(tr.config), tr.score, tr.wall_time, tr.error)
                for i, tr in enumerate(history.trials)
            ]
        t0 = time.perf_counter()
        pipe = presets.fit_pipeline(
            train, family, overrides=best, init=init,
            seed=derive_seed(config.seed, "fit", dataset.name, family, regime, fold))
        fit_time = time.perf_counter() - t0
        probs = pipe.predict_proba(test)
        predicted = pipe.predict_labels(test)
        record = FoldRecord(
            dataset.name, family, regime, fold,
            _score_all(config.metrics, test.labels, predicted, probs,
                       dataset.n_classes),
            fit_time, tune_time, best, plan_sha)
        return record, trial_records, None
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the run
        return None, [], CellError(dataset.name, family, regime, fold,
                                   f"{type(exc).__name__}: {exc}")


def run_experiment(config: ExperimentConfig,
                   max_workers: Optional[int] = None) -> ExperimentReport:
    """Run every configured cell; failures become error records."""
    start = time.perf_counter()
    if max_workers is None:
        max_workers = max_workers_from_env()
    report = ExperimentReport(config=config.to_dict())
    for spec in config.datasets:
        try:
            dataset = load_csv(spec.path, spec.schema, name=spec.name)
            plan = stratified_kfold(
                dataset.labels, config.outer_k,
                derive_seed(config.seed, "outer-folds", spec.name))
        except Exception as exc:  # noqa: BLE001
            report.errors.append(CellError(spec.name, "", "", -1,
                                           f"{type(exc).__name__}: {exc}"))
            continue
        report.foldplans[spec.name] = plan.to_json()
        jobs = [(family, regime, fold)
                for family in config.families
                for regime in config.regimes
                for fold in range(config.outer_k)]

        def call(args, _dataset=dataset, _plan=plan):
            family, regime, fold = args
            return _fold_job(config, _dataset, _plan, family, regime, fold)

        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                results = list(pool.map(call, jobs))
        else:
            results = [call(j) for j in jobs]
        for record, trial_records, err in results:
            if err is not None:
                report.errors.append(err)
            else:
                report.folds.append(record)
                report.trials.extend(trial_records)
    report.total_time = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# report emission


def _cells(report: ExperimentReport) -> dict:
    """(dataset, family, regime) -> fold records, in first-seen order."""
    out: dict = {}
    for rec in report.folds:
        out.setdefault((rec.dataset, rec.family, rec.regime), []).append(rec)
    return out


def _mean_sdev(values) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    sdev = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, sdev


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def _metric_names(report: ExperimentReport) -> list:
    return list(report.config.get("metrics", DEFAULT_METRICS))


def _fold_scores_rows(report, metrics):
    rows = []
    for rec in report.folds:
        rows.append([rec.dataset, rec.family, rec.regime, rec.fold]
                    + [rec.metrics.get(m, "") for m in metrics]
                    + [rec.fit_time, rec.tune_time, rec.plan_sha256,
                       json.dumps(rec.best_params, sort_keys=True)])
    return rows


def _summary_rows(report, metrics):
    rows = []
    for (ds, fam, regime), recs in _cells(report).items():
        row = [ds, fam, regime, len(recs)]
        for m in metrics:
            mean, sdev = _mean_sdev([r.metrics[m] for r in recs])
            row += [mean, sdev]
        fit = [r.fit_time for r in recs]
        tun = [r.tune_time for r in recs]
        row += [float(np.mean(fit)), float(np.sum(fit)),
                float(np.mean(tun)), float(np.sum(tun))]
        rows.append(row)
    return rows


def _pct_diff_rows(report, metrics):
    """100 * (tuned - baseline) / baseline for cell means and sdevs."""
    cells = _cells(report)
    means: dict = {}
    sdevs: dict = {}
    for key, recs in cells.items():
        for m in metrics:
            means[key + (m,)], sdevs[key + (m,)] = _mean_sdev(
                [r.metrics[m] for r in recs])
    rows = []
    for (ds, fam, regime) in cells:
        if regime == "none":
            continue
        base = (ds, fam, "none")
        if base not in cells:
            continue
        for m in metrics:
            mb, sb = means[base + (m,)], sdevs[base + (m,)]
            mt, st = means[(ds, fam, regime, m)], sdevs[(ds, fam, regime, m)]
            pct_mean = 100.0 * (mt - mb) / mb if mb != 0.0 else ""
            pct_sdev = 100.0 * (st - sb) / sb if sb != 0.0 else ""
            rows.append([ds, fam, regime, m, mb, mt, pct_mean, sb, st, pct_sdev])
    return rows


def _score_matrix(report, metric):
    """Mean-score matrix (datasets x family-regime models), or (None, note).

    Models missing any dataset cell are dropped so the matrix stays full.
    """
    cells = _cells(report)
    datasets = list(dict.fromkeys(rec.dataset for rec in report.folds))
    models = list(dict.fromkeys((rec.family, rec.regime) for rec in report.folds))
    kept = [m for m in models if all((ds,) + m in cells for ds in datasets)]
    dropped = sorted(set(models) - set(kept))
    note = ""
    if dropped:
        note = "dropped incomplete models: " + ", ".join(f"{f}-{r}" for f, r in dropped)
    if len(datasets) < 2 or len(kept) < 2:
        return None, note or "need >= 2 datasets and >= 2 complete models to rank"
    values = np.empty((len(datasets), len(kept)))
    for i, ds in enumerate(datasets):
        for j, (fam, regime) in enumerate(kept):
            values[i, j] = _mean_sdev(
                [r.metrics[metric] for r in cells[(ds, fam, regime)]])[0]
    names = tuple(f"{fam}-{regime}" for fam, regime in kept)
    return ScoreMatrix(values, names, tuple(datasets)), note


def _rank_rows(report, metrics, alpha=0.05):
    """(ranks rows, pairwise rows, notes)."""
    rank_rows = []
    pair_rows = []
    notes = []
    for metric in metrics:
        matrix, note = _score_matrix(report, metric)
        if note:
            notes.append(f"{metric}: {note}")
        if matrix is None:
            continue
        higher_better = metric != "log_loss"
        ranks = average_ranks(matrix, higher_better)
        fried = friedman_test(matrix, higher_better)
        k, d = matrix.n_models, matrix.n_datasets
        try:
            cd = nemenyi_cd(k, d, alpha)
        except ParameterError as exc:
            notes.append(f"{metric}: no CD ({exc})")
            cd = ""
        for j, name in enumerate(matrix.model_names):
            rank_rows.append([
                metric, name, float(ranks[j]), cd, k, d,
                fried.statistic, fried.p_value,
                fried.details["iman_davenport_F"],
                fried.details["iman_davenport_p"],
            ])
        for i in range(k):
            for j in range(i + 1, k):
                gap = float(abs(ranks[i] - ranks[j]))
                significant = (gap > cd) if cd != "" else ""
                w = wilcoxon_signed_rank(matrix.values[:, i], matrix.values[:, j],
                                         "two-sided")
                pair_rows.append([
                    metric, matrix.model_names[i], matrix.model_names[j],
                    float(ranks[i]), float(ranks[j]), gap, cd, significant,
                    w.statistic, w.p_value,
                ])
    return rank_rows, pair_rows, notes


def _digest_md(report, metrics) -> str:
    cfg = report.config
    cells = _cells(report)
    lines = [
        f"# Experiment digest: {cfg.get('name', 'experiment')}",
        "",
        f"- datasets: {', '.join(sorted(report.foldplans)) or 'none loaded'}",
        f"- families: {', '.join(cfg.get('families', ()))}",
        f"- regimes: {', '.join(cfg.get('regimes', ()))}",
        f"- outer folds: {cfg.get('outer_k')}, inner folds: {cfg.get('inner_k')}",
        f"- budgets: tpe={cfg.get('tpe_iter')}, random={cfg.get('random_iter')}",
        f"- seed: {cfg.get('seed')}",
        f"- fold rows: {len(report.folds)}, recorded errors: {len(report.errors)}",
        f"- total wall time: {report.total_time:.1f} s",
        "",
    ]
    datasets = list(dict.fromkeys(rec.dataset for rec in report.folds))
    for ds in datasets:
        lines.append(f"## {ds}")
        lines.append("")
        header = "| family | regime | " + " | ".join(metrics) \
            + " | fit s | tune s |"
        sep = "|" + "---|" * (len(metrics) + 4)
        lines += [header, sep]
        for (d, fam, regime), recs in cells.items():
            if d != ds:
                continue
            parts = [fam, regime]
            for m in metrics:
                mean, sdev = _mean_sdev([r.metrics[m] for r in recs])
                parts.append(f"{mean:.4f} ± {sdev:.4f}")
            parts.append(f"{np.mean([r.fit_time for r in recs]):.2f}")
            parts.append(f"{np.sum([r.tune_time for r in recs]):.1f}")
            lines.append("| " + " | ".join(parts) + " |")
        lines.append("")
    rank_rows, _, notes = _rank_rows(report, metrics)
    by_metric: dict = {}
    for row in rank_rows:
        by_metric.setdefault(row[0], []).append(row)
    for metric, rows in by_metric.items():
        lines.append(f"## Mean ranks: {metric}")
        lines.append("")
        cd = rows[0][3]
        fried_stat, fried_p = rows[0][6], rows[0][7]
        lines += ["| model | mean rank |", "|---|---|"]
        for row in sorted(rows, key=lambda r: -r[2]):
            lines.append(f"| {row[1]} | {row[2]:.3f} |")
        lines.append("")
        cd_text = f"{cd:.3f}" if cd != "" else "n/a"
        lines.append(
            f"Nemenyi CD (alpha 0.05) = {cd_text}; "
            f"Friedman chi2 = {fried_stat:.3f}, p = {fried_p:.4f}")
        lines.append("")
    if notes:
        lines.append("## Ranking notes")
        lines.append("")
        lines += [f"- {n}" for n in notes]
        lines.append("")
    lines.append("## Errors")
    lines.append("")
    if report.errors:
        for e in report.errors:
            where = f"{e.dataset}/{e.family}/{e.regime}/fold{e.fold}" if e.family \
                else e.dataset
            lines.append(f"- {where}: {e.message}")
    else:
        lines.append("- none")
    lines.append("")
    return "\n".join(lines)


def emit_report(report: ExperimentReport, out_dir,
                formats=("csv", "md")) -> list:
    """Write report files into ``out_dir``; returns the written paths."""
    if not report.folds and not report.errors:
        raise ReportError("nothing to report")
    for fmt in formats:
        if fmt not in ("csv", "md"):
            raise ParameterError(f"unknown report format {fmt!r}")
    out_dir = str(out_dir)
    plans_dir = os.path.join(out_dir, "foldplans")
    try:
        os.makedirs(plans_dir, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create {out_dir}: {exc}") from exc

    written = []
    path = os.path.join(out_dir, "report.json")
    _write_text(path, report.to_json())
    written.append(path)
    for ds, plan_json in report.foldplans.items():
        path = os.path.join(plans_dir, f"{ds}.json")
        _write_text(path, plan_json)
        written.append(path)

    metrics = _metric_names(report)
    if "csv" in formats:
        path = os.path.join(out_dir, "fold_scores.csv")
        _write_csv(path, ["dataset", "family", "regime", "fold", *metrics,
                          "fit_time", "tune_time", "plan_sha256", "best_params"],
                   _fold_scores_rows(report, metrics))
        written.append(path)

        path = os.path.join(out_dir, "summary.csv")
        header = ["dataset", "family", "regime", "n_folds"]
        for m in metrics:
            header += [f"{m}_mean", f"{m}_sdev"]
        header += ["fit_time_mean", "fit_time_total",
                   "tune_time_mean", "tune_time_total"]
        _write_csv(path, header, _summary_rows(report, metrics))
        written.append(path)

        path = os.path.join(out_dir, "pct_diff.csv")
        _write_csv(path, ["dataset", "family", "regime", "metric",
                          "baseline_mean", "tuned_mean", "pct_mean",
                          "baseline_sdev", "tuned_sdev", "pct_sdev"],
                   _pct_diff_rows(report, metrics))
        written.append(path)

        rank_rows, pair_rows, _ = _rank_rows(report, metrics)
        path = os.path.join(out_dir, "ranks.csv")
        _write_csv(path, ["metric", "model", "mean_rank", "cd", "k", "d",
                          "friedman_chi2", "friedman_p",
                          "iman_davenport_F", "iman_davenport_p"], rank_rows)
        written.append(path)

        path = os.path.join(out_dir, "pairwise.csv")
        _write_csv(path, ["metric", "model_a", "model_b", "rank_a", "rank_b",
                          "rank_gap", "cd", "nemenyi_significant",
                          "wilcoxon_statistic", "wilcoxon_p"], pair_rows)
        written.append(path)

        path = os.path.join(out_dir, "trials.csv")
        _write_csv(path, ["dataset", "family", "regime", "fold", "trial",
                          "score", "wall_time", "error", "params"],
                   [[t.dataset, t.family, t.regime, t.fold, t.trial,
                     "" if not math.isfinite(t.score) else t.score,
                     t.wall_time, t.error or "",
                     json.dumps(t.params, sort_keys=True)]
                    for t in report.trials])
        written.append(path)

    if "md" in formats:
        path = os.path.join(out_dir, "digest.md")
        _write_text(path, _digest_md(report, metrics))
        written.append(path)
    return written
