import csv
import hashlib
import json
import math
import os

import numpy as np
import pytest

from boostbench import bench, cli
from boostbench.bench import (
    DatasetSpec,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    load_config,
    run_experiment,
)
from boostbench.data import FoldPlan
from boostbench.errors import ParameterError, ReportError
from boostbench.stats import nemenyi_cd

CSV_FILES = ("fold_scores.csv", "summary.csv", "pct_diff.csv", "ranks.csv",
             "pairwise.csv", "trials.csv")


def write_datasets(root):
    rng = np.random.default_rng(12)
    n = 48
    y = rng.integers(0, 2, size=n)
    x1 = rng.normal(size=n) + 1.6 * y
    color = rng.choice(["red", "blue"], size=n)
    with open(root / "alpha.csv", "w", encoding="utf-8") as fh:
        fh.write("x1,color,target\n")
        for i in range(n):
            fh.write(f"{float(x1[i])!r},{color[i]},{y[i]}\n")
    m = 40
    y2 = rng.integers(0, 2, size=m)
    u = rng.normal(size=m) - y2
    v = rng.normal(size=m)
    with open(root / "beta.csv", "w", encoding="utf-8") as fh:
        fh.write("u,v,target\n")
        for i in range(m):
            cell = "" if rng.random() < 0.08 else repr(float(v[i]))
            fh.write(f"{float(u[i])!r},{cell},{y2[i]}\n")


def tiny_config(root, **kw):
    base = {
        "name": "tiny",
        "seed": 5,
        "outer_k": 3,
        "inner_k": 2,
        "tpe_iter": 2,
        "random_iter": 3,
        "families": ["gbm", "lgbm"],
        "regimes": ["none", "tpe", "random"],
        "metrics": ["accuracy", "f1", "auc", "log_loss"],
        "output_dir": str(root / "results"),
        "overrides": {"n_estimators": 10, "max_bins": 16},
        "datasets": [
            {"name": "alpha", "path": str(root / "alpha.csv"),
             "label_column": "target", "categorical_columns": ["color"]},
            {"name": "beta", "path": str(root / "beta.csv"),
             "label_column": "target"},
        ],
    }
    base.update(kw)
    return ExperimentConfig.from_dict(base)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    write_datasets(root)
    config = tiny_config(root)
    report = run_experiment(config)
    out = root / "results"
    written = emit_report(report, out)
    return config, report, out, written


# ---------------------------------------------------------------------------
# config plumbing


def test_config_round_trip(tmp_path):
    write_datasets(tmp_path)
    config = tiny_config(tmp_path)
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()


def test_config_validation(tmp_path):
    write_datasets(tmp_path)
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, outer_k=1)
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, families=["gbm", "sgd"])
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, regimes=["none", "exhaustive"])
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, metrics=["accuracy", "mcc"])
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, tpe_iter=0)
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, mystery_field=3)


def test_config_rejects_duplicate_dataset_names(tmp_path):
    write_datasets(tmp_path)
    spec = {"name": "alpha", "path": str(tmp_path / "alpha.csv"),
            "label_column": "target"}
    with pytest.raises(ParameterError):
        tiny_config(tmp_path, datasets=[spec, dict(spec)])


def test_dataset_spec_shorthand_reads_header(tmp_path):
    write_datasets(tmp_path)
    spec = DatasetSpec.from_dict(
        {"name": "alpha", "path": str(tmp_path / "alpha.csv"),
         "label_column": "target", "categorical_columns": ["color"]},
        base_dir=str(tmp_path))
    assert spec.schema == {"x1": "numeric", "color": "categorical",
                           "target": "label"}
    with pytest.raises(ParameterError):
        DatasetSpec.from_dict(
            {"name": "alpha", "path": str(tmp_path / "alpha.csv"),
             "label_column": "missing_col"}, base_dir=str(tmp_path))


def test_load_config_resolves_relative_paths(tmp_path):
    write_datasets(tmp_path)
    cfg_dir = tmp_path / "configs"
    cfg_dir.mkdir()
    doc = tiny_config(tmp_path).to_dict()
    for spec in doc["datasets"]:
        spec["path"] = os.path.basename(spec["path"])
    # paths relative to the config's parent directory must resolve
    p = cfg_dir / "exp.json"
    p.write_text(json.dumps(doc))
    config = load_config(p)
    assert all(os.path.exists(s.path) for s in config.datasets)


# ---------------------------------------------------------------------------
# the tiny end-to-end run


def test_fold_rows_cover_every_cell(tiny_run):
    config, report, _, _ = tiny_run
    assert not report.errors
    assert len(report.folds) == 2 * 2 * 3 * config.outer_k
    seen = {(f.dataset, f.family, f.regime, f.fold) for f in report.folds}
    assert len(seen) == len(report.folds)
    for f in report.folds:
        assert set(f.metrics) == set(config.metrics)
        assert all(math.isfinite(v) for v in f.metrics.values())
        assert 0.0 <= f.metrics["accuracy"] <= 1.0


def test_none_regime_skips_tuning(tiny_run):
    _, report, _, _ = tiny_run
    for f in report.folds:
        if f.regime == "none":
            assert f.tune_time == 0.0
            assert f.best_params == {}
        else:
            assert f.best_params


def test_trial_budgets_honest(tiny_run):
    config, report, _, _ = tiny_run
    counts = {}
    for t in report.trials:
        counts.setdefault((t.dataset, t.family, t.regime, t.fold), []).append(t)
    for (ds, fam, regime, fold), ts in counts.items():
        want = config.tpe_iter if regime == "tpe" else config.random_iter
        assert len(ts) == want
        assert sorted(t.trial for t in ts) == list(range(want))
    assert not any(t.regime == "none" for t in report.trials)


def test_outer_plans_identical_across_cells(tiny_run):
    _, report, _, _ = tiny_run
    by_ds = {}
    for f in report.folds:
        by_ds.setdefault(f.dataset, set()).add(f.plan_sha256)
    assert all(len(s) == 1 for s in by_ds.values())
    assert by_ds["alpha"] != by_ds["beta"]
    for name, text in report.foldplans.items():
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        assert {digest} == by_ds[name]


def test_report_json_round_trip(tiny_run):
    _, report, out, _ = tiny_run
    text = (out / "report.json").read_text()
    again = ExperimentReport.from_json(text)
    assert again.to_json() == report.to_json()
    assert [f.to_dict() for f in again.folds] == [f.to_dict() for f in report.folds]


def test_emitted_files_exist(tiny_run):
    _, _, out, written = tiny_run
    names = {os.path.basename(p) for p in written}
    assert set(CSV_FILES) <= names
    assert "digest.md" in names
    assert "report.json" in names
    assert (out / "foldplans" / "alpha.json").exists()
    assert (out / "foldplans" / "beta.json").exists()


def test_foldplan_files_parse_and_match(tiny_run):
    config, report, out, _ = tiny_run
    for name in ("alpha", "beta"):
        text = (out / "foldplans" / f"{name}.json").read_text()
        assert text == report.foldplans[name]
        plan = FoldPlan.from_json(text)
        assert plan.k == config.outer_k


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_summary_aggregates_fold_scores(tiny_run):
    _, report, out, _ = tiny_run
    rows = read_csv_rows(out / "summary.csv")
    assert len(rows) == 12  # 2 ds x 2 fam x 3 regimes
    row = next(r for r in rows if r["dataset"] == "alpha"
               and r["family"] == "gbm" and r["regime"] == "none")
    folds = [f for f in report.folds if (f.dataset, f.family, f.regime) ==
             ("alpha", "gbm", "none")]
    accs = [f.metrics["accuracy"] for f in folds]
    assert float(row["accuracy_mean"]) == pytest.approx(np.mean(accs), abs=1e-9)
    assert float(row["accuracy_sdev"]) == pytest.approx(
        np.std(accs, ddof=1), abs=1e-9)
    assert int(row["n_folds"]) == 3


def test_pct_diff_formula(tiny_run):
    _, _, out, _ = tiny_run
    summary = read_csv_rows(out / "summary.csv")
    diffs = read_csv_rows(out / "pct_diff.csv")
    assert len(diffs) == 32  # 2 ds x 2 fam x 2 tuned regimes x 4 metrics

    def mean_of(ds, fam, regime):
        row = next(r for r in summary if (r["dataset"], r["family"],
                                          r["regime"]) == (ds, fam, regime))
        return float(row["log_loss_mean"])

    row = next(r for r in diffs
               if (r["dataset"], r["family"], r["regime"], r["metric"]) ==
               ("beta", "lgbm", "random", "log_loss"))
    base = mean_of("beta", "lgbm", "none")
    tuned = mean_of("beta", "lgbm", "random")
    assert float(row["baseline_mean"]) == pytest.approx(base, abs=1e-9)
    assert float(row["pct_mean"]) == pytest.approx(
        100.0 * (tuned - base) / base, abs=1e-6)


def test_rank_table_shape_and_direction(tiny_run):
    _, _, out, _ = tiny_run
    rows = read_csv_rows(out / "ranks.csv")
    by_metric = {}
    for r in rows:
        by_metric.setdefault(r["metric"], []).append(r)
    assert set(by_metric) == {"accuracy", "f1", "auc", "log_loss"}
    for metric, group in by_metric.items():
        assert len(group) == 6  # fam x regime models
        ranks = [float(r["mean_rank"]) for r in group]
        assert sum(ranks) == pytest.approx(6 * 7 / 2)
        assert {r["cd"] for r in group} == {group[0]["cd"]}
        assert float(group[0]["cd"]) == pytest.approx(
            nemenyi_cd(6, 2, 0.05), abs=1e-9)


def test_pairwise_table_counts(tiny_run):
    _, _, out, _ = tiny_run
    rows = read_csv_rows(out / "pairwise.csv")
    per_metric = 6 * 5 // 2
    assert len(rows) == 4 * per_metric
    for r in rows:
        assert 0.0 < float(r["wilcoxon_p"]) <= 1.0


def test_trials_csv_matches_report(tiny_run):
    _, report, out, _ = tiny_run
    rows = read_csv_rows(out / "trials.csv")
    assert len(rows) == len(report.trials)
    assert len(rows) == 2 * 2 * 3 * (2 + 3)


def test_digest_mentions_outcomes(tiny_run):
    _, _, out, _ = tiny_run
    text = (out / "digest.md").read_text()
    assert "tiny" in text
    assert "alpha" in text and "beta" in text
    assert "accuracy" in text and "log_loss" in text
    assert "Friedman" in text


def test_rerun_is_deterministic(tiny_run, tmp_path):
    config, report, _, _ = tiny_run
    again = run_experiment(config)
    for a, b in zip(report.folds, again.folds):
        assert a.metrics == b.metrics
        assert a.best_params == b.best_params
        assert a.plan_sha256 == b.plan_sha256
    assert report.foldplans == again.foldplans


def test_emit_with_nothing_to_report(tmp_path):
    empty = ExperimentReport(config={})
    with pytest.raises(ReportError, match="nothing to report"):
        emit_report(empty, tmp_path)


def test_run_records_dataset_level_error(tmp_path):
    write_datasets(tmp_path)
    doc = tiny_config(tmp_path).to_dict()
    doc["datasets"][1]["path"] = str(tmp_path / "ghost.csv")
    doc["datasets"][1]["name"] = "beta"
    report = run_experiment(ExperimentConfig.from_dict(
        {**doc, "families": ["gbm"], "regimes": ["none"]}))
    assert any(e.fold == -1 and e.dataset == "beta" for e in report.errors)
    # the healthy dataset still produced its fold rows
    assert {f.dataset for f in report.folds} == {"alpha"}


# ---------------------------------------------------------------------------
# CLI


def cli_config(tmp_path):
    write_datasets(tmp_path)
    doc = {
        "name": "cli-mini",
        "seed": 2,
        "outer_k": 2,
        "inner_k": 2,
        "tpe_iter": 1,
        "random_iter": 2,
        "families": ["gbm"],
        "regimes": ["none", "random"],
        "metrics": ["accuracy", "log_loss"],
        "output_dir": str(tmp_path / "out"),
        "overrides": {"n_estimators": 6},
        "datasets": [{"name": "beta", "path": str(tmp_path / "beta.csv"),
                      "label_column": "target"}],
    }
    p = tmp_path / "mini.json"
    p.write_text(json.dumps(doc))
    return p


def test_cli_run_and_report(tmp_path, capsys):
    cfg = cli_config(tmp_path)
    assert cli.main(["run", str(cfg)]) == 0
    outtext = capsys.readouterr().out
    assert "fold rows: 4" in outtext
    out = tmp_path / "out"
    for name in CSV_FILES + ("digest.md", "report.json"):
        assert (out / name).exists()
    (out / "summary.csv").unlink()
    assert cli.main(["report", str(out), "--format", "csv"]) == 0
    assert (out / "summary.csv").exists()


def test_cli_run_missing_config_is_fatal(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == 2
    err = capsys.readouterr().err
    assert "errors" in err


def test_cli_run_with_cell_errors_exits_one(tmp_path, capsys):
    cfg_path = cli_config(tmp_path)
    doc = json.loads(cfg_path.read_text())
    doc["datasets"].append({"name": "ghost",
                            "path": str(tmp_path / "ghost.csv"),
                            "schema": {"u": "numeric", "target": "label"}})
    cfg_path.write_text(json.dumps(doc))
    assert cli.main(["run", str(cfg_path)]) == 1
    assert "ghost" in capsys.readouterr().err


def test_cli_cd(capsys):
    assert cli.main(["cd", "--k", "12", "--d", "12"]) == 0
    value = float(capsys.readouterr().out.strip())
    assert value == pytest.approx(4.81, abs=0.01)


def test_cli_compare(tmp_path, capsys):
    scores = tmp_path / "scores.csv"
    scores.write_text("dataset,a,b\nd1,0.9,0.8\nd2,0.7,0.6\nd3,0.85,0.8\n")
    assert cli.main(["compare", str(scores), "--test", "wilcoxon",
                     "--alternative", "greater"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"].startswith("wilcoxon")
    assert doc["p_value"] == pytest.approx(0.125, abs=1e-9)

    scores3 = tmp_path / "scores3.csv"
    scores3.write_text("dataset,a,b,c\nd1,3,2,1\nd2,3,2,1\nd3,3,2,1\nd4,3,2,1\n")
    assert cli.main(["compare", str(scores3), "--test", "friedman"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["statistic"] == pytest.approx(8.0)
