#!/usr/bin/env python3
"""Materialize the two desk-scale benchmark CSVs into data/.

- breast_cancer.csv: the scikit-learn breast-cancer diagnostic table
  (569 rows x 30 numeric features, binary target), written verbatim.
- heart.csv: a synthetic stand-in shaped like the UCI Cleveland heart
  table (303 rows x 13 features): same column names, value ranges, a
  string-valued categorical column (thal), a handful of missing cells
  in ca/thal, and a binary target of similar prevalence.  Values are
  generated from a fixed-seed risk model, not copied from the original.

Both files are committed; this script only needs re-running to change them.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

HEART_SEED = 20090101


def write_breast_cancer(path: Path) -> None:
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError as exc:
        raise SystemExit(f"scikit-learn is needed to regenerate {path}: {exc}")
    bunch = load_breast_cancer()
    names = [n.replace(" ", "_") for n in bunch.feature_names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["target"])
        for row, label in zip(bunch.data, bunch.target):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    print(f"wrote {path} ({bunch.data.shape[0]} rows x {bunch.data.shape[1]} features)")


def write_heart(path: Path) -> None:
    rng = np.random.default_rng(HEART_SEED)
    n = 303

    age = np.clip(np.rint(rng.normal(54.4, 9.0, n)), 29, 77).astype(int)
    sex = (rng.random(n) < 0.68).astype(int)
    cp = rng.choice([1, 2, 3, 4], size=n, p=[0.08, 0.17, 0.28, 0.47])
    trestbps = np.clip(np.rint(rng.normal(131.6, 17.5, n) / 2.0) * 2, 94, 200).astype(int)
    chol = np.clip(np.rint(rng.normal(246.7, 51.8, n)), 126, 564).astype(int)
    fbs = (rng.random(n) < 0.15).astype(int)
    restecg = rng.choice([0, 1, 2], size=n, p=[0.497, 0.013, 0.49])
    thalach = np.clip(np.rint(rng.normal(149.6, 22.9, n)), 71, 202).astype(int)
    exang = (rng.random(n) < 0.33).astype(int)
    oldpeak = np.clip(np.round(rng.gamma(1.2, 0.9, n), 1), 0.0, 6.2)
    slope = rng.choice([1, 2, 3], size=n, p=[0.47, 0.46, 0.07])
    ca = rng.choice([0, 1, 2, 3], size=n, p=[0.59, 0.21, 0.13, 0.07]).astype(float)
    thal_code = rng.choice([0, 1, 2], size=n, p=[0.55, 0.06, 0.39]).astype(float)
    thal_names = {0: "normal", 1: "fixed", 2: "reversible"}

    # latent risk mirrors the usual clinical signal directions
    risk = (
        0.04 * (age - 54)
        + 0.55 * sex
        + 0.50 * (cp == 4)
        + 0.012 * (trestbps - 131)
        + 0.004 * (chol - 246)
        - 0.030 * (thalach - 150)
        + 0.80 * exang
        + 0.55 * oldpeak
        + 0.45 * (slope - 1)
        + 0.75 * ca
        + 0.70 * (thal_code == 2)
        + 0.30 * (thal_code == 1)
        + rng.normal(0.0, 0.9, n)
    )
    prob = 1.0 / (1.0 + np.exp(-(risk - np.median(risk) - 0.15)))
    target = (rng.random(n) < prob).astype(int)

    # the original table has 4 unknown ca cells and 2 unknown thal cells
    ca[rng.choice(n, size=4, replace=False)] = np.nan
    thal_code[rng.choice(n, size=2, replace=False)] = np.nan

    header = ["age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
              "thalach", "exang", "oldpeak", "slope", "ca", "thal", "target"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            writer.writerow([
                age[i], sex[i], cp[i], trestbps[i], chol[i], fbs[i],
                restecg[i], thalach[i], exang[i], oldpeak[i], slope[i],
                "" if np.isnan(ca[i]) else int(ca[i]),
                "" if np.isnan(thal_code[i]) else thal_names[int(thal_code[i])],
                target[i],
            ])
    pos = int(target.sum())
    print(f"wrote {path} ({n} rows x {len(header) - 1} features, "
          f"{n - pos}/{pos} class split)")


def main() -> None:
    DATA.mkdir(exist_ok=True)
    write_breast_cancer(DATA / "breast_cancer.csv")
    write_heart(DATA / "heart.csv")


if __name__ == "__main__":
    main()
