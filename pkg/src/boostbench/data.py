"""Dataset ingestion, categorical and text encoding, and stratified fold
planning.

Column conventions:

- dense columns store float64 values with NaN as the missing marker;
- sparse columns store strictly increasing row indices plus explicit values,
  and every unstored entry is an implicit 0.0 (which is NOT missing);
- raw categorical columns store integer token codes (NaN for a missing cell)
  together with the token list, and must be encoded before model fitting;
- raw text columns store the documents themselves and must be vectorized.
"""

from __future__ import annotations

import csv
import json
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestionError, ParameterError, SchemaError, VectorizationError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
CATEGORICAL_ENCODED = "categorical-encoded"
TEXT = "text"
TEXT_DERIVED = "text-derived"

_FEATURE_KINDS = (NUMERIC, CATEGORICAL, CATEGORICAL_ENCODED, TEXT, TEXT_DERIVED)
_ENGINE_KINDS = (NUMERIC, CATEGORICAL_ENCODED, TEXT_DERIVED)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass
class FeatureColumn:
    """One feature column: dense values, sparse pairs, or raw text."""

    name: str
    kind: str
    values: np.ndarray | None = None
    sparse_indices: np.ndarray | None = None
    sparse_values: np.ndarray | None = None
    categories: tuple[str, ...] | None = None
    documents: list[str] | None = None

    def __post_init__(self):
        if self.kind not in _FEATURE_KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        storage = [
            self.values is not None,
            self.sparse_indices is not None,
            self.documents is not None,
        ]
        if sum(storage) != 1:
            raise SchemaError(
                f"column {self.name!r} must be exactly one of dense, sparse, or text"
            )
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=np.float64)
        if self.sparse_indices is not None:
            self.sparse_indices = np.asarray(self.sparse_indices, dtype=np.int64)
            self.sparse_values = np.asarray(self.sparse_values, dtype=np.float64)
            if self.sparse_values.shape != self.sparse_indices.shape:
                raise SchemaError(f"column {self.name!r}: sparse index/value length mismatch")
            if self.sparse_indices.size > 1 and np.any(np.diff(self.sparse_indices) <= 0):
                raise SchemaError(
                    f"column {self.name!r}: sparse indices must be strictly increasing"
                )

    @property
    def is_sparse(self) -> bool:
        return self.sparse_indices is not None

    def length(self) -> int | None:
        """Logical entry count when determinable from storage alone."""
        if self.values is not None:
            return int(self.values.shape[0])
        if self.documents is not None:
            return len(self.documents)
        return None

    def take(self, rows: np.ndarray) -> "FeatureColumn":
        rows = np.asarray(rows, dtype=np.int64)
        if self.values is not None:
            return FeatureColumn(self.name, self.kind, values=self.values[rows],
                                 categories=self.categories)
        if self.documents is not None:
            return FeatureColumn(self.name, self.kind,
                                 documents=[self.documents[int(r)] for r in rows])
        # sparse: map old row indices to new positions
        lookup = {int(r): p for p, r in enumerate(rows)}
        pairs = [
            (lookup[int(i)], v)
            for i, v in zip(self.sparse_indices, self.sparse_values)
            if int(i) in lookup
        ]
        pairs.sort()
        idx = np.array([p for p, _ in pairs], dtype=np.int64)
        val = np.array([v for _, v in pairs], dtype=np.float64)
        return FeatureColumn(self.name, self.kind, sparse_indices=idx, sparse_values=val)


@dataclass
class Dataset:
    """Column-oriented feature matrix with integer class labels."""

    columns: list[FeatureColumn]
    labels: np.ndarray
    n_rows: int = -1
    label_names: tuple[str, ...] = ()
    name: str = ""
    _check_classes: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise SchemaError("labels must be a 1-D vector")
        if self.n_rows < 0:
            self.n_rows = int(self.labels.shape[0])
        if self.labels.shape[0] != self.n_rows:
            raise SchemaError("labels length differs from n_rows")
        if not self.label_names:
            self.label_names = tuple(str(c) for c in range(int(self.labels.max()) + 1))
        if self._check_classes:
            present = np.unique(self.labels)
            expected = np.arange(len(self.label_names))
            if len(self.label_names) < 2:
                raise IngestionError("fewer than 2 classes")
            if not np.array_equal(present, expected):
                raise SchemaError(
                    "labels must contain every class id "
                    f"0..{len(self.label_names) - 1} at least once"
                )
        names = set()
        for col in self.columns:
            if col.name in names:
                raise SchemaError(f"duplicate column name {col.name!r}")
            names.add(col.name)
            n = col.length()
            if n is not None and n != self.n_rows:
                raise SchemaError(f"column {col.name!r} has {n} entries, expected {self.n_rows}")
            if col.is_sparse and col.sparse_indices.size:
                if int(col.sparse_indices[-1]) >= self.n_rows:
                    raise SchemaError(f"column {col.name!r}: sparse index out of range")

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def column(self, name: str) -> FeatureColumn:
        for col in self.columns:
            if col.name == name:
                return col
        raise SchemaError(f"no column named {name!r}")

    def replace_column(self, name: str, new: FeatureColumn) -> "Dataset":
        cols = [new if c.name == name else c for c in self.columns]
        if all(c is not new for c in cols):
            raise SchemaError(f"no column named {name!r}")
        return Dataset(cols, self.labels, self.n_rows, self.label_names, self.name,
                       _check_classes=False)

    def subset(self, rows) -> "Dataset":
        """Row subset; class ids are preserved even if a class drops out."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            [c.take(rows) for c in self.columns],
            self.labels[rows],
            int(rows.shape[0]),
            self.label_names,
            self.name,
            _check_classes=False,
        )

    def schema(self) -> list[tuple[str, str]]:
        return [(c.name, c.kind) for c in self.columns]


def to_matrices(dataset: Dataset, sparsity_aware: bool) -> tuple[np.ndarray, np.ndarray]:
    """Materialize engine-facing (values, absent) matrices, both (F, n).

    With sparsity_aware on, missing cells and implicit sparse zeros are
    "absent" and routed by learned default directions; with it off, both are
    literal 0.0 values.
    """
    n = dataset.n_rows
    f = dataset.n_features
    values = np.zeros((f, n), dtype=np.float64)
    absent = np.zeros((f, n), dtype=bool)
    for j, col in enumerate(dataset.columns):
        if col.kind not in _ENGINE_KINDS:
            raise SchemaError(
                f"column {col.name!r} has kind {col.kind!r}; encode or vectorize it "
                "before fitting"
            )
        if col.is_sparse:
            if sparsity_aware:
                absent[j, :] = True
                absent[j, col.sparse_indices] = False
            values[j, col.sparse_indices] = col.sparse_values
        else:
            miss = np.isnan(col.values)
            values[j, :] = np.where(miss, 0.0, col.values)
            if sparsity_aware:
                absent[j, :] = miss
    return values, absent


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(path, schema: dict[str, str], name: str = "") -> Dataset:
    """Load a header-row CSV.

    ``schema`` maps column names to kinds: 'numeric', 'categorical', 'text',
    or 'label' (exactly one).  File columns absent from the schema are
    ignored.  Empty cells in feature columns become missing markers.
    """
    labels_decl = [c for c, k in schema.items() if k == "label"]
    if len(labels_decl) != 1:
        raise SchemaError("schema must declare exactly one 'label' column")
    label_col = labels_decl[0]
    for col_name, kind in schema.items():
        if kind not in (NUMERIC, CATEGORICAL, TEXT, "label"):
            raise SchemaError(f"unknown declared kind {kind!r} for column {col_name!r}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing_cols = sorted(set(schema) - set(header))
        if missing_cols:
            raise SchemaError(f"declared columns not in file: {missing_cols}")
        pos = {h: i for i, h in enumerate(header)}
        raw: dict[str, list] = {c: [] for c in schema}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}:{lineno}: expected {len(header)} cells")
            for col_name in schema:
                raw[col_name].append(row[pos[col_name]].strip())

    n = len(raw[label_col])
    if n == 0:
        raise IngestionError(f"{path}: no data rows")

    raw_labels = raw[label_col]
    if any(cell == "" for cell in raw_labels):
        bad = raw_labels.index("")
        raise IngestionError(f"{path}: empty label cell at data row {bad + 1}")
    label_names = tuple(sorted(set(raw_labels)))
    if len(label_names) < 2:
        raise IngestionError("fewer than 2 classes")
    label_id = {v: i for i, v in enumerate(label_names)}
    labels = np.array([label_id[v] for v in raw_labels], dtype=np.int64)

    columns = []
    for col_name, kind in schema.items():
        if kind == "label":
            continue
        cells = raw[col_name]
        if kind == NUMERIC:
            out = np.empty(n, dtype=np.float64)
            for i, cell in enumerate(cells):
                if cell == "":
                    out[i] = np.nan
                    continue
                try:
                    out[i] = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: unparseable numeric cell at data row {i + 1}, "
                        f"column {col_name!r}: {cell!r}"
                    ) from None
            columns.append(FeatureColumn(col_name, NUMERIC, values=out))
        elif kind == CATEGORICAL:
            tokens = tuple(sorted({c for c in cells if c != ""}))
            code = {t: float(i) for i, t in enumerate(tokens)}
            out = np.array([code[c] if c != "" else np.nan for c in cells])
            columns.append(FeatureColumn(col_name, CATEGORICAL, values=out, categories=tokens))
        elif kind == TEXT:
            columns.append(FeatureColumn(col_name, TEXT, documents=list(cells)))
    return Dataset(columns, labels, n, label_names, name or str(path))


# ---------------------------------------------------------------------------
# Fold planning


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignment for one dataset."""

    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        assignments = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", assignments)
        if self.k < 2:
            raise ParameterError(f"fold count must be >= 2, got {self.k}")
        present = np.unique(assignments)
        if not np.array_equal(present, np.arange(self.k)):
            raise ParameterError("every fold id 0..k-1 must be assigned at least once")

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def to_json(self) -> str:
        doc = {"k": self.k, "seed": int(self.seed),
               "assignments": [int(a) for a in self.assignments]}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "FoldPlan":
        doc = json.loads(text)
        return FoldPlan(int(doc["k"]), np.array(doc["assignments"], dtype=np.int64),
                        int(doc["seed"]))


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Per class, shuffle rows by seed and deal round-robin to folds.

    Dealing continues across classes (class boundaries do not reset the next
    fold slot), so overall fold sizes also differ by at most one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if k < 2:
        raise ParameterError(f"fold count must be >= 2, got {k}")
    if k > n:
        raise ParameterError(f"fold count {k} exceeds row count {n}")
    classes, counts = np.unique(labels, return_counts=True)
    if int(counts.min()) < k:
        warnings.warn(
            f"stratified_kfold: a class has fewer than k={k} members; "
            "some folds will lack it",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    assignments = np.full(n, -1, dtype=np.int64)
    dealt = 0
    for c in classes:
        rows = np.flatnonzero(labels == c)
        rows = rows[rng.permutation(rows.shape[0])]
        for offset, row in enumerate(rows):
            assignments[row] = (dealt + offset) % k
        dealt += rows.shape[0]
    return FoldPlan(k, assignments, int(seed))


# ---------------------------------------------------------------------------
# Ordered target-statistics categorical encoding


class OrderedTargetEncoder:
    """Leakage-resistant categorical encoder.

    Training rows are encoded with running statistics over the rows that
    precede them in a seeded random permutation; evaluation rows are encoded
    with statistics over all training rows.
    """

    def __init__(self, prior_weight: float = 1.0, positive_class: int | None = None):
        if prior_weight <= 0.0:
            raise ParameterError(f"prior_weight must be > 0, got {prior_weight}")
        self.prior_weight = float(prior_weight)
        self.positive_class = positive_class
        self._stats: dict[str, tuple[float, int]] | None = None
        self._prior: float | None = None

    def _targets(self, labels: np.ndarray, n_classes: int) -> np.ndarray:
        if n_classes <= 2:
            return (labels == 1).astype(np.float64)
        pos = self.positive_class if self.positive_class is not None else n_classes - 1
        return (labels == pos).astype(np.float64)

    @staticmethod
    def _keys(column: FeatureColumn) -> list[str]:
        if column.kind != CATEGORICAL or column.values is None:
            raise SchemaError(f"column {column.name!r} is not a raw categorical column")
        keys = []
        for code in column.values:
            if math.isnan(code):
                keys.append("\x00missing")
            else:
                keys.append(column.categories[int(code)])
        return keys

    def fit_transform(self, column: FeatureColumn, labels, n_classes: int,
                      seed: int) -> FeatureColumn:
        labels = np.asarray(labels, dtype=np.int64)
        t = self._targets(labels, n_classes)
        keys = self._keys(column)
        n = len(keys)
        prior = float(t.mean())
        a = self.prior_weight
        perm = np.random.default_rng(seed).permutation(n)
        running: dict[str, tuple[float, int]] = {}
        encoded = np.empty(n, dtype=np.float64)
        for row in perm:
            key = keys[row]
            s, c = running.get(key, (0.0, 0))
            encoded[row] = (s + a * prior) / (c + a)
            running[key] = (s + float(t[row]), c + 1)
        self._stats = running
        self._prior = prior
        return FeatureColumn(column.name, CATEGORICAL_ENCODED, values=encoded)

    def transform(self, column: FeatureColumn) -> FeatureColumn:
        if self._stats is None:
            raise ParameterError("encoder not fitted")
        keys = self._keys(column)
        a = self.prior_weight
        encoded = np.empty(len(keys), dtype=np.float64)
        for i, key in enumerate(keys):
            s, c = self._stats.get(key, (0.0, 0))
            encoded[i] = (s + a * self._prior) / (c + a)
        return FeatureColumn(column.name, CATEGORICAL_ENCODED, values=encoded)


def ordered_target_encode(dataset: Dataset, column: str, prior_weight: float,
                          seed: int) -> FeatureColumn:
    """Encode one categorical column of ``dataset`` with ordered target
    statistics (multiclass targets the indicator of the last class)."""
    encoder = OrderedTargetEncoder(prior_weight)
    return encoder.fit_transform(dataset.column(column), dataset.labels,
                                 dataset.n_classes, seed)


# ---------------------------------------------------------------------------
# TF-IDF


class TfidfVectorizer:
    """Bag-of-words TF-IDF with smooth idf and L2 row normalization.

    Tokens are lowercase maximal alphanumeric runs.  The vocabulary keeps the
    ``vocab_size`` tokens of highest document frequency (ties lexicographic).
    """

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ParameterError(f"vocab_size must be >= 1, got {vocab_size}")
        self.vocab_size = int(vocab_size)
        self.vocabulary: tuple[str, ...] | None = None
        self.idf: np.ndarray | None = None

    @staticmethod
    def _tokenize(doc: str) -> list[str]:
        return _TOKEN_RE.findall(doc.lower())

    def fit(self, documents: list[str]) -> "TfidfVectorizer":
        if not documents:
            raise VectorizationError("no documents")
        df: dict[str, int] = {}
        any_token = False
        for doc in documents:
            toks = set(self._tokenize(doc))
            if toks:
                any_token = True
            for tok in toks:
                df[tok] = df.get(tok, 0) + 1
        if not any_token:
            raise VectorizationError("all documents empty")
        ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
        self.vocabulary = tuple(tok for tok, _ in ranked[: self.vocab_size])
        n = len(documents)
        self.idf = np.array(
            [math.log((1.0 + n) / (1.0 + df[tok])) + 1.0 for tok in self.vocabulary]
        )
        return self

    def transform(self, documents: list[str], prefix: str = "tfidf") -> list[FeatureColumn]:
        if self.vocabulary is None:
            raise ParameterError("vectorizer not fitted")
        index = {tok: j for j, tok in enumerate(self.vocabulary)}
        per_term: list[list[tuple[int, float]]] = [[] for _ in self.vocabulary]
        for i, doc in enumerate(documents):
            counts: dict[int, int] = {}
            for tok in self._tokenize(doc):
                j = index.get(tok)
                if j is not None:
                    counts[j] = counts.get(j, 0) + 1
            if not counts:
                continue
            weights = {j: c * self.idf[j] for j, c in counts.items()}
            norm = math.sqrt(sum(w * w for w in weights.values()))
            for j, w in weights.items():
                per_term[j].append((i, w / norm))
        columns = []
        for j, tok in enumerate(self.vocabulary):
            pairs = per_term[j]
            idx = np.array([i for i, _ in pairs], dtype=np.int64)
            val = np.array([w for _, w in pairs], dtype=np.float64)
            columns.append(
                FeatureColumn(f"{prefix}:{tok}", TEXT_DERIVED,
                              sparse_indices=idx, sparse_values=val)
            )
        return columns


def tfidf_vectorize(documents: list[str], vocab_size: int) -> list[FeatureColumn]:
    """Fit-and-transform TF-IDF over ``documents``; returns sparse columns."""
    vec = TfidfVectorizer(vocab_size)
    return vec.fit(documents).transform(documents)
