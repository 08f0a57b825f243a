"""Dataset loading, preprocessing, and deterministic stratified splitting.

The pipeline is: load a CSV with a header row, encode categorical feature
columns as integers, binarize the label column, then z-score every feature
with the sample (n-1) standard deviation. Splits are reproducible functions
of their seeds; no global random state is consulted anywhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .validation import check_binary_labels, check_features

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Raised for malformed input data or invalid preprocessing requests."""


@dataclass
class Column:
    name: str
    kind: str  # NUMERIC or CATEGORICAL


@dataclass
class RawDataset:
    """A loaded table before numeric encoding.

    ``rows`` hold one list per data row, ordered like ``columns``. Feature
    values are floats for numeric columns and strings for categorical ones;
    the label column keeps its original string values until binarization.
    """

    columns: list[Column]
    rows: list[list]
    label_column: str
    name: str = "dataset"

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise DataError(f"no column named {name!r}")


@dataclass
class Dataset:
    """Numeric, standardized, binary-labeled data ready for training."""

    name: str
    features: np.ndarray  # (n, d) float64, z-scored
    labels: np.ndarray  # (n,) int64 in {0, 1}
    feature_means: np.ndarray
    feature_sds: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class SplitPlan:
    """Deterministic outer 2-subset split plus inner k-fold assignment.

    ``subset_of[i]`` is 1 or 2; ``fold_of[i]`` is the inner fold (1..k) of
    row i within its own subset. Outer membership depends only on ``seed``;
    fold membership only on ``fold_seed``, so two plans can share subsets
    while refolding differently.
    """

    subset_of: np.ndarray
    fold_of: np.ndarray
    k_inner: int
    seed: int
    fold_seed: int

    def subset_rows(self, subset: int) -> np.ndarray:
        return np.flatnonzero(self.subset_of == subset)

    def other_subset(self, subset: int) -> int:
        return 2 if subset == 1 else 1


def _parse_float(token: str) -> float | None:
    try:
        return float(token)
    except ValueError:
        return None


def load_csv(path, label_column: str, categorical_columns: list[str] | None = None,
             name: str | None = None) -> RawDataset:
    """Read a CSV file with a header row into a RawDataset.

    A column is numeric when every value parses as a float and it is not
    listed in ``categorical_columns``. Empty fields are treated as missing
    values and rejected with the offending data row index (1-based, header
    excluded).
    """
    categorical_columns = list(categorical_columns or [])
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV: missing header row") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError("duplicate column names in header")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        for cname in categorical_columns:
            if cname not in header:
                raise DataError(f"categorical column {cname!r} not in header")
        raw_rows: list[list[str]] = []
        for row_number, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(
                    f"row {row_number}: expected {len(header)} fields, got {len(row)}")
            cells = [c.strip() for c in row]
            for cname, cell in zip(header, cells):
                if cell == "":
                    raise DataError(f"row {row_number}: missing value in column {cname!r}")
            raw_rows.append(cells)
    if not raw_rows:
        raise DataError("CSV has a header but no data rows")

    columns: list[Column] = []
    for j, cname in enumerate(header):
        if cname == label_column:
            columns.append(Column(cname, CATEGORICAL))
            continue
        forced = cname in categorical_columns
        numeric = not forced and all(_parse_float(r[j]) is not None for r in raw_rows)
        columns.append(Column(cname, NUMERIC if numeric else CATEGORICAL))

    rows: list[list] = []
    for cells in raw_rows:
        parsed: list = []
        for j, col in enumerate(columns):
            if col.kind == NUMERIC:
                parsed.append(_parse_float(cells[j]))
            else:
                parsed.append(cells[j])
        rows.append(parsed)
    return RawDataset(columns=columns, rows=rows, label_column=label_column,
                      name=name if name is not None else str(path))


def write_csv(raw: RawDataset, path) -> None:
    """Write a RawDataset back to CSV (inverse of load_csv for clean tables)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in raw.columns])
        for row in raw.rows:
            writer.writerow(row)


def encode_categoricals(raw: RawDataset) -> RawDataset:
    """Replace categorical feature values with integer codes.

    Codes are assigned by order of first appearance (0, 1, 2, ...), which
    makes the encoding a pure function of row order. The label column is
    left untouched.
    """
    label_idx = raw.column_index(raw.label_column)
    new_rows = [list(r) for r in raw.rows]
    new_cols = [Column(c.name, c.kind) for c in raw.columns]
    for j, col in enumerate(raw.columns):
        if j == label_idx or col.kind != CATEGORICAL:
            continue
        codes: dict[str, int] = {}
        for row in new_rows:
            value = row[j]
            if value not in codes:
                codes[value] = len(codes)
            row[j] = float(codes[value])
        new_cols[j] = Column(col.name, NUMERIC)
    return RawDataset(columns=new_cols, rows=new_rows,
                      label_column=raw.label_column, name=raw.name)


def binarize_labels(raw: RawDataset) -> RawDataset:
    """Map original label values onto {0, 1}.

    Distinct labels are ordered by descending frequency, ties broken by
    ascending label value, then assigned alternately to class 0 and class 1.
    For a two-class problem this makes the most frequent label class 0; for
    more classes it balances the two groups.
    """
    label_idx = raw.column_index(raw.label_column)
    counts: dict = {}
    for row in raw.rows:
        counts[row[label_idx]] = counts.get(row[label_idx], 0) + 1

    def sort_key(value):
        # Numeric-looking labels compare numerically so "10" sorts after "2".
        num = _parse_float(str(value))
        if num is not None:
            return (0, num, "")
        return (1, 0.0, str(value))

    ordered = sorted(counts, key=lambda v: (-counts[v],) + sort_key(v))
    if len(ordered) < 2:
        raise DataError("label column has a single distinct value")
    mapping = {value: i % 2 for i, value in enumerate(ordered)}
    new_rows = []
    for row in raw.rows:
        row = list(row)
        row[label_idx] = mapping[row[label_idx]]
        new_rows.append(row)
    new_cols = [Column(c.name, c.kind) for c in raw.columns]
    new_cols[label_idx] = Column(raw.label_column, NUMERIC)
    return RawDataset(columns=new_cols, rows=new_rows,
                      label_column=raw.label_column, name=raw.name)


def standardize(raw: RawDataset) -> Dataset:
    """Z-score all feature columns of an all-numeric RawDataset.

    Uses the sample standard deviation (n-1 denominator). Constant columns
    become all zeros and their recorded sd is 1, so the transform is always
    invertible from the recorded means and sds.
    """
    label_idx = raw.column_index(raw.label_column)
    for col in raw.columns:
        if col.kind != NUMERIC:
            raise DataError(f"column {col.name!r} is not numeric; encode it first")
    matrix = np.asarray([[float(v) for v in row] for row in raw.rows], dtype=np.float64)
    labels = matrix[:, label_idx].astype(np.int64)
    feature_idx = [j for j in range(matrix.shape[1]) if j != label_idx]
    features = matrix[:, feature_idx]
    features = check_features(features, name="features")
    labels = check_binary_labels(labels, features.shape[0], name="labels")

    means = features.mean(axis=0)
    if features.shape[0] > 1:
        sds = features.std(axis=0, ddof=1)
    else:
        sds = np.zeros(features.shape[1])
    sds = np.where(sds == 0.0, 1.0, sds)
    standardized = (features - means) / sds
    return Dataset(name=raw.name, features=standardized, labels=labels,
                   feature_means=means, feature_sds=sds)


def prepare_dataset(raw: RawDataset) -> Dataset:
    """Full preprocessing pipeline: encode, binarize, standardize."""
    return standardize(binarize_labels(encode_categoricals(raw)))


def dataset_from_arrays(name: str, features, labels) -> Dataset:
    """Standardize an in-memory (features, 0/1 labels) pair into a Dataset."""
    features = check_features(features)
    labels = check_binary_labels(labels, features.shape[0])
    means = features.mean(axis=0)
    sds = features.std(axis=0, ddof=1) if features.shape[0] > 1 else np.zeros(features.shape[1])
    sds = np.where(sds == 0.0, 1.0, sds)
    return Dataset(name=name, features=(features - means) / sds, labels=labels,
                   feature_means=means, feature_sds=sds)


def make_split_plan(ds: Dataset, k_inner: int, seed: int,
                    fold_seed: int | None = None) -> SplitPlan:
    """Assign rows to 2 stratified outer subsets and k stratified inner folds.

    Within each class, indices are shuffled with the seed and dealt
    round-robin; the deal pointer continues across classes so subset and
    fold sizes stay within one row of each other overall, not just per class.
    """
    if k_inner < 2:
        raise DataError(f"k_inner must be at least 2, got {k_inner}")
    if fold_seed is None:
        fold_seed = seed
    labels = ds.labels
    for cls in (0, 1):
        count = int((labels == cls).sum())
        if count < 2 * k_inner:
            raise DataError(
                f"insufficient class count for stratification: class {cls} has "
                f"{count} rows, needs at least {2 * k_inner}")

    n = ds.n_rows
    subset_of = np.zeros(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    pointer = 0
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        perm = rng.permutation(idx)
        for row in perm:
            subset_of[row] = 1 + (pointer % 2)
            pointer += 1

    fold_of = np.zeros(n, dtype=np.int64)
    fold_rng = np.random.default_rng(fold_seed)
    for subset in (1, 2):
        pointer = 0
        for cls in (0, 1):
            idx = np.flatnonzero((subset_of == subset) & (labels == cls))
            perm = fold_rng.permutation(idx)
            for row in perm:
                fold_of[row] = 1 + (pointer % k_inner)
                pointer += 1
    return SplitPlan(subset_of=subset_of, fold_of=fold_of, k_inner=k_inner,
                     seed=seed, fold_seed=fold_seed)


def fold_assignment(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Stratified k-fold ids (1..k) for a standalone row set."""
    labels = np.asarray(labels)
    fold_of = np.zeros(labels.shape[0], dtype=np.int64)
    rng = np.random.default_rng(seed)
    pointer = 0
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise DataError(
                f"insufficient class count for stratification: class {cls} has "
                f"{idx.size} rows for {k} folds")
        perm = rng.permutation(idx)
        for row in perm:
            fold_of[row] = 1 + (pointer % k)
            pointer += 1
    return fold_of


def make_blobs(n: int, d: int = 2, separation: float = 4.0, seed: int = 0,
               name: str = "blobs") -> RawDataset:
    """Two spherical Gaussian classes with centers ``separation`` apart.

    Class-conditional sds are 1 in every coordinate, so the Bayes error of
    the pair is Phi(-separation / 2). Labels are strings to exercise the
    binarization step.
    """
    rng = np.random.default_rng(seed)
    n_a = n - n // 2
    offset = separation / 2.0
    points = rng.standard_normal((n, d))
    points[:n_a, 0] -= offset
    points[n_a:, 0] += offset
    order = rng.permutation(n)
    columns = [Column(f"x{j}", NUMERIC) for j in range(d)] + [Column("label", CATEGORICAL)]
    rows = []
    for i in order:
        label = "a" if i < n_a else "b"
        rows.append([float(v) for v in points[i]] + [label])
    return RawDataset(columns=columns, rows=rows, label_column="label", name=name)
