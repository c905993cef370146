"""Tabular datasets: loading, standardization, synthetic benchmarks and
order-tracked shuffling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConstantColumnError,
    InputError,
    NonFiniteError,
    NotPositiveDefiniteError,
    ParseError,
    RaggedRowsError,
    UnknownLabelColumnError,
)

LABEL_COLUMN = "class"

# Correlation structure of the moderately-high-correlation benchmark: the
# first three predictors are mutually correlated (mixed signs), the fourth is
# independent.
HIGH_CORRELATION = np.array(
    [
        [1.0, 0.8, -0.7, 0.0],
        [0.8, 1.0, -0.6, 0.0],
        [-0.7, -0.6, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


def _rng(seed):
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True, eq=False)
class TabularDataset:
    values: np.ndarray
    feature_names: list = None
    labels: np.ndarray | None = None
    class_count: int | None = None
    sample_ids: np.ndarray = None
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InputError(f"values must be a 2-D matrix, got shape {values.shape}")
        n, d = values.shape
        if n < 3:
            raise InputError(f"need at least 3 samples, got {n}")
        if d < 1:
            raise InputError("need at least one predictor column")
        object.__setattr__(self, "values", values)

        names = self.feature_names
        if names is None:
            names = [f"x{j + 1}" for j in range(d)]
        names = [str(s) for s in names]
        if len(names) != d:
            raise InputError(f"{len(names)} feature names for {d} columns")
        object.__setattr__(self, "feature_names", names)

        ids = self.sample_ids
        ids = np.arange(n) if ids is None else np.asarray(ids, dtype=np.int64)
        if ids.shape != (n,) or not np.array_equal(np.sort(ids), np.arange(n)):
            raise InputError("sample_ids must be a permutation of 0..N-1")
        object.__setattr__(self, "sample_ids", ids)

        if self.labels is None:
            object.__setattr__(self, "class_count", None)
            return
        labels = np.asarray(self.labels)
        if labels.shape != (n,) or not np.issubdtype(labels.dtype, np.integer):
            raise InputError("labels must be a length-N integer vector")
        labels = labels.astype(np.int64)
        g = self.class_count
        if g is None:
            g = int(labels.max()) + 1
        if labels.min() < 0 or labels.max() >= g:
            raise InputError(f"class ids must lie in 0..{g - 1}")
        if np.unique(labels).size != g:
            raise InputError("every class must occur at least once")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_count", int(g))

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    def fingerprint(self):
        """SHA-256 over values, labels and ordering; stable across runs."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.sample_ids, dtype="<i8").tobytes())
        if self.labels is not None:
            h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    stddevs: np.ndarray

    def apply(self, raw):
        return (np.asarray(raw, dtype=float) - self.means) / self.stddevs

    def invert(self, standardized):
        return np.asarray(standardized, dtype=float) * self.stddevs + self.means


@dataclass(frozen=True)
class SyntheticSpec:
    sample_size: int
    dim: int
    target_correlation: np.ndarray
    class_count: int = 4
    seed: int = 0

    def __post_init__(self):
        c = np.asarray(self.target_correlation, dtype=float)
        object.__setattr__(self, "target_correlation", c)
        if c.shape != (self.dim, self.dim):
            raise InputError(f"correlation matrix must be {self.dim}x{self.dim}")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise InputError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(c), 1.0, rtol=0, atol=1e-12):
            raise InputError("correlation matrix must have a unit diagonal")
        if self.sample_size < max(3, self.class_count):
            raise InputError("sample_size too small for the requested class count")
        if self.class_count < 1:
            raise InputError("class_count must be positive")

    @classmethod
    def low_correlation(cls, sample_size=1000, seed=0, dim=4, class_count=4):
        return cls(sample_size, dim, np.eye(dim), class_count, seed)

    @classmethod
    def high_correlation(cls, sample_size=1000, seed=0, class_count=4):
        return cls(sample_size, 4, HIGH_CORRELATION.copy(), class_count, seed)

    @classmethod
    def from_json(cls, path_or_text):
        """Build from a JSON document with keys sample_size, dim,
        target_correlation, class_count and seed."""
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid synthetic config: {exc}") from exc
        try:
            corr = np.asarray(doc["target_correlation"], dtype=float)
            fields = dict(
                sample_size=int(doc["sample_size"]),
                dim=int(doc.get("dim", corr.shape[0])),
                class_count=int(doc.get("class_count", 4)),
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"invalid synthetic config: {exc!r}") from exc
        return cls(target_correlation=corr, **fields)


def _check_finite(a):
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("input contains NaN or Inf")


def standardize(raw, *, feature_names=None, labels=None, class_count=None):
    """Z-score every column with the population (1/N) standard deviation.

    ``raw`` may be a plain matrix or a :class:`TabularDataset`, in which case
    its names, labels and sample ids are carried over.
    """
    sample_ids = None
    source = None
    if isinstance(raw, TabularDataset):
        feature_names = raw.feature_names if feature_names is None else feature_names
        if labels is None:
            labels, class_count = raw.labels, raw.class_count
        sample_ids, source = raw.sample_ids, raw.source
        raw = raw.values
    x = np.asarray(raw, dtype=float)
    if x.ndim != 2:
        raise InputError("expected a 2-D matrix")
    if x.shape[0] < 3:
        raise InputError(f"need at least 3 samples, got {x.shape[0]}")
    _check_finite(x)
    means = x.mean(axis=0)
    std = x.std(axis=0)
    const = np.flatnonzero(std == 0.0)
    if const.size:
        raise ConstantColumnError(f"constant column(s): {const.tolist()}")
    params = StandardizationParams(means, std)
    ds = TabularDataset(
        params.apply(x),
        feature_names,
        labels,
        class_count,
        sample_ids,
        source,
    )
    return ds, params


def cholesky_factor(target):
    try:
        return np.linalg.cholesky(np.asarray(target, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("target correlation is not positive definite") from exc


def quantile_labels(score, g):
    """Equal-count bins of ``score`` by rank; every class is non-empty."""
    n = len(score)
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(score, kind="stable")] = np.arange(n)
    return (ranks * g) // n


def generate_synthetic(spec: SyntheticSpec) -> TabularDataset:
    """Multi-Gaussian predictors with the target correlation, plus a
    categorical response from quantile bins of the first predictor.

    The returned predictors are standardized.
    """
    chol = cholesky_factor(spec.target_correlation)
    rng = _rng(spec.seed)
    white = rng.standard_normal((spec.sample_size, spec.dim))
    x = white @ chol.T
    labels = quantile_labels(x[:, 0], spec.class_count)
    ds, _ = standardize(x, labels=labels, class_count=spec.class_count)
    return ds


def load_csv(path, label_column=LABEL_COLUMN, require_labels=False) -> TabularDataset:
    """Read a header-first CSV of reals. A column named ``label_column`` (if
    present) holds integer class ids, remapped to 0..g-1 in sorted order.

    Values are returned as read; call :func:`standardize` before training.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise RaggedRowsError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}"
            )
    if label_column in header:
        label_idx = header.index(label_column)
    elif require_labels or label_column != LABEL_COLUMN:
        raise UnknownLabelColumnError(f"no column named {label_column!r} in {path}")
    else:
        label_idx = None

    cols = [j for j in range(len(header)) if j != label_idx]
    try:
        values = np.array([[float(r[j]) for j in cols] for r in body], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric predictor value ({exc})") from exc
    if values.size == 0:
        raise ParseError(f"{path} has no data rows")
    _check_finite(values)

    labels = None
    g = None
    if label_idx is not None:
        try:
            raw_labels = np.array([int(r[label_idx]) for r in body], dtype=np.int64)
        except ValueError as exc:
            raise ParseError(f"{path}: class column must hold integers ({exc})") from exc
        classes, labels = np.unique(raw_labels, return_inverse=True)
        g = classes.size
    return TabularDataset(
        values,
        [header[j] for j in cols],
        labels,
        g,
        source=str(path),
    )


def write_csv(ds: TabularDataset, path):
    """Inverse of :func:`load_csv` (labels written as 0..g-1)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(ds.feature_names)
        if ds.labels is not None:
            header.append(LABEL_COLUMN)
        w.writerow(header)
        for i in range(ds.n_samples):
            row = [repr(float(v)) for v in ds.values[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def shuffle_tracked(ds: TabularDataset, seed):
    """Return the row-shuffled dataset and the permutation used, such that
    ``shuffled.values[r] == ds.values[perm[r]]``."""
    perm = _rng(seed).permutation(ds.n_samples)
    shuffled = replace(
        ds,
        values=ds.values[perm],
        labels=None if ds.labels is None else ds.labels[perm],
        sample_ids=ds.sample_ids[perm],
    )
    return shuffled, perm


def restore_order(matrix, perm):
    """Undo :func:`shuffle_tracked` on any row-aligned matrix."""
    matrix = np.asarray(matrix)
    perm = np.asarray(perm)
    if matrix.shape[0] != perm.shape[0]:
        raise InputError("permutation length does not match row count")
    out = np.empty_like(matrix)
    out[perm] = matrix
    return out
