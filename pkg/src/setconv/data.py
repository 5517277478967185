"""Datasets: CSV ingestion, stratified splitting and synthetic Gaussian data."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    EmptyInputError,
    InsufficientDataError,
    MissingFileError,
    NonNumericError,
    RaggedRowError,
    UnknownColumnError,
)
from .linalg import Rng, make_rng, standard_normal


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DimensionError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionError(
                f"{self.labels.shape[0]} labels for {self.features.shape[0]} rows"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("class ids must be non-negative")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def imbalance_ratio(self) -> float:
        counts = list(self.class_counts().values())
        return max(counts) / min(counts)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.features[index], self.labels[index], self.feature_names)


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r]
    if not rows:
        raise EmptyInputError(f"{path}: file is empty")
    return path, rows


def _parse_float(path, line, column, cell) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise NonNumericError(path, line, column, cell) from None
    if not np.isfinite(value):
        raise NonNumericError(path, line, column, cell)
    return value


def load_csv(path, label_column: str | None = "label") -> Dataset:
    """Read a header-first CSV of numeric features plus an integer label column.

    With ``label_column=None`` every column is a feature and all labels are 0;
    :func:`load_features` is the friendlier entry point for that case.
    """
    path, rows = _read_rows(path)
    header_line, header = rows[0]
    if label_column is not None and label_column not in header:
        raise UnknownColumnError(f"{path}: label column {label_column!r} not in header {header}")
    label_pos = header.index(label_column) if label_column is not None else None
    feat_pos = [i for i in range(len(header)) if i != label_pos]
    names = tuple(header[i] for i in feat_pos)
    body = rows[1:]
    if not body:
        raise EmptyInputError(f"{path}: no data rows")

    feats = np.empty((len(body), len(feat_pos)))
    labels = np.zeros(len(body), dtype=np.int64)
    for r, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise RaggedRowError(path, line, len(header), len(row))
        for j, c in enumerate(feat_pos):
            feats[r, j] = _parse_float(path, line, header[c], row[c])
        if label_pos is not None:
            cell = row[label_pos].strip()
            try:
                labels[r] = int(cell)
            except ValueError:
                raise NonNumericError(path, line, label_column, cell) from None
    return Dataset(feats, labels, names)


def load_features(path, drop_column: str | None = None) -> np.ndarray:
    """Feature matrix of a CSV with no labels (``drop_column`` is ignored if present)."""
    path, rows = _read_rows(path)
    header = rows[0][1]
    if drop_column is not None and drop_column in header:
        return load_csv(path, drop_column).features
    return load_csv(path, None).features


def _format_float(v: float) -> str:
    # repr is the shortest string that round-trips a float64 exactly
    return repr(float(v))


def write_atomic(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dataset_to_csv(ds: Dataset, label_column: str = "label") -> str:
    names = ds.feature_names or tuple(f"x{j}" for j in range(ds.d))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, label_column])
    for row, lab in zip(ds.features, ds.labels):
        w.writerow([*(_format_float(v) for v in row), int(lab)])
    return buf.getvalue()


def save_csv(ds: Dataset, path, label_column: str = "label") -> None:
    write_atomic(path, dataset_to_csv(ds, label_column))


def split(ds: Dataset, ratio: float = 0.7, rng: Rng | None = None, seed: int = 0):
    """Stratified shuffle split.

    Each class contributes ``round(ratio * n_c)`` rows to the training side,
    clamped so that both sides keep at least one row of every class.

    Returns ``(train, test, train_index, test_index)``; indices are sorted.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    if rng is None:
        rng = make_rng(seed)
    train_idx, test_idx = [], []
    for c, n_c in ds.class_counts().items():
        if n_c < 2:
            raise InsufficientDataError(f"class {c} has {n_c} sample(s); a split needs >= 2")
        members = np.flatnonzero(ds.labels == c)
        perm = members[rng.permutation(n_c)]
        n_train = min(max(int(np.floor(ratio * n_c + 0.5)), 1), n_c - 1)
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return ds.subset(tr), ds.subset(te), tr, te


@dataclass(frozen=True)
class SynthSpec:
    counts: tuple[int, ...]
    means: tuple[tuple[float, ...], ...]
    std: float | tuple[float, ...] = 1.0
    seed: int = 0

    def __post_init__(self):
        if len(self.counts) < 1 or len(self.counts) != len(self.means):
            raise ConfigError("need one mean vector per class count")
        if any(c < 2 for c in self.counts):
            raise ConfigError("every class needs at least 2 samples")
        if len({len(m) for m in self.means}) != 1 or len(self.means[0]) < 1:
            raise ConfigError("all mean vectors must share one positive dimension")
        stds = self.stds
        if len(stds) != len(self.counts) or any(not s > 0 for s in stds):
            raise ConfigError("standard deviations must be positive")

    @property
    def dim(self) -> int:
        return len(self.means[0])

    @property
    def stds(self) -> tuple[float, ...]:
        if isinstance(self.std, (int, float)):
            return (float(self.std),) * len(self.counts)
        return tuple(float(s) for s in self.std)

    @classmethod
    def separated(
        cls, counts: Sequence[int], dim: int, sep: float, std: float = 1.0, seed: int = 0
    ) -> "SynthSpec":
        """Classes whose means sit pairwise ``sep * std`` apart, centred on the origin.

        Two classes sit at ``-sep*std/2`` and ``+sep*std/2`` along the first
        axis. For ``k > 2`` classes, class ``c`` is centred at
        ``sep*std/sqrt(2) * (e_c - 1/k)``: a regular simplex, every pair of
        means exactly ``sep * std`` apart and their average at the origin.
        """
        k = len(counts)
        if k > dim and k > 2:
            raise ConfigError(f"{k} classes need dim >= {k}")
        means = np.zeros((k, dim))
        if k == 2:
            means[0, 0] = -sep * std / 2.0
            means[1, 0] = sep * std / 2.0
        elif k > 2:
            scale = sep * std / np.sqrt(2.0)
            for c in range(k):
                means[c, :k] = -scale / k
                means[c, c] += scale
        return cls(
            counts=tuple(int(c) for c in counts),
            means=tuple(tuple(float(v) for v in m) for m in means),
            std=float(std),
            seed=seed,
        )


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Isotropic Gaussian blobs with exactly the requested class counts.

    Rows are grouped by class in label order.
    """
    rng = make_rng(spec.seed)
    feats, labels = [], []
    for c, (n_c, mean, s) in enumerate(zip(spec.counts, spec.means, spec.stds)):
        feats.append(np.asarray(mean) + s * standard_normal(rng, (n_c, spec.dim)))
        labels.append(np.full(n_c, c, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labels))
