"""Telemetry schema, CSV ingestion, synthetic generation and train/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._io import atomic_write
from .errors import BadParameter, BadValue, EmptyDataset, MissingColumn, SchemaMismatch

FEATURE_NAMES = (
    "cpu_usage",
    "memory_usage",
    "disk_io",
    "network_latency",
    "power_consumption",
    "temperature",
    "process_count",
    "response_time",
)
LABEL_COLUMN = "health_status"
HEALTHY, ABNORMAL = 1, 0

# Legal (low, high) range per canonical feature, both ends inclusive.
FEATURE_RANGES = {
    "cpu_usage": (0.0, 1.0),
    "memory_usage": (0.0, 1.0),
    "disk_io": (0.0, math.inf),
    "network_latency": (0.0, math.inf),
    "power_consumption": (0.0, math.inf),
    "temperature": (-20.0, 150.0),
    "process_count": (0.0, math.inf),
    "response_time": (0.0, math.inf),
}

# Nominal (mean, std) of healthy nodes.
NOMINAL = {
    "cpu_usage": (0.45, 0.15),
    "memory_usage": (0.50, 0.15),
    "disk_io": (80.0, 25.0),
    "network_latency": (20.0, 8.0),
    "power_consumption": (120.0, 20.0),
    "temperature": (55.0, 8.0),
    "process_count": (120.0, 30.0),
    "response_time": (150.0, 40.0),
}

# Anomaly signatures: each maps feature -> shift in units of that feature's std.
SIGNATURES = (
    {"response_time": 3.0},
    {"power_consumption": 3.0},
    {"disk_io": 3.0},
    {"network_latency": 3.0, "cpu_usage": -2.0},
    {"temperature": 3.0},
)


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple = FEATURE_NAMES

    def __post_init__(self):
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise BadParameter(f"duplicate feature names in schema: {names}")
        if not names:
            raise BadParameter("schema needs at least one feature")
        object.__setattr__(self, "names", names)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaMismatch(f"unknown feature {name!r}") from None

    @property
    def is_canonical(self) -> bool:
        return self.names == FEATURE_NAMES


CANONICAL_SCHEMA = FeatureSchema()


@dataclass(frozen=True)
class TelemetrySample:
    """One node observation: feature vector plus optional health label."""

    features: tuple
    label: Optional[int] = None
    schema: FeatureSchema = field(default=CANONICAL_SCHEMA, compare=False, repr=False)

    def __post_init__(self):
        feats = tuple(float(v) for v in self.features)
        if len(feats) != len(self.schema):
            raise SchemaMismatch(f"sample has {len(feats)} features, schema has {len(self.schema)}")
        check_row(feats, self.schema)
        if self.label is not None and self.label not in (0, 1):
            raise BadValue(0, LABEL_COLUMN, f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "features", feats)


def check_row(values, schema: FeatureSchema, row: int = 0) -> None:
    """Raise BadValue if a feature vector holds non-finite or out-of-range entries.

    Range limits apply only to the canonical telemetry schema.
    """
    canonical = schema.is_canonical
    for name, v in zip(schema.names, values):
        if not math.isfinite(v):
            raise BadValue(row, name, f"non-finite value {v!r}")
        if canonical:
            lo, hi = FEATURE_RANGES[name]
            if not lo <= v <= hi:
                raise BadValue(row, name, f"{v!r} outside [{lo}, {hi}]")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable, ordered table of samples sharing one schema.

    ``X`` has shape (n_samples, n_features); ``y`` is an int array of 0/1
    labels or None for unlabeled data. Both arrays are made read-only.
    """

    X: np.ndarray
    y: Optional[np.ndarray] = None
    schema: FeatureSchema = field(default=CANONICAL_SCHEMA)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise SchemaMismatch(
                f"feature matrix shape {X.shape} does not match schema of {len(self.schema)} features"
            )
        if not np.isfinite(X).all():
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise BadValue(int(r) + 1, self.schema.names[c], "non-finite value")
        if self.schema.is_canonical:
            lo = np.array([FEATURE_RANGES[n][0] for n in FEATURE_NAMES])
            hi = np.array([FEATURE_RANGES[n][1] for n in FEATURE_NAMES])
            bad = (X < lo) | (X > hi)
            if bad.any():
                r, c = np.argwhere(bad)[0]
                raise BadValue(int(r) + 1, FEATURE_NAMES[c], f"{X[r, c]!r} outside [{lo[c]}, {hi[c]}]")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.array(self.y, dtype=np.int64, copy=True)
            if y.shape != (X.shape[0],):
                raise SchemaMismatch(f"label vector shape {y.shape} does not match {X.shape[0]} samples")
            if not np.isin(y, (0, 1)).all():
                raise BadValue(int(np.flatnonzero(~np.isin(y, (0, 1)))[0]), LABEL_COLUMN, "label not in {0,1}")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    def __len__(self):
        return self.X.shape[0]

    @property
    def labeled(self) -> bool:
        return self.y is not None

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def sample(self, i: int) -> TelemetrySample:
        label = None if self.y is None else int(self.y[i])
        return TelemetrySample(tuple(self.X[i]), label, self.schema)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.X[idx], None if self.y is None else self.y[idx], self.schema)

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema or not np.array_equal(self.X, other.X):
            return False
        if self.y is None or other.y is None:
            return self.y is None and other.y is None
        return np.array_equal(self.y, other.y)


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise BadValue(row, column, f"not a number: {text!r}") from None


def load_csv(path) -> Dataset:
    """Load a telemetry CSV, matching columns by header name.

    All eight canonical feature columns are required; ``health_status`` is
    optional. Row numbers in errors are 1-based data rows.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: no header row") from None
        positions = {}
        for name in FEATURE_NAMES:
            if name not in header:
                raise MissingColumn(name)
            positions[name] = header.index(name)
        label_pos = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None

        rows, labels = [], []
        for line in reader:
            if not line or all(not c.strip() for c in line):
                continue
            r = len(rows) + 1
            if len(line) != len(header):
                raise BadValue(r, "*", f"expected {len(header)} fields, got {len(line)}")
            values = [_parse_float(line[positions[n]], r, n) for n in FEATURE_NAMES]
            check_row(values, CANONICAL_SCHEMA, r)
            rows.append(values)
            if label_pos is not None:
                lab = _parse_float(line[label_pos], r, LABEL_COLUMN)
                if lab not in (0.0, 1.0):
                    raise BadValue(r, LABEL_COLUMN, f"label must be 0 or 1, got {line[label_pos]!r}")
                labels.append(int(lab))
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels) if label_pos is not None else None)


def format_number(v: float) -> str:
    return f"{v:.12g}"


def write_csv(dataset: Dataset, path) -> None:
    header = list(dataset.schema.names)
    if dataset.labeled:
        header.append(LABEL_COLUMN)
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(dataset)):
            row = [format_number(v) for v in dataset.X[i]]
            if dataset.labeled:
                row.append(str(int(dataset.y[i])))
            w.writerow(row)


def _truncated_normal(rng, mean, std, lo, hi, size):
    # Rejection sampling keeps the draw sequence a pure function of the seed.
    out = rng.normal(mean, std, size)
    bad = (out < lo) | (out > hi)
    while bad.any():
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = (out < lo) | (out > hi)
    return out


def generate_synthetic(n: int, anomaly_rate: float, seed: int) -> Dataset:
    """Draw ``n`` labeled telemetry samples, ``round(n * anomaly_rate)`` of them abnormal.

    Healthy rows come from per-feature truncated normals. Each abnormal row
    gets between two and five of the anomaly signatures applied, each
    signature shifting its features by a fixed number of standard deviations.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise BadParameter(f"n must be an integer >= 2, got {n!r}")
    if not (0.0 <= anomaly_rate <= 1.0):
        raise BadParameter(f"anomaly_rate must lie in [0, 1], got {anomaly_rate!r}")
    rng = np.random.default_rng(seed)
    n_abnormal = int(math.floor(n * anomaly_rate + 0.5))

    X = np.empty((n, len(FEATURE_NAMES)))
    for j, name in enumerate(FEATURE_NAMES):
        mean, std = NOMINAL[name]
        X[:, j] = _truncated_normal(rng, mean, std, *FEATURE_RANGES[name], n)

    y = np.ones(n, dtype=np.int64)
    abnormal = np.sort(rng.permutation(n)[:n_abnormal])
    y[abnormal] = ABNORMAL

    chosen = np.zeros((n_abnormal, len(SIGNATURES)), dtype=bool)
    for row in range(n_abnormal):
        k = int(rng.integers(2, len(SIGNATURES) + 1))
        chosen[row, rng.choice(len(SIGNATURES), size=k, replace=False)] = True
    for s, signature in enumerate(SIGNATURES):
        rows = abnormal[chosen[:, s]]
        for name, shift in signature.items():
            mean, std = NOMINAL[name]
            j = FEATURE_NAMES.index(name)
            X[rows, j] = _truncated_normal(rng, mean + shift * std, std, *FEATURE_RANGES[name], rows.size)

    pc = FEATURE_NAMES.index("process_count")
    X[:, pc] = np.round(X[:, pc])
    return Dataset(X, y)


def split_indices(d: Dataset, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of the (train, test) parts, each in ascending order."""
    if not (0.0 < test_fraction < 1.0):
        raise BadParameter(f"test_fraction must lie in (0, 1), got {test_fraction!r}")
    rng = np.random.default_rng(seed)
    n = len(d)
    groups = [np.flatnonzero(d.y == c) for c in (0, 1)] if d.labeled else [np.arange(n)]
    mask = np.zeros(n, dtype=bool)
    for idx in groups:
        if idx.size:
            k = int(math.floor(idx.size * test_fraction + 0.5))
            mask[rng.permutation(idx)[:k]] = True
    train_idx, test_idx = np.flatnonzero(~mask), np.flatnonzero(mask)
    if test_idx.size == 0 or train_idx.size == 0:
        raise EmptyDataset(f"split of {n} samples at test_fraction={test_fraction} leaves an empty part")
    return train_idx, test_idx


def train_test_split(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split into (train, test), stratified by label when labels exist.

    Each part keeps the original relative order of its samples.
    """
    train_idx, test_idx = split_indices(d, test_fraction, seed)
    return d.subset(train_idx), d.subset(test_idx)


def as_matrix(samples: Sequence, schema: FeatureSchema = CANONICAL_SCHEMA) -> np.ndarray:
    """Stack samples (TelemetrySample or plain vectors) into an (n, d) float array."""
    rows = [s.features if isinstance(s, TelemetrySample) else s for s in samples]
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(schema):
        raise SchemaMismatch(f"expected vectors of length {len(schema)}, got shape {X.shape}")
    return X
