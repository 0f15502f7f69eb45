"""Exact Shapley attributions and the importance tables built on them.

The value of a feature coalition S for a sample x is the interventional
expectation of the model margin: features in S take x's values, the rest
take values from each background row in turn, and the resulting margins are
averaged. All 2^n coalitions are evaluated once per sample and then combined
with the classic Shapley weights |S|! (n - |S| - 1)! / n!.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ._backend import kernels
from ._io import atomic_write
from .data import Dataset, FeatureSchema, TelemetrySample
from .errors import (
    AlignmentMismatch,
    BadFeatureIndex,
    BadParameter,
    EmptyInput,
    SchemaMismatch,
    TooManyFeatures,
)
from .gbdt import BoostedModel, Split, iter_nodes, predict_margin

MAX_FEATURES = 20
MAX_BACKGROUND = 4096
DEFAULT_BACKGROUND = 256
EFFICIENCY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BackgroundSet:
    """Reference rows that stand in for features outside a coalition."""

    X: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyInput("background set must hold at least one row")
        if X.shape[0] > MAX_BACKGROUND:
            raise BadParameter(f"background set of {X.shape[0]} rows exceeds {MAX_BACKGROUND}")
        if X.shape[1] != len(self.schema):
            raise SchemaMismatch("background rows do not match schema")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    def __len__(self):
        return self.X.shape[0]

    @classmethod
    def from_dataset(cls, dataset: Dataset, size: int = DEFAULT_BACKGROUND, seed: int = 0) -> "BackgroundSet":
        """Uniform sample of ``size`` rows without replacement, kept in dataset order."""
        if size < 1:
            raise BadParameter("background size must be >= 1")
        if len(dataset) <= size:
            return cls(dataset.X, dataset.schema)
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(dataset), size=size, replace=False))
        return cls(dataset.X[idx], dataset.schema)


@dataclass(frozen=True, eq=False)
class Explanation:
    """Shapley vector of one sample on the margin (log-odds) scale."""

    phi: np.ndarray
    phi0: float
    sample_index: int
    margin: float

    @property
    def efficiency_error(self) -> float:
        return abs(self.phi0 + math.fsum(self.phi) - self.margin)


def _check_model_background(model: BoostedModel, background: BackgroundSet) -> None:
    if background.schema != model.schema:
        raise SchemaMismatch("background schema differs from model schema")


def _sample_vector(model: BoostedModel, x) -> np.ndarray:
    if isinstance(x, TelemetrySample):
        if x.schema != model.schema:
            raise SchemaMismatch("sample schema differs from model schema")
        x = x.features
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.shape != (len(model.schema),):
        raise SchemaMismatch(f"expected {len(model.schema)} features, got shape {v.shape}")
    return v


def _mask_of(S: Iterable[int], n: int) -> int:
    mask = 0
    for i in S:
        if not 0 <= i < n:
            raise SchemaMismatch(f"feature index {i} outside schema of {n}")
        mask |= 1 << int(i)
    return mask


def _override_full(model: BoostedModel, x: np.ndarray, masks: np.ndarray, v: np.ndarray) -> np.ndarray:
    # The full coalition is the model output itself, with no background averaging.
    v[masks == (1 << len(model.schema)) - 1] = predict_margin(model, x)
    return v


def _coalition_values(model: BoostedModel, x: np.ndarray, background: BackgroundSet, masks: np.ndarray) -> np.ndarray:
    """Coalition values by direct evaluation of every composite row."""
    v = kernels.subset_values(x, background.X, masks, *model.flat, model.base_score, model.eta)
    return _override_full(model, x, masks, v)


class LeafPaths:
    """Per-leaf path intervals and background pass counts for one (model, background) pair.

    For leaf L with distinct path features P_L, each feature must fall in a
    half-open interval [lo, hi) for a row to reach L. ``counts`` stores, for
    every subset T of P_L, how many background rows pass on all of P_L \\ T;
    those rows reach L once the features in T are taken from the explained
    sample and pass there too. This turns the composite average into a table
    lookup per leaf, with the same value as direct evaluation.
    """

    def __init__(self, model: BoostedModel, background: BackgroundSet):
        self.model = model
        self.background = background
        feats, los, his, weights = [], [], [], []
        for tree in model.trees:
            stack = [(tree, {})]
            while stack:
                node, box = stack.pop()
                if isinstance(node, Split):
                    lo, hi = box.get(node.feature_index, (-math.inf, math.inf))
                    left, right = dict(box), dict(box)
                    left[node.feature_index] = (lo, min(hi, node.threshold))
                    right[node.feature_index] = (max(lo, node.threshold), hi)
                    stack.append((node.right, right))
                    stack.append((node.left, left))
                else:
                    keys = sorted(box)
                    feats.append(keys)
                    los.append([box[k][0] for k in keys])
                    his.append([box[k][1] for k in keys])
                    weights.append(node.weight)
        n_leaves = len(weights)
        depth = max([len(f) for f in feats] + [1])
        self.path_feat = np.full((n_leaves, depth), -1, dtype=np.int64)
        self.path_lo = np.full((n_leaves, depth), -math.inf)
        self.path_hi = np.full((n_leaves, depth), math.inf)
        self.path_len = np.array([len(f) for f in feats], dtype=np.int64)
        self.weights = np.array(weights, dtype=np.float64)
        offsets, tables = [], []
        B = background.X
        total = 0
        for leaf, (fs, lo, hi) in enumerate(zip(feats, los, his)):
            p = len(fs)
            self.path_feat[leaf, :p] = fs
            self.path_lo[leaf, :p] = lo
            self.path_hi[leaf, :p] = hi
            fail = np.zeros(B.shape[0], dtype=np.int64)
            for j, f in enumerate(fs):
                passes = (lo[j] <= B[:, f]) & (B[:, f] < hi[j])
                fail |= (~passes).astype(np.int64) << j
            table = np.bincount(fail, minlength=1 << p).astype(np.float64)
            # Sum over subsets: table[T] = #rows whose failing set is contained in T.
            for j in range(p):
                bit = 1 << j
                idx = np.arange(1 << p)
                has = (idx & bit) != 0
                table[idx[has]] += table[idx[has] ^ bit]
            offsets.append(total)
            tables.append(table)
            total += table.size
        self.count_offset = np.array(offsets, dtype=np.int64)
        self.counts = np.concatenate(tables) if tables else np.zeros(0)

    def values(self, x: np.ndarray, masks: np.ndarray) -> np.ndarray:
        model = self.model
        if self.weights.size == 0:
            return np.full(masks.shape[0], model.base_score)
        v = kernels.coalition_values(
            x, masks, self.path_feat, self.path_lo, self.path_hi, self.path_len,
            self.weights, self.counts, self.count_offset, float(len(self.background)),
            model.base_score, model.eta,
        )
        return _override_full(model, x, masks, v)


def value_function(model: BoostedModel, x, S: Iterable[int], background: BackgroundSet) -> float:
    """Expected margin when only the features in ``S`` keep the sample's values."""
    _check_model_background(model, background)
    xv = _sample_vector(model, x)
    mask = _mask_of(S, len(model.schema))
    return float(_coalition_values(model, xv, background, np.array([mask], dtype=np.uint64))[0])


def shapley_weight(size: int, n: int) -> float:
    """Weight of a coalition of ``size`` players that excludes the player being scored."""
    return math.factorial(size) * math.factorial(n - size - 1) / math.factorial(n)


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while m.any():
        counts += (m & np.uint64(1)).astype(np.int64)
        m >>= np.uint64(1)
    return counts


def shapley_from_values(v: np.ndarray, n: int) -> np.ndarray:
    """Combine a full table of coalition values (indexed by bitmask) into Shapley values."""
    masks = np.arange(1 << n, dtype=np.uint64)
    sizes = _popcount(masks)
    weights = np.array([shapley_weight(s, n) for s in range(n)])
    phi = np.empty(n)
    for i in range(n):
        bit = np.uint64(1 << i)
        without = masks[(masks & bit) == 0]
        deltas = v[(without | bit).astype(np.intp)] - v[without.astype(np.intp)]
        phi[i] = math.fsum(weights[sizes[without.astype(np.intp)]] * deltas)
    return phi


def coalition_table(model: BoostedModel, x, background: BackgroundSet, paths: Optional[LeafPaths] = None) -> np.ndarray:
    """Values of all 2^n coalitions, indexed by feature bitmask."""
    n = len(model.schema)
    if n > MAX_FEATURES:
        raise TooManyFeatures(f"{n} features exceeds exact-enumeration limit of {MAX_FEATURES}")
    _check_model_background(model, background)
    xv = _sample_vector(model, x)
    if paths is None:
        paths = LeafPaths(model, background)
    return paths.values(xv, np.arange(1 << n, dtype=np.uint64))


def shapley_exact(
    model: BoostedModel,
    x,
    background: BackgroundSet,
    sample_index: int = -1,
    paths: Optional[LeafPaths] = None,
) -> Explanation:
    """Exact Shapley values of every feature for one sample.

    ``paths`` may be passed to reuse the per-leaf precomputation across
    samples explained against the same model and background.
    """
    n = len(model.schema)
    v = coalition_table(model, x, background, paths)
    return Explanation(shapley_from_values(v, n), float(v[0]), sample_index, float(v[-1]))


def explain_dataset(
    model: BoostedModel,
    dataset: Dataset,
    background: BackgroundSet,
    indices: Optional[Sequence[int]] = None,
) -> list:
    if dataset.schema != model.schema:
        raise SchemaMismatch("dataset schema differs from model schema")
    if len(model.schema) > MAX_FEATURES:
        raise TooManyFeatures(f"{len(model.schema)} features exceeds exact-enumeration limit of {MAX_FEATURES}")
    _check_model_background(model, background)
    if indices is None:
        indices = range(len(dataset))
    paths = LeafPaths(model, background)
    out = []
    for i in indices:
        if not 0 <= i < len(dataset):
            raise AlignmentMismatch(f"sample index {i} outside dataset of {len(dataset)}")
        out.append(shapley_exact(model, dataset.X[i], background, sample_index=int(i), paths=paths))
    return out


def _ranked(schema: FeatureSchema, values) -> list:
    order = sorted(range(len(schema)), key=lambda i: (-values[i], i))
    return [(schema.names[i], values[i]) for i in order]


def mean_abs_shap(explanations: Sequence[Explanation], schema: FeatureSchema) -> list:
    """Features ranked by mean absolute Shapley value, largest first."""
    if not explanations:
        raise EmptyInput("no explanations to aggregate")
    phi = np.vstack([e.phi for e in explanations])
    if phi.shape[1] != len(schema):
        raise SchemaMismatch("explanation width does not match schema")
    means = np.abs(phi).mean(axis=0)
    return _ranked(schema, [float(m) for m in means])


def weight_importance(model: BoostedModel) -> list:
    """Features ranked by how many split nodes use them across all trees."""
    counts = [0] * len(model.schema)
    for tree in model.trees:
        for node in iter_nodes(tree):
            if isinstance(node, Split):
                counts[node.feature_index] += 1
    return _ranked(model.schema, counts)


def _normalized_columns(dataset: Dataset) -> np.ndarray:
    lo = dataset.X.min(axis=0)
    hi = dataset.X.max(axis=0)
    span = hi - lo
    out = np.full(dataset.X.shape, 0.5)
    varying = span > 0
    out[:, varying] = (dataset.X[:, varying] - lo[varying]) / span[varying]
    return out


def _aligned_indices(explanations: Sequence[Explanation], dataset: Dataset) -> np.ndarray:
    idx = np.array([e.sample_index for e in explanations], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(dataset)):
        raise AlignmentMismatch("explanation sample_index outside dataset")
    for e in explanations:
        if e.phi.shape != (dataset.n_features,):
            raise AlignmentMismatch("explanation width does not match dataset")
    return idx


@dataclass(frozen=True)
class BeeswarmRow:
    feature: str
    sample_index: int
    phi: float
    normalized_value: float


def beeswarm_data(explanations: Sequence[Explanation], dataset: Dataset) -> list:
    """One row per (feature, sample): Shapley value and min-max normalized feature value.

    Rows are grouped by feature in schema order. A constant feature
    normalizes to 0.5.
    """
    idx = _aligned_indices(explanations, dataset)
    norm = _normalized_columns(dataset)
    rows = []
    for j, name in enumerate(dataset.schema.names):
        for e, i in zip(explanations, idx):
            rows.append(BeeswarmRow(name, int(i), float(e.phi[j]), float(norm[i, j])))
    return rows


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0.0 or not math.isfinite(denom):
        return 0.0
    return float(a @ b) / denom


@dataclass(frozen=True)
class DependenceTable:
    feature: int
    color_feature: int
    rows: list  # (feature value, phi of feature, color feature value)


def dependence_data(
    explanations: Sequence[Explanation],
    dataset: Dataset,
    feature: int,
    color_feature: Optional[int] = None,
) -> DependenceTable:
    """Feature value vs its Shapley value, colored by a second feature.

    Without an explicit ``color_feature`` the feature whose values correlate
    most strongly (absolute Pearson) with the Shapley values is chosen.
    """
    d = dataset.n_features
    if not 0 <= feature < d:
        raise BadFeatureIndex(f"feature index {feature} outside 0..{d - 1}")
    if color_feature is not None and not 0 <= color_feature < d:
        raise BadFeatureIndex(f"color feature index {color_feature} outside 0..{d - 1}")
    idx = _aligned_indices(explanations, dataset)
    phi = np.array([e.phi[feature] for e in explanations], dtype=np.float64)
    if color_feature is None:
        best, best_r = None, -1.0
        for j in range(d):
            if j == feature:
                continue
            r = abs(_pearson(dataset.X[idx, j], phi)) if idx.size else 0.0
            if r > best_r:
                best, best_r = j, r
        color_feature = best if best is not None else feature
    rows = [
        (float(dataset.X[i, feature]), float(p), float(dataset.X[i, color_feature]))
        for i, p in zip(idx, phi)
    ]
    return DependenceTable(feature, color_feature, rows)


def shap_columns(schema: FeatureSchema) -> list:
    return ["sample_index", "phi0"] + [f"phi_{n}" for n in schema.names] + ["margin", "efficiency_ok"]


def write_shap_csv(explanations: Sequence[Explanation], schema: FeatureSchema, path) -> None:
    """Write explanations with full-precision floats and an efficiency check column."""
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(shap_columns(schema))
        for e in explanations:
            ok = int(e.efficiency_error < EFFICIENCY_TOL)
            w.writerow([e.sample_index, repr(e.phi0)] + [repr(float(p)) for p in e.phi] + [repr(e.margin), ok])


def read_shap_csv(path, schema: FeatureSchema) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != shap_columns(schema):
            raise SchemaMismatch(f"{path}: shap header does not match schema")
        out = []
        for row in reader:
            if not row:
                continue
            phi = np.array([float(v) for v in row[2:2 + len(schema)]])
            out.append(Explanation(phi, float(row[1]), int(row[0]), float(row[2 + len(schema)])))
    return out
