"""Regularized second-order gradient boosting for binary node-health labels.

Each round fits a regression tree to the first/second derivatives of the
logistic loss at the current margins. Leaf weights and split gains follow
from minimizing the per-round quadratic objective plus the complexity
penalty ``gamma * T + 0.5 * lambda * ||w||^2``.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Union

import numpy as np

from ._backend import kernels
from ._io import atomic_write
from .data import CANONICAL_SCHEMA, Dataset, FeatureSchema, TelemetrySample
from .errors import BadParameter, DegenerateLeaf, EmptyDataset, ModelFormatError, SchemaMismatch

PRIOR_CLAMP = 1e-6
PROBA_CLAMP = 1e-12
_SIGMOID_LO = sys.float_info.min
_SIGMOID_HI = 1.0 - 2.0**-53


def sigmoid(margin):
    """Logistic link, stable for large ``|margin|`` and kept strictly inside (0, 1)."""
    m = np.asarray(margin, dtype=np.float64)
    e = np.exp(-np.abs(m))
    p = np.clip(np.where(m >= 0, 1.0 / (1.0 + e), e / (1.0 + e)), _SIGMOID_LO, _SIGMOID_HI)
    return float(p) if p.ndim == 0 else p


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def log_loss(labels, proba) -> float:
    """Mean binary cross-entropy with probabilities clipped to [1e-12, 1 - 1e-12]."""
    y = np.asarray(labels, dtype=np.float64)
    p = np.clip(np.asarray(proba, dtype=np.float64), PROBA_CLAMP, 1.0 - PROBA_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


class GradPair(NamedTuple):
    g: float
    h: float


def grad_hess(margin: float, label: int) -> GradPair:
    """First and second derivative of the logistic loss with respect to the margin.

    ``g = p - label`` is evaluated as ``-sigmoid(-margin)`` for label 1 so it
    keeps full relative precision when p is close to the label.
    """
    if label not in (0, 1):
        raise BadParameter(f"label must be 0 or 1, got {label!r}")
    p, q = sigmoid(margin), sigmoid(-margin)
    return GradPair(-q if label == 1 else p, p * q)


def _grad_hess_arrays(margins: np.ndarray, labels: np.ndarray):
    p, q = sigmoid(margins), sigmoid(-margins)
    return np.where(labels == 1, -q, p), p * q


def leaf_weight(G: float, H: float, lam: float) -> float:
    if H + lam == 0:
        raise DegenerateLeaf(f"leaf with zero hessian sum and lambda=0 (G={G})")
    return -G / (H + lam) + 0.0


def split_gain(GL: float, HL: float, GR: float, HR: float, lam: float, gamma: float) -> float:
    """Objective reduction from splitting one leaf into two (may be negative)."""
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma


@dataclass(frozen=True)
class BoostHyperparams:
    num_rounds: int = 50
    max_depth: int = 4
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_hessian: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("num_rounds", "max_depth", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise BadParameter(f"{name} must be an integer, got {v!r}")
        if self.num_rounds < 0:
            raise BadParameter("num_rounds must be >= 0")
        if self.max_depth < 0:
            raise BadParameter("max_depth must be >= 0")
        if not (0.0 < self.learning_rate <= 1.0):
            raise BadParameter(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        for name in ("reg_lambda", "gamma", "min_child_hessian"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise BadParameter(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Leaf:
    weight: float


@dataclass(frozen=True)
class Split:
    """Internal node: rows with ``x[feature_index] < threshold`` go left."""

    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


class SplitCandidate(NamedTuple):
    feature_index: int
    threshold: float
    gain: float


def best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: BoostHyperparams) -> Optional[SplitCandidate]:
    """Best exact split of the rows in ``X`` or None if no split has positive gain.

    Candidates are midpoints between consecutive distinct sorted values.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyDataset("best_split needs at least one row")
    G, H = math.fsum(g), math.fsum(h)
    if not H + params.reg_lambda > 0:
        return None
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.intp)
    f, thr, gain = kernels.best_split_scan(
        X, order, g, h, G, H, params.reg_lambda, params.gamma, params.min_child_hessian
    )
    if f < 0:
        return None
    return SplitCandidate(int(f), float(thr), float(gain))


def build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: BoostHyperparams, depth: int = 0) -> TreeNode:
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if depth < params.max_depth and X.shape[0] > 1:
        cand = best_split(X, g, h, params)
        if cand is not None:
            go_left = X[:, cand.feature_index] < cand.threshold
            go_right = ~go_left
            return Split(
                cand.feature_index,
                cand.threshold,
                build_tree(X[go_left], g[go_left], h[go_left], params, depth + 1),
                build_tree(X[go_right], g[go_right], h[go_right], params, depth + 1),
            )
    return Leaf(leaf_weight(math.fsum(g), math.fsum(h), params.reg_lambda))


def iter_nodes(tree: TreeNode):
    """Pre-order walk over every node of a tree."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Split):
            stack.append(node.right)
            stack.append(node.left)


def tree_leaves(tree: TreeNode) -> list:
    return [n for n in iter_nodes(tree) if isinstance(n, Leaf)]


def tree_depth(tree: TreeNode) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def tree_complexity(tree: TreeNode, lam: float, gamma: float) -> float:
    """Complexity penalty ``gamma * T + 0.5 * lambda * sum(w^2)`` of one tree."""
    w = [leaf.weight for leaf in tree_leaves(tree)]
    return gamma * len(w) + 0.5 * lam * sum(v * v for v in w)


def predict_tree(tree: TreeNode, x) -> float:
    node = tree
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] < node.threshold else node.right
    return node.weight


class FlatEnsemble(NamedTuple):
    """Array form of a tree list, shared by both kernel backends."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @classmethod
    def from_trees(cls, trees) -> "FlatEnsemble":
        feature, threshold, left, right, value, roots = [], [], [], [], [], []

        def emit(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if isinstance(node, Split):
                feature[i] = node.feature_index
                threshold[i] = node.threshold
                left[i] = emit(node.left)
                right[i] = emit(node.right)
            else:
                value[i] = node.weight
            return i

        for tree in trees:
            roots.append(emit(tree))
        as_i = lambda a: np.ascontiguousarray(a, dtype=np.int64)
        as_f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
        return cls(as_i(feature), as_f(threshold), as_i(left), as_i(right), as_f(value), as_i(roots))


@dataclass(frozen=True, eq=False)
class BoostedModel:
    """Trained ensemble: ``margin(x) = base_score + eta * sum_k tree_k(x)``."""

    schema: FeatureSchema
    base_score: float
    eta: float
    trees: tuple
    hyperparams: BoostHyperparams
    training_log: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        d = len(self.schema)
        for tree in self.trees:
            for node in iter_nodes(tree):
                if isinstance(node, Split) and not (0 <= node.feature_index < d):
                    raise SchemaMismatch(f"split on feature {node.feature_index} outside schema of {d}")

    @cached_property
    def flat(self) -> FlatEnsemble:
        return FlatEnsemble.from_trees(self.trees)

    def regularization(self) -> list:
        """Per-tree complexity penalty under the model's own lambda and gamma."""
        hp = self.hyperparams
        return [tree_complexity(t, hp.reg_lambda, hp.gamma) for t in self.trees]

    def to_dict(self) -> dict:
        return {
            "schema": list(self.schema.names),
            "base_score": self.base_score,
            "eta": self.eta,
            "hyperparams": asdict(self.hyperparams),
            "trees": [_node_to_dict(t) for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path) -> None:
        with atomic_write(path) as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostedModel":
        try:
            if set(doc) != {"schema", "base_score", "eta", "hyperparams", "trees"}:
                raise ModelFormatError(f"unexpected top-level keys {sorted(doc)}")
            schema = FeatureSchema(tuple(_expect(n, str, "schema entry") for n in doc["schema"]))
            hp = BoostHyperparams(**doc["hyperparams"])
            base = _finite(doc["base_score"], "base_score")
            eta = _finite(doc["eta"], "eta")
            if not 0.0 < eta <= 1.0:
                raise ModelFormatError(f"eta {eta} outside (0, 1]")
            if not isinstance(doc["trees"], list):
                raise ModelFormatError("trees must be a list")
            trees = tuple(_node_from_dict(t, len(schema)) for t in doc["trees"])
            return cls(schema, base, eta, trees, hp)
        except ModelFormatError:
            raise
        except (TypeError, KeyError, BadParameter, SchemaMismatch, AttributeError) as exc:
            raise ModelFormatError(f"invalid model document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "BoostedModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ModelFormatError("model document must be a JSON object")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "BoostedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _expect(v, typ, what):
    if isinstance(v, bool) or not isinstance(v, typ):
        raise ModelFormatError(f"{what} has wrong type: {v!r}")
    return v


def _finite(v, what) -> float:
    v = float(_expect(v, (int, float), what))
    if not math.isfinite(v):
        raise ModelFormatError(f"{what} is not finite")
    return v


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"weight": node.weight}
    return {
        "feature_index": node.feature_index,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc, n_features: int) -> TreeNode:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"tree node must be an object, got {doc!r}")
    if set(doc) == {"weight"}:
        return Leaf(_finite(doc["weight"], "leaf weight"))
    if set(doc) != {"feature_index", "threshold", "left", "right"}:
        raise ModelFormatError(f"malformed tree node keys {sorted(doc)}")
    f = _expect(doc["feature_index"], int, "feature_index")
    if not 0 <= f < n_features:
        raise ModelFormatError(f"feature_index {f} outside schema of {n_features}")
    return Split(
        f,
        _finite(doc["threshold"], "threshold"),
        _node_from_dict(doc["left"], n_features),
        _node_from_dict(doc["right"], n_features),
    )


def _tree_values(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    flat = FlatEnsemble.from_trees([tree])
    return kernels.predict_margins(X, *flat, 0.0, 1.0)


def train(train_set: Dataset, params: Optional[BoostHyperparams] = None) -> BoostedModel:
    """Fit ``params.num_rounds`` trees by Newton boosting on the logistic loss.

    The returned model carries the per-round training log-loss in
    ``training_log``.
    """
    params = params or BoostHyperparams()
    if len(train_set) == 0:
        raise EmptyDataset("training set is empty")
    if not train_set.labeled:
        raise BadParameter("training set has no labels")
    X = np.ascontiguousarray(train_set.X)
    y = train_set.y.astype(np.float64)
    prior = math.fsum(y) / len(y)
    base = logit(min(max(prior, PRIOR_CLAMP), 1.0 - PRIOR_CLAMP))
    eta = params.learning_rate

    trees, log = [], []
    sums = np.zeros(len(y))
    margins = base + eta * sums
    for _ in range(params.num_rounds):
        g, h = _grad_hess_arrays(margins, y)
        tree = build_tree(X, g, h, params)
        trees.append(tree)
        sums = sums + _tree_values(tree, X)
        margins = base + eta * sums
        log.append(log_loss(y, sigmoid(margins)))
    return BoostedModel(train_set.schema, base, eta, tuple(trees), params, tuple(log))


def _as_rows(model: BoostedModel, data) -> np.ndarray:
    if isinstance(data, Dataset):
        if data.schema != model.schema:
            raise SchemaMismatch("dataset schema differs from model schema")
        return np.ascontiguousarray(data.X)
    if isinstance(data, TelemetrySample):
        if data.schema != model.schema:
            raise SchemaMismatch("sample schema differs from model schema")
        data = data.features
    X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != len(model.schema):
        raise SchemaMismatch(f"expected {len(model.schema)} features, got shape {np.shape(data)}")
    return np.ascontiguousarray(X)


def predict_margins(model: BoostedModel, data) -> np.ndarray:
    """Margins for a Dataset, a 2-D array of rows, or a single sample."""
    X = _as_rows(model, data)
    return kernels.predict_margins(X, *model.flat, model.base_score, model.eta)


def predict_margin(model: BoostedModel, sample) -> float:
    return float(predict_margins(model, sample)[0])


def predict_proba(model: BoostedModel, sample) -> float:
    return float(sigmoid(predict_margin(model, sample)))


def predict_label(model: BoostedModel, sample) -> int:
    return int(predict_proba(model, sample) >= 0.5)


def predict_probas(model: BoostedModel, data) -> np.ndarray:
    return sigmoid(predict_margins(model, data))


def predict_labels(model: BoostedModel, data) -> np.ndarray:
    return (predict_probas(model, data) >= 0.5).astype(np.int64)


def constant_model(base_score: float = 0.0, schema: FeatureSchema = CANONICAL_SCHEMA, eta: float = 1.0) -> BoostedModel:
    """Model with no trees; its margin is ``base_score`` everywhere."""
    return BoostedModel(schema, base_score, eta, (), BoostHyperparams(num_rounds=0, learning_rate=eta))
