"""Independent reference implementations used only by the tests.

None of these touch the kernel backends.
"""

import itertools
import math
from fractions import Fraction

import numpy as np

from edgehealth.gbdt import Split


def candidate_thresholds(column):
    values = sorted(set(float(v) for v in column))
    out = []
    for lo, hi in zip(values, values[1:]):
        mid = 0.5 * (lo + hi)
        out.append(mid if lo < mid else hi)
    return out


def leaf_objective(g, h, lam):
    """min over w of sum(g) w + (sum(h) + lam) w^2 / 2, i.e. -G^2 / (2 (H + lam))."""
    G, H = math.fsum(g), math.fsum(h)
    return -0.5 * G * G / (H + lam)


def brute_force_split(X, g, h, lam, gamma, min_child_hessian):
    """Exhaustive minimizer of the regularized second-order objective.

    Returns (feature, threshold, objective reduction) or None when no split
    lowers the objective. Ties go to the lowest (feature, threshold).
    """
    g, h = list(map(float, g)), list(map(float, h))
    parent = leaf_objective(g, h, lam) + gamma
    best = None
    for f in range(X.shape[1]):
        for thr in candidate_thresholds(X[:, f]):
            left = [i for i in range(len(g)) if X[i, f] < thr]
            right = [i for i in range(len(g)) if not X[i, f] < thr]
            hl, hr = [h[i] for i in left], [h[i] for i in right]
            if math.fsum(hl) < min_child_hessian or math.fsum(hr) < min_child_hessian:
                continue
            if math.fsum(hl) + lam <= 0 or math.fsum(hr) + lam <= 0:
                continue
            obj = (
                leaf_objective([g[i] for i in left], hl, lam)
                + leaf_objective([g[i] for i in right], hr, lam)
                + 2 * gamma
            )
            if obj < parent and (best is None or obj < best[2]):
                best = (f, thr, obj)
    if best is None:
        return None
    return best[0], best[1], parent - best[2]


def tree_value(node, x):
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] < node.threshold else node.right
    return node.weight


def model_margin(model, x):
    return model.base_score + model.eta * sum(tree_value(t, x) for t in model.trees)


def composite_value(model, x, S, B):
    """Mean margin over background rows with features in S taken from x."""
    total = 0.0
    for b in B:
        z = [x[j] if j in S else b[j] for j in range(len(x))]
        total += model_margin(model, z)
    return total / len(B)


def permutation_shapley(model, x, B):
    """Average marginal contribution over all n! feature orderings."""
    n = len(x)
    cache = {}

    def v(S):
        key = frozenset(S)
        if key not in cache:
            cache[key] = model_margin(model, x) if len(key) == n else composite_value(model, x, key, B)
        return cache[key]

    phi = np.zeros(n)
    count = 0
    for perm in itertools.permutations(range(n)):
        seen = set()
        for i in perm:
            before = v(seen)
            seen = seen | {i}
            phi[i] += v(seen) - before
        count += 1
    return phi / count


def exact_weight(size, n):
    return Fraction(math.factorial(size) * math.factorial(n - size - 1), math.factorial(n))
