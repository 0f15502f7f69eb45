"""Pure numpy implementations of the hot kernels.

Each function mirrors one in ``_kernels.pyx`` with the same floating-point
operation order, so both backends return bit-identical results.
"""

import numpy as np

# Composite rows evaluated per chunk in subset_values.
_CHUNK_ROWS = 1 << 16


def best_split_scan(X, order, g, h, G, H, lam, gamma, min_child_hessian):
    """Exhaustive scan over midpoints of sorted distinct values.

    ``order[f]`` lists row positions of ``X`` sorted by feature ``f`` (stable).
    Returns ``(feature, threshold, gain)``; feature is -1 when no candidate
    has strictly positive gain and sufficient child hessian.
    """
    n, d = X.shape
    best_f, best_thr, best_gain = -1, 0.0, 0.0
    if n < 2:
        return best_f, best_thr, best_gain
    parent = G * G / (H + lam)
    for f in range(d):
        o = order[f]
        xs = X[o, f]
        GL = np.cumsum(g[o])[:-1]
        HL = np.cumsum(h[o])[:-1]
        GR = G - GL
        HR = H - HL
        ok = (xs[1:] != xs[:-1]) & (HL >= min_child_hessian) & (HR >= min_child_hessian)
        ok &= (HL + lam > 0) & (HR + lam > 0)
        if not ok.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent) - gamma
        gain = np.where(ok, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            best_f = f
            lo, hi = xs[k], xs[k + 1]
            thr = 0.5 * (lo + hi)
            best_thr = float(thr if lo < thr else hi)
    return best_f, best_thr, best_gain


def _tree_sums(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    rows = np.arange(n)
    s = np.zeros(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            idx = node[active]
            f = feature[idx]
            go_left = X[rows[active], f] < threshold[idx]
            node[active] = np.where(go_left, left[idx], right[idx])
            active = feature[node] >= 0
        s += value[node]
    return s


def predict_margins(X, feature, threshold, left, right, value, roots, base, eta):
    return base + eta * _tree_sums(X, feature, threshold, left, right, value, roots)


def subset_values(x, B, masks, feature, threshold, left, right, value, roots, base, eta):
    """Mean background margin of composites that take ``x`` on each mask's features."""
    m, d = B.shape
    bits = ((masks[:, None] >> np.arange(d, dtype=np.uint64)) & np.uint64(1)).astype(bool)
    out = np.empty(masks.shape[0])
    step = max(1, _CHUNK_ROWS // m)
    for start in range(0, masks.shape[0], step):
        sel = bits[start:start + step]
        comp = np.where(sel[:, None, :], x[None, None, :], B[None, :, :]).reshape(-1, d)
        margins = predict_margins(comp, feature, threshold, left, right, value, roots, base, eta)
        margins = margins.reshape(sel.shape[0], m)
        total = np.zeros(sel.shape[0])
        for j in range(m):
            total += margins[:, j]
        out[start:start + step] = total / m
    return out


def coalition_values(x, masks, path_feat, path_lo, path_hi, path_len, weights, counts, count_offset,
                     m, base, eta):
    """Coalition values from per-leaf background pass counts.

    A leaf is reached by the composite row iff every path feature in the
    coalition passes its interval test on ``x`` and every other path feature
    passes on the background row. ``counts[count_offset[L] + T]`` holds how
    many background rows pass on all path features outside the local subset
    ``T`` of leaf ``L``'s path features.
    """
    n_leaves, depth = path_feat.shape
    cols = np.arange(depth)
    used = cols[None, :] < path_len[:, None]
    xv = x[np.where(used, path_feat, 0)]
    x_fail = (~((path_lo <= xv) & (xv < path_hi)) & used).astype(np.int64)
    x_fail_mask = (x_fail << cols[None, :]).sum(axis=1)
    safe_feat = np.where(used, path_feat, 0).astype(np.uint64)

    out = np.empty(masks.shape[0])
    step = max(1, _CHUNK_ROWS // max(n_leaves, 1))
    for start in range(0, masks.shape[0], step):
        mk = masks[start:start + step]
        bits = ((mk[:, None, None] >> safe_feat[None, :, :]) & np.uint64(1)).astype(np.int64)
        local = ((bits * used[None]) << cols[None, None, :]).sum(axis=2)
        ok = (local & x_fail_mask[None, :]) == 0
        contrib = np.where(ok, weights[None, :] * counts[count_offset[None, :] + local], 0.0)
        acc = np.zeros(mk.shape[0])
        for leaf in range(n_leaves):
            acc += contrib[:, leaf]
        out[start:start + step] = base + eta * (acc / m)
    return out
