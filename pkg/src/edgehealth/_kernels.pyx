# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see _fallback.py for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


def best_split_scan(const double[:, ::1] X, const cnp.intp_t[:, ::1] order,
                    const double[::1] g, const double[::1] h,
                    double G, double H, double lam, double gamma,
                    double min_child_hessian):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t f, k, r, rn
    cdef double GL, HL, GR, HR, gain, lo, hi, thr
    cdef double parent
    cdef long best_f = -1
    cdef double best_thr = 0.0, best_gain = 0.0
    if n < 2:
        return best_f, best_thr, best_gain
    parent = G * G / (H + lam)
    for f in range(d):
        GL = 0.0
        HL = 0.0
        for k in range(n - 1):
            r = order[f, k]
            rn = order[f, k + 1]
            GL = GL + g[r]
            HL = HL + h[r]
            lo = X[r, f]
            hi = X[rn, f]
            if lo == hi:
                continue
            GR = G - GL
            HR = H - HL
            if HL < min_child_hessian or HR < min_child_hessian:
                continue
            if not (HL + lam > 0) or not (HR + lam > 0):
                continue
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent) - gamma
            if gain > best_gain:
                best_gain = gain
                best_f = f
                thr = 0.5 * (lo + hi)
                best_thr = thr if lo < thr else hi
    return best_f, best_thr, best_gain


cdef inline double _ensemble_sum(const double* row, Py_ssize_t d,
                                 const int64_t[::1] feature, const double[::1] threshold,
                                 const int64_t[::1] left, const int64_t[::1] right,
                                 const double[::1] value, const int64_t[::1] roots) nogil:
    cdef double s = 0.0
    cdef Py_ssize_t t
    cdef int64_t node, f
    for t in range(roots.shape[0]):
        node = roots[t]
        f = feature[node]
        while f >= 0:
            if row[f] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        s = s + value[node]
    return s


def predict_margins(const double[:, ::1] X,
                    const int64_t[::1] feature, const double[::1] threshold,
                    const int64_t[::1] left, const int64_t[::1] right,
                    const double[::1] value, const int64_t[::1] roots,
                    double base, double eta):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i
    out = np.empty(n)
    cdef double[::1] res = out
    with nogil:
        for i in range(n):
            res[i] = base + eta * _ensemble_sum(&X[i, 0], d, feature, threshold, left, right, value, roots)
    return out


def subset_values(const double[::1] x, const double[:, ::1] B, const uint64_t[::1] masks,
                  const int64_t[::1] feature, const double[::1] threshold,
                  const int64_t[::1] left, const int64_t[::1] right,
                  const double[::1] value, const int64_t[::1] roots,
                  double base, double eta):
    cdef Py_ssize_t m = B.shape[0], d = B.shape[1], k = masks.shape[0]
    cdef Py_ssize_t s, j, f
    cdef uint64_t mask
    cdef double total
    out = np.empty(k)
    cdef double[::1] res = out
    cdef double[::1] comp = np.empty(d)
    with nogil:
        for s in range(k):
            mask = masks[s]
            total = 0.0
            for j in range(m):
                for f in range(d):
                    if (mask >> f) & 1:
                        comp[f] = x[f]
                    else:
                        comp[f] = B[j, f]
                total = total + (base + eta * _ensemble_sum(&comp[0], d, feature, threshold,
                                                            left, right, value, roots))
            res[s] = total / m
    return out


def coalition_values(const double[::1] x, const uint64_t[::1] masks,
                     const int64_t[:, ::1] path_feat, const double[:, ::1] path_lo,
                     const double[:, ::1] path_hi, const int64_t[::1] path_len,
                     const double[::1] weights, const double[::1] counts,
                     const int64_t[::1] count_offset, double m, double base, double eta):
    cdef Py_ssize_t n_leaves = path_feat.shape[0], k = masks.shape[0]
    cdef Py_ssize_t s, leaf, j
    cdef int64_t f, local, xfail
    cdef uint64_t mask
    cdef double acc, v
    out = np.empty(k)
    cdef double[::1] res = out
    cdef int64_t[::1] x_fail = np.zeros(n_leaves, dtype=np.int64)
    with nogil:
        for leaf in range(n_leaves):
            xfail = 0
            for j in range(path_len[leaf]):
                v = x[path_feat[leaf, j]]
                if not (path_lo[leaf, j] <= v and v < path_hi[leaf, j]):
                    xfail = xfail | (<int64_t>1 << j)
            x_fail[leaf] = xfail
        for s in range(k):
            mask = masks[s]
            acc = 0.0
            for leaf in range(n_leaves):
                local = 0
                for j in range(path_len[leaf]):
                    f = path_feat[leaf, j]
                    if (mask >> f) & 1:
                        local = local | (<int64_t>1 << j)
                if local & x_fail[leaf]:
                    acc = acc + 0.0
                else:
                    acc = acc + weights[leaf] * counts[count_offset[leaf] + local]
            res[s] = base + eta * (acc / m)
    return out
