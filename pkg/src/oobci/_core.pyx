# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree growing and prediction kernels.

Must stay arithmetically identical to ``_pycore``: same random-number
consumption, same summation order, same tie-breaking. The test suite
checks the two backends for bit-identical output.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef struct Pair:
    double v
    Py_ssize_t pos


cdef inline bint _less(Pair a, Pair b) noexcept nogil:
    return a.v < b.v or (a.v == b.v and a.pos < b.pos)


cdef void _sort_pairs(Pair* a, Py_ssize_t n) noexcept nogil:
    """Quicksort on (value, position); keys are unique so the order is total."""
    cdef Py_ssize_t i, j, mid
    cdef Pair piv, t
    while n > 16:
        mid = n // 2
        # median of three into a[mid]
        if _less(a[mid], a[0]):
            t = a[mid]; a[mid] = a[0]; a[0] = t
        if _less(a[n - 1], a[0]):
            t = a[n - 1]; a[n - 1] = a[0]; a[0] = t
        if _less(a[n - 1], a[mid]):
            t = a[n - 1]; a[n - 1] = a[mid]; a[mid] = t
        piv = a[mid]
        i = 0
        j = n - 1
        while True:
            while _less(a[i], piv):
                i += 1
            while _less(piv, a[j]):
                j -= 1
            if i >= j:
                break
            t = a[i]; a[i] = a[j]; a[j] = t
            i += 1
            j -= 1
        # recurse into the smaller side, loop on the larger
        if j + 1 < n - j - 1:
            _sort_pairs(a, j + 1)
            a = a + j + 1
            n = n - j - 1
        else:
            _sort_pairs(a + j + 1, n - j - 1)
            n = j + 1
    for i in range(1, n):
        t = a[i]
        j = i - 1
        while j >= 0 and _less(t, a[j]):
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = t


cdef Py_ssize_t _grow(
    const double[:, ::1] X,
    const double[::1] y,
    Py_ssize_t* idx,
    Py_ssize_t m,
    const double[:, ::1] feat_u,
    bint classification,
    Py_ssize_t min_leaf,
    Py_ssize_t max_depth,
    int* feature,
    double* threshold,
    int* left,
    int* right,
    double* value,
) noexcept nogil:
    """Grow one tree in place; returns node count, or -1 if feat_u ran out."""
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t mtry = feat_u.shape[1]
    cdef Py_ssize_t n_rows = feat_u.shape[0]
    cdef Py_ssize_t* st_start = <Py_ssize_t*> malloc(2 * m * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_end = <Py_ssize_t*> malloc(2 * m * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_depth = <Py_ssize_t*> malloc(2 * m * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_node = <Py_ssize_t*> malloc(2 * m * sizeof(Py_ssize_t))
    cdef Py_ssize_t* perm = <Py_ssize_t*> malloc(p * sizeof(Py_ssize_t))
    cdef Py_ssize_t* tmp = <Py_ssize_t*> malloc(m * sizeof(Py_ssize_t))
    cdef Pair* pairs = <Pair*> malloc(m * sizeof(Pair))

    cdef Py_ssize_t top = 0, node_count = 1, row = 0
    cdef Py_ssize_t start, end, depth, nid, cnt, k, j, f, q, t, nl, nr, nleft
    cdef Py_ssize_t best_f
    cdef double total, y0, parent, best, best_t, tot_f, sl, sr, proxy, c0, c1
    cdef double cl0, cr0, a, b, thr, sw
    cdef bint pure
    cdef Py_ssize_t result

    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    st_node[0] = 0
    top = 1
    result = 0

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        nid = st_node[top]
        cnt = end - start

        total = 0.0
        pure = True
        y0 = y[idx[start]]
        for k in range(start, end):
            total += y[idx[k]]
            if y[idx[k]] != y0:
                pure = False

        feature[nid] = -1
        threshold[nid] = 0.0
        left[nid] = -1
        right[nid] = -1
        if pure:
            value[nid] = y0
        elif classification:
            value[nid] = 1.0 if 2.0 * total > <double> cnt else 0.0
        else:
            value[nid] = total / <double> cnt

        if pure or cnt < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        if row >= n_rows:
            result = -1
            break

        # partial Fisher-Yates over feature indices
        for k in range(p):
            perm[k] = k
        for k in range(mtry):
            j = k + <Py_ssize_t> (feat_u[row, k] * <double> (p - k))
            if j >= p:
                j = p - 1
            t = perm[k]
            perm[k] = perm[j]
            perm[j] = t
        row += 1
        # ascending order of the chosen features (insertion sort)
        for k in range(1, mtry):
            t = perm[k]
            j = k - 1
            while j >= 0 and perm[j] > t:
                perm[j + 1] = perm[j]
                j -= 1
            perm[j + 1] = t

        if classification:
            c1 = total
            c0 = <double> cnt - c1
            parent = (c1 * c1 + c0 * c0) / <double> cnt
        else:
            parent = total * total / <double> cnt
        best = parent
        best_f = -1
        best_t = 0.0

        for q in range(mtry):
            f = perm[q]
            for k in range(cnt):
                pairs[k].v = X[idx[start + k], f]
                pairs[k].pos = k
            _sort_pairs(pairs, cnt)
            if pairs[0].v == pairs[cnt - 1].v:
                continue
            tot_f = 0.0
            for k in range(cnt):
                tot_f += y[idx[start + pairs[k].pos]]
            sl = 0.0
            for k in range(cnt - 1):
                sl += y[idx[start + pairs[k].pos]]
                nl = k + 1
                nr = cnt - nl
                if pairs[k].v == pairs[k + 1].v:
                    continue
                if nl < min_leaf or nr < min_leaf:
                    continue
                sr = tot_f - sl
                if classification:
                    cl0 = <double> nl - sl
                    cr0 = <double> nr - sr
                    proxy = (sl * sl + cl0 * cl0) / <double> nl + (sr * sr + cr0 * cr0) / <double> nr
                else:
                    proxy = sl * sl / <double> nl + sr * sr / <double> nr
                if proxy > best:
                    best = proxy
                    best_f = f
                    a = pairs[k].v
                    b = pairs[k + 1].v
                    thr = a + (b - a) * 0.5
                    if thr >= b:
                        thr = a
                    best_t = thr

        if best_f < 0:
            continue

        # stable partition of idx[start:end]
        nleft = 0
        for k in range(start, end):
            if X[idx[k], best_f] <= best_t:
                tmp[nleft] = idx[k]
                nleft += 1
        nr = nleft
        for k in range(start, end):
            if not (X[idx[k], best_f] <= best_t):
                tmp[nr] = idx[k]
                nr += 1
        for k in range(cnt):
            idx[start + k] = tmp[k]

        feature[nid] = <int> best_f
        threshold[nid] = best_t
        left[nid] = <int> node_count
        right[nid] = <int> (node_count + 1)
        # right pushed first so the left subtree is expanded first
        st_start[top] = start + nleft
        st_end[top] = end
        st_depth[top] = depth + 1
        st_node[top] = node_count + 1
        top += 1
        st_start[top] = start
        st_end[top] = start + nleft
        st_depth[top] = depth + 1
        st_node[top] = node_count
        top += 1
        node_count += 2

    if result == 0:
        result = node_count
    free(st_start)
    free(st_end)
    free(st_depth)
    free(st_node)
    free(perm)
    free(tmp)
    free(pairs)
    return result


def grow_tree(
    const double[:, ::1] X,
    const double[::1] y,
    const cnp.intp_t[::1] sample,
    const double[:, ::1] feat_u,
    bint classification,
    Py_ssize_t min_leaf,
    Py_ssize_t max_depth,
):
    """Grow a single tree on the rows listed in ``sample``.

    Returns ``(feature, threshold, left, right, value)`` node arrays.
    """
    cdef Py_ssize_t m = sample.shape[0]
    cdef Py_ssize_t cap = 2 * m - 1 if m > 0 else 1
    cdef Py_ssize_t k, count
    if m < 1:
        raise ValueError("empty bootstrap sample")
    if feat_u.shape[1] < 1 or feat_u.shape[1] > X.shape[1]:
        raise ValueError("mtry out of range")
    feature = np.empty(cap, dtype=np.int32)
    threshold = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int32)
    right = np.empty(cap, dtype=np.int32)
    value = np.empty(cap, dtype=np.float64)
    cdef int[::1] fv = feature
    cdef double[::1] tv = threshold
    cdef int[::1] lv = left
    cdef int[::1] rv = right
    cdef double[::1] vv = value
    cdef Py_ssize_t* idx = <Py_ssize_t*> malloc(m * sizeof(Py_ssize_t))
    for k in range(m):
        idx[k] = sample[k]
    with nogil:
        count = _grow(X, y, idx, m, feat_u, classification, min_leaf, max_depth,
                      &fv[0], &tv[0], &lv[0], &rv[0], &vv[0])
    free(idx)
    if count < 0:
        raise RuntimeError("feature-draw buffer exhausted")
    return (feature[:count].copy(), threshold[:count].copy(), left[:count].copy(),
            right[:count].copy(), value[:count].copy())


cdef inline double _walk(
    const int* feature, const double* threshold, const int* left,
    const int* right, const double* value, const double[:, ::1] X, Py_ssize_t i,
) noexcept nogil:
    cdef Py_ssize_t node = 0
    while feature[node] >= 0:
        if X[i, feature[node]] <= threshold[node]:
            node = left[node]
        else:
            node = right[node]
    return value[node]


def predict_matrix(
    const int[::1] feature,
    const double[::1] threshold,
    const int[::1] left,
    const int[::1] right,
    const double[::1] value,
    const cnp.int64_t[::1] offsets,
    const double[:, ::1] X,
):
    """Per-tree predictions, shape (n_rows, n_trees)."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t B = offsets.shape[0] - 1
    cdef Py_ssize_t b, i, base
    out = np.empty((n, B), dtype=np.float64)
    cdef double[:, ::1] ov = out
    if n == 0 or B == 0:
        return out
    with nogil:
        for b in range(B):
            base = offsets[b]
            for i in range(n):
                ov[i, b] = _walk(&feature[base], &threshold[base], &left[base],
                                 &right[base], &value[base], X, i)
    return out


def predict_sum(
    const int[::1] feature,
    const double[::1] threshold,
    const int[::1] left,
    const int[::1] right,
    const double[::1] value,
    const cnp.int64_t[::1] offsets,
    const double[:, ::1] X,
):
    """Row sums of per-tree predictions, accumulated in tree order."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t B = offsets.shape[0] - 1
    cdef Py_ssize_t b, i, base
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] ov = out
    if n == 0 or B == 0:
        return out
    with nogil:
        for b in range(B):
            base = offsets[b]
            for i in range(n):
                ov[i] += _walk(&feature[base], &threshold[base], &left[base],
                               &right[base], &value[base], X, i)
    return out
