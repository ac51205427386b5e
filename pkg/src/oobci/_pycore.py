"""Pure-Python/numpy fallback for the tree kernels in ``_core.pyx``.

Every arithmetic step mirrors the compiled kernel so both backends
produce bit-identical trees: sequential summation (``cumsum`` rather
than the pairwise ``sum``), the same partial Fisher-Yates feature draw,
strict-improvement split selection, and stable partitioning.
"""

import numpy as np


def _seq_sum(v):
    return float(np.cumsum(v)[-1])


def grow_tree(X, y, sample, feat_u, classification, min_leaf, max_depth):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    idx = np.array(sample, dtype=np.intp)
    m = idx.shape[0]
    if m < 1:
        raise ValueError("empty bootstrap sample")
    p = X.shape[1]
    n_rows, mtry = feat_u.shape
    if mtry < 1 or mtry > p:
        raise ValueError("mtry out of range")

    feature, threshold, left, right, value = [0], [0.0], [-1], [-1], [0.0]
    stack = [(0, m, 0, 0)]
    row = 0
    node_count = 1
    while stack:
        start, end, depth, nid = stack.pop()
        cnt = end - start
        ys = y[idx[start:end]]
        total = _seq_sum(ys)
        y0 = ys[0]
        pure = bool(np.all(ys == y0))

        feature[nid] = -1
        threshold[nid] = 0.0
        left[nid] = -1
        right[nid] = -1
        if pure:
            value[nid] = float(y0)
        elif classification:
            value[nid] = 1.0 if 2.0 * total > cnt else 0.0
        else:
            value[nid] = total / cnt

        if pure or cnt < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        if row >= n_rows:
            raise RuntimeError("feature-draw buffer exhausted")

        perm = list(range(p))
        for k in range(mtry):
            j = k + int(feat_u[row, k] * float(p - k))
            if j >= p:
                j = p - 1
            perm[k], perm[j] = perm[j], perm[k]
        row += 1
        chosen = sorted(perm[:mtry])

        if classification:
            c1 = total
            c0 = cnt - c1
            parent = (c1 * c1 + c0 * c0) / cnt
        else:
            parent = total * total / cnt
        best = parent
        best_f = -1
        best_t = 0.0

        rows = idx[start:end]
        for f in chosen:
            vals = X[rows, f]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            if sv[0] == sv[-1]:
                continue
            cs = np.cumsum(ys[order])
            tot_f = cs[-1]
            nl = np.arange(1, cnt, dtype=np.float64)
            nr = cnt - nl
            ok = (sv[:-1] != sv[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
            if not ok.any():
                continue
            sl = cs[:-1]
            sr = tot_f - sl
            if classification:
                cl0 = nl - sl
                cr0 = nr - sr
                proxy = (sl * sl + cl0 * cl0) / nl + (sr * sr + cr0 * cr0) / nr
            else:
                proxy = sl * sl / nl + sr * sr / nr
            proxy = np.where(ok, proxy, -np.inf)
            k = int(np.argmax(proxy))
            if proxy[k] > best:
                best = float(proxy[k])
                best_f = f
                a, b = sv[k], sv[k + 1]
                thr = a + (b - a) * 0.5
                if thr >= b:
                    thr = a
                best_t = float(thr)

        if best_f < 0:
            continue

        mask = X[rows, best_f] <= best_t
        nleft = int(mask.sum())
        idx[start:end] = np.concatenate([rows[mask], rows[~mask]])

        feature[nid] = best_f
        threshold[nid] = best_t
        left[nid] = node_count
        right[nid] = node_count + 1
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
        stack.append((start + nleft, end, depth + 1, node_count + 1))
        stack.append((start, start + nleft, depth + 1, node_count))
        node_count += 2

    return (
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(value, dtype=np.float64),
    )


def _tree_predict(feature, threshold, left, right, value, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        nd = node[active]
        go_left = X[active, feature[nd]] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return value[node]


def predict_matrix(feature, threshold, left, right, value, offsets, X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    B = len(offsets) - 1
    out = np.empty((X.shape[0], B), dtype=np.float64)
    for b in range(B):
        s, e = offsets[b], offsets[b + 1]
        out[:, b] = _tree_predict(feature[s:e], threshold[s:e], left[s:e],
                                  right[s:e], value[s:e], X)
    return out


def predict_sum(feature, threshold, left, right, value, offsets, X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros(X.shape[0], dtype=np.float64)
    for b in range(len(offsets) - 1):
        s, e = offsets[b], offsets[b + 1]
        out += _tree_predict(feature[s:e], threshold[s:e], left[s:e],
                             right[s:e], value[s:e], X)
    return out
