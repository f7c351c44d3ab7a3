"""numba-compiled implementations of the hot kernels (see ``_numpy``)."""

import numpy as np
from numba import njit

_opts = dict(cache=True, nogil=True)


@njit(**_opts)
def bfs_within(indptr, adj_node, edge_ok, node_ok, expand_ok, root, k):
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[root] = 0
    queue = np.empty(n, dtype=np.int64)
    queue[0] = root
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        d = dist[u]
        if d >= k:
            continue
        if u != root and not expand_ok[u]:
            continue
        for s in range(indptr[u], indptr[u + 1]):
            if not edge_ok[s]:
                continue
            v = adj_node[s]
            if dist[v] >= 0 or not node_ok[v]:
                continue
            dist[v] = d + 1
            queue[tail] = v
            tail += 1
    count = 0
    for i in range(n):
        if dist[i] > 0:
            count += 1
    out = np.empty(count, dtype=np.int64)
    j = 0
    for i in range(n):
        if dist[i] > 0:
            out[j] = i
            j += 1
    return out


@njit(**_opts)
def simple_paths(indptr, adj_node, edge_ok, node_ok, expand_ok, root, k):
    cap = 64
    out = np.full((cap, k), -1, dtype=np.int64)
    n_out = 0
    stack_node = np.empty(k + 1, dtype=np.int64)
    cursor = np.empty(k + 1, dtype=np.int64)
    slot_at = np.empty(k, dtype=np.int64)
    stack_node[0] = root
    cursor[0] = indptr[root]
    depth = 0
    while depth >= 0:
        u = stack_node[depth]
        expandable = depth < k and (depth == 0 or expand_ok[u])
        if not expandable or cursor[depth] >= indptr[u + 1]:
            depth -= 1
            continue
        s = cursor[depth]
        cursor[depth] += 1
        if not edge_ok[s]:
            continue
        v = adj_node[s]
        if not node_ok[v]:
            continue
        seen = False
        for i in range(depth + 1):
            if stack_node[i] == v:
                seen = True
                break
        if seen:
            continue
        slot_at[depth] = s
        if n_out == cap:
            cap *= 2
            grown = np.full((cap, k), -1, dtype=np.int64)
            grown[:n_out] = out[:n_out]
            out = grown
        for i in range(depth + 1):
            out[n_out, i] = slot_at[i]
        n_out += 1
        depth += 1
        stack_node[depth] = v
        cursor[depth] = indptr[v]
    return out[:n_out].copy()


@njit(**_opts)
def feature_masses(X, rows, w, y):
    n_features = X.shape[1]
    pos = np.zeros(n_features)
    neg = np.zeros(n_features)
    count = np.zeros(n_features, dtype=np.int64)
    for r in rows:
        wr = w[r]
        positive = y[r] != 0
        for j in range(n_features):
            if X[r, j]:
                count[j] += 1
                if positive:
                    pos[j] += wr
                else:
                    neg[j] += wr
    return pos, neg, count


@njit(**_opts)
def auc_score(pos_scores, neg_scores):
    pos = np.sort(pos_scores)
    neg = np.sort(neg_scores)
    wins = 0.0
    lo = 0
    hi = 0
    for a in pos:
        # lo: negatives strictly below a, hi: negatives at or below a
        while lo < len(neg) and neg[lo] < a:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < len(neg) and neg[hi] <= a:
            hi += 1
        wins += lo + 0.5 * (hi - lo)
    return wins / (len(pos_scores) * len(neg_scores))
