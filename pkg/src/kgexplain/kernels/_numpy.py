"""Pure-numpy implementations of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and the
same result (up to row order for ``simple_paths``).
"""

import numpy as np


def _expand(indptr, last, allowed):
    """Adjacency slots of every node in ``last`` whose ``allowed`` flag is set.

    Returns ``(parent, slot)``: for each emitted slot, the row of ``last`` it
    came from.
    """
    start = indptr[last]
    counts = np.where(allowed, indptr[last + 1] - start, 0)
    total = int(counts.sum())
    parent = np.repeat(np.arange(len(last)), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return parent, start[parent] + offsets


def bfs_within(indptr, adj_node, edge_ok, node_ok, expand_ok, root, k):
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[root] = 0
    frontier = np.array([root], dtype=np.int64)
    for d in range(1, k + 1):
        if frontier.size == 0:
            break
        allowed = expand_ok[frontier].copy()
        if d == 1:
            allowed[:] = True
        _, slots = _expand(indptr, frontier, allowed)
        slots = slots[edge_ok[slots]]
        targets = adj_node[slots]
        targets = targets[node_ok[targets]]
        targets = np.unique(targets)
        targets = targets[dist[targets] < 0]
        dist[targets] = d
        frontier = targets
    reached = np.flatnonzero(dist > 0)
    return reached.astype(np.int64)


def simple_paths(indptr, adj_node, edge_ok, node_ok, expand_ok, root, k):
    """All simple paths of length 1..k from ``root`` as rows of adjacency slots.

    Rows are padded with -1 after the path's last slot.
    """
    nodes = np.array([[root]], dtype=np.int64)
    slots_so_far = np.empty((1, 0), dtype=np.int64)
    levels = []
    for depth in range(1, k + 1):
        if nodes.shape[0] == 0:
            break
        last = nodes[:, -1]
        allowed = expand_ok[last].copy() if depth > 1 else np.ones(1, dtype=np.bool_)
        parent, slots = _expand(indptr, last, allowed)
        keep = edge_ok[slots]
        parent, slots = parent[keep], slots[keep]
        targets = adj_node[slots]
        keep = node_ok[targets] & ~(nodes[parent] == targets[:, None]).any(axis=1)
        parent, slots, targets = parent[keep], slots[keep], targets[keep]
        nodes = np.hstack([nodes[parent], targets[:, None]])
        slots_so_far = np.hstack([slots_so_far[parent], slots[:, None]])
        padded = np.full((slots_so_far.shape[0], k), -1, dtype=np.int64)
        padded[:, :depth] = slots_so_far
        levels.append(padded)
    if not levels:
        return np.empty((0, k), dtype=np.int64)
    return np.vstack(levels)


def feature_masses(X, rows, w, y):
    """Per-feature weighted positive mass, negative mass and raw count of
    the examples in ``rows`` where the feature is present."""
    Xs = X[rows].astype(np.float64)
    wr = w[rows]
    yr = y[rows]
    pos = Xs.T @ (wr * yr)
    neg = Xs.T @ (wr * (1 - yr))
    count = Xs.sum(axis=0)
    return pos, neg, count.astype(np.int64)


def auc_score(pos_scores, neg_scores):
    """Mann-Whitney AUC via sorted search; ties count one half."""
    neg_sorted = np.sort(neg_scores)
    below = np.searchsorted(neg_sorted, pos_scores, side="left")
    upto = np.searchsorted(neg_sorted, pos_scores, side="right")
    wins = below.sum() + 0.5 * (upto - below).sum()
    return float(wins) / (len(pos_scores) * len(neg_scores))
