"""Weighted CART over binary features and discrete AdaBoost used as a
wrapper feature selector."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

POS, NEG = 1, 0


def _as_inputs(X, y, w):
    X = np.ascontiguousarray(X, dtype=np.uint8)
    y = np.ascontiguousarray(y, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) != len(w):
        raise ValueError("X, y and w must agree in length")
    if len(y) == 0:
        raise ValueError("empty training set")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive and finite")
    return X, y, w


def _impurity(p, n):
    """Mass-weighted Gini impurity ``(p + n) * gini`` = ``2pn / (p + n)``."""
    total = p + n
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, 2.0 * p * n / np.where(total > 0, total, 1.0), 0.0)
    return out


@dataclass
class DecisionTree:
    """Flat tree arrays; ``feature[i] == -1`` marks a leaf.

    ``absent[i]``/``present[i]`` are the children followed when the tested
    feature is 0/1.
    """

    feature: np.ndarray
    absent: np.ndarray
    present: np.ndarray
    pos_mass: np.ndarray
    neg_mass: np.ndarray
    count: np.ndarray
    n_features: int
    min_leaf: int = 5

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def leaf_label(self, i: int) -> int:
        return POS if self.pos_mass[i] > self.neg_mass[i] else NEG

    def leaf_score(self, i: int) -> float:
        total = self.pos_mass[i] + self.neg_mass[i]
        return float(self.pos_mass[i] / total) if total > 0 else 0.5

    def gini(self, i: int) -> float:
        total = self.pos_mass[i] + self.neg_mass[i]
        if total <= 0:
            return 0.0
        p = self.pos_mass[i] / total
        return float(1.0 - p * p - (1 - p) * (1 - p))

    def leaf_of(self, row) -> int:
        i = 0
        while self.feature[i] >= 0:
            i = self.present[i] if row[self.feature[i]] else self.absent[i]
        return int(i)

    def predict_row(self, row) -> tuple[int, float]:
        row = np.asarray(row)
        if row.shape != (self.n_features,):
            raise ValueError(f"row has {row.shape} entries, tree expects {self.n_features}")
        leaf = self.leaf_of(row)
        return self.leaf_label(leaf), self.leaf_score(leaf)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns")
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            f = self.feature[node[idx]]
            go = X[idx, f] != 0
            node[idx] = np.where(go, self.present[node[idx]], self.absent[node[idx]])
            active = self.feature[node] >= 0
        labels = np.where(self.pos_mass[node] > self.neg_mass[node], POS, NEG).astype(np.int8)
        total = self.pos_mass[node] + self.neg_mass[node]
        scores = np.where(total > 0, self.pos_mass[node] / np.where(total > 0, total, 1), 0.5)
        return labels, scores

    def used_features(self) -> list[int]:
        return sorted({int(f) for f in self.feature if f >= 0})

    def leaves(self) -> list[int]:
        return np.flatnonzero(self.feature < 0).tolist()

    def to_dict(self, descriptors: list[str] | None = None) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            rec = {"id": i, "pos_mass": float(self.pos_mass[i]), "neg_mass": float(self.neg_mass[i]),
                   "count": int(self.count[i])}
            if self.feature[i] >= 0:
                rec.update(feature=int(self.feature[i]), absent=int(self.absent[i]), present=int(self.present[i]))
                if descriptors is not None:
                    rec["descriptor"] = descriptors[int(self.feature[i])]
            nodes.append(rec)
        return {"type": "cart", "n_features": self.n_features, "min_leaf": self.min_leaf, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        nodes = d["nodes"]
        return cls(
            feature=np.array([n.get("feature", -1) for n in nodes], dtype=np.int64),
            absent=np.array([n.get("absent", -1) for n in nodes], dtype=np.int64),
            present=np.array([n.get("present", -1) for n in nodes], dtype=np.int64),
            pos_mass=np.array([n["pos_mass"] for n in nodes], dtype=np.float64),
            neg_mass=np.array([n["neg_mass"] for n in nodes], dtype=np.float64),
            count=np.array([n["count"] for n in nodes], dtype=np.int64),
            n_features=int(d["n_features"]),
            min_leaf=int(d.get("min_leaf", 5)),
        )


def best_split(X, y, w, rows, used, min_leaf):
    """Feature with the largest positive Gini decrease at a node, or -1.

    Children must each hold at least ``min_leaf`` raw examples; ties go to
    the lowest feature index.
    """
    pos, neg, cnt = kernels.feature_masses(X, rows, w, y)
    yr = y[rows]
    P, N = float(w[rows][yr == POS].sum()), float(w[rows][yr == NEG].sum())
    n = len(rows)
    apos = np.maximum(P - pos, 0.0)
    aneg = np.maximum(N - neg, 0.0)
    gain = _impurity(P, N) - _impurity(pos, neg) - _impurity(apos, aneg)
    valid = (cnt >= min_leaf) & (n - cnt >= min_leaf)
    if used:
        valid[list(used)] = False
    tol = 1e-12 * (P + N)
    gain = np.where(valid, gain, -np.inf)
    if gain.size == 0:
        return -1, 0.0
    g = float(gain.max())
    if not g > tol:
        return -1, 0.0
    j = int(np.flatnonzero(gain >= g - tol)[0])
    return j, float(gain[j])


def train_cart(X, y, w, min_leaf: int = 5) -> DecisionTree:
    """Grow a weighted CART tree greedily on binary features."""
    X, y, w = _as_inputs(X, y, w)
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    feature, absent, present, pm, nm, cnt = [], [], [], [], [], []

    def grow(rows: np.ndarray, used: frozenset) -> int:
        i = len(feature)
        yr = y[rows]
        p = float(w[rows][yr == POS].sum())
        n = float(w[rows][yr == NEG].sum())
        feature.append(-1)
        absent.append(-1)
        present.append(-1)
        pm.append(p)
        nm.append(n)
        cnt.append(len(rows))
        if len(rows) < 2 * min_leaf or p == 0 or n == 0:
            return i
        j, _ = best_split(X, y, w, rows, used, min_leaf)
        if j < 0:
            return i
        mask = X[rows, j] != 0
        feature[i] = j
        child_used = used | {j}
        absent[i] = grow(rows[~mask], child_used)
        present[i] = grow(rows[mask], child_used)
        return i

    grow(np.arange(len(y), dtype=np.int64), frozenset())
    return DecisionTree(
        np.array(feature, dtype=np.int64), np.array(absent, dtype=np.int64),
        np.array(present, dtype=np.int64), np.array(pm), np.array(nm),
        np.array(cnt, dtype=np.int64), X.shape[1], min_leaf,
    )


def tree_predict(tree: DecisionTree, row) -> tuple[int, float]:
    return tree.predict_row(row)


@dataclass
class Ensemble:
    trees: list[DecisionTree] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)
    stopped: str = "max_rounds"

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X)
        out = np.zeros(len(X))
        for tree, alpha in zip(self.trees, self.alphas):
            labels, _ = tree.predict(X)
            out += alpha * (2.0 * labels - 1.0)
        return out

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) > 0).astype(np.int8)

    def selected_features(self) -> list[int]:
        used: set[int] = set()
        for tree in self.trees:
            used.update(tree.used_features())
        return sorted(used)


def adaboost_select(X, y, w0, max_rounds: int = 10, min_leaf: int = 5) -> tuple[Ensemble, list[int]]:
    """Discrete two-class AdaBoost with CART weak learners.

    Returns the ensemble and the sorted indices of every feature tested by
    any retained tree. A perfect first fit stops early with a capped alpha.
    """
    X, y, w0 = _as_inputs(X, y, w0)
    total = float(w0.sum())
    w = w0 / total
    sign = 2.0 * y - 1.0
    eps_floor = 1.0 / (2.0 * total)
    ens = Ensemble()
    for _ in range(max_rounds):
        tree = train_cart(X, y, w, min_leaf)
        h, _ = tree.predict(X)
        miss = h != y
        eps = float(w[miss].sum() / w.sum())
        ens.weights.append(w.copy())
        if eps <= 0.0:
            e0 = min(eps_floor, 0.5)
            alpha = 0.5 * math.log((1 - e0) / e0) if e0 < 0.5 else 0.0
            ens.trees.append(tree)
            ens.alphas.append(alpha)
            ens.errors.append(eps)
            ens.stopped = "perfect_fit"
            break
        if eps >= 0.5:
            ens.stopped = "weak_learner_at_chance"
            break
        alpha = 0.5 * math.log((1 - eps) / eps)
        ens.trees.append(tree)
        ens.alphas.append(alpha)
        ens.errors.append(eps)
        w = w * np.exp(-alpha * sign * (2.0 * h - 1.0))
        w = w / w.sum()
    return ens, ens.selected_features()
