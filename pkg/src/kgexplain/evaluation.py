"""Metrics, cross-validation, robustness controls, Welch t-tests and
inter-rater agreement."""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

from . import kernels
from .dataset import (
    POS, NEG, DataError, FoldAssignment, LabeledDataset, NodeCriteria, balance_weights,
    draw_random_negatives, make_folds, shuffle_labels,
)
from .ripper import RipperParams, train_ripper
from .tree import adaboost_select, train_cart

METRIC_NAMES = ("precision", "recall", "f1", "accuracy", "auc_roc")
LEARNERS = ("cart", "ripper")
ANSWERS = ("yes", "maybe", "no")


class MetricError(ValueError):
    """A metric is undefined for the given input."""


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    auc_roc: float
    no_predicted_positive: bool = False

    def as_dict(self) -> dict:
        d = {k: _clean(getattr(self, k)) for k in METRIC_NAMES}
        d["no_predicted_positive"] = self.no_predicted_positive
        return d


def _clean(x: float):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


def auc_roc(y_true, y_score) -> float:
    """Probability that a random positive outscores a random negative, ties 1/2."""
    y = np.asarray(y_true)
    s = np.asarray(y_score, dtype=np.float64)
    pos, neg = s[y == POS], s[y == NEG]
    if len(pos) == 0 or len(neg) == 0:
        raise MetricError("AUC needs at least one positive and one negative example")
    return float(kernels.auc_score(np.ascontiguousarray(pos), np.ascontiguousarray(neg)))


def compute_metrics(y_true, y_pred, y_score) -> Metrics:
    y = np.asarray(y_true)
    p = np.asarray(y_pred)
    if not (len(y) == len(p) == len(y_score)):
        raise ValueError("y_true, y_pred and y_score differ in length")
    if len(y) == 0:
        raise ValueError("no examples")
    tp = int(np.sum((y == POS) & (p == POS)))
    fp = int(np.sum((y == NEG) & (p == POS)))
    fn = int(np.sum((y == POS) & (p == NEG)))
    flag = tp + fp == 0
    precision = 0.0 if flag else tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = float(np.mean(y == p))
    return Metrics(precision, recall, f1, accuracy, auc_roc(y, y_score), flag)


def mean_metrics(ms: Sequence[Metrics]) -> Metrics:
    arr = np.array([[getattr(m, k) for k in METRIC_NAMES] for m in ms], dtype=np.float64)
    with np.errstate(invalid="ignore"):
        means = [float(np.nanmean(c)) if np.any(~np.isnan(c)) else math.nan for c in arr.T]
    return Metrics(*means, no_predicted_positive=any(m.no_predicted_positive for m in ms))


# --------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    metrics: Metrics
    selected: list[int]
    rounds: int
    stopped: str
    note: str = ""


@dataclass
class CVReport:
    learner: str
    folds: list[FoldResult]
    mean: Metrics
    descriptors: list[str] | None = None
    seed: int | None = None

    @property
    def n_folds(self) -> int:
        return len(self.folds)

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(f.metrics, name) for f in self.folds], dtype=np.float64)

    def selected_descriptors(self, fold: int | None = None) -> list[str]:
        idx = self.folds[fold].selected if fold is not None else sorted({j for f in self.folds for j in f.selected})
        if self.descriptors is None:
            return [str(j) for j in idx]
        return [self.descriptors[j] for j in idx]

    def selection_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for f in self.folds:
            for j in f.selected:
                counts[j] = counts.get(j, 0) + 1
        return counts

    def to_dict(self) -> dict:
        folds = []
        for f in self.folds:
            rec = {"fold": f.fold, "n_train": f.n_train, "n_test": f.n_test, "metrics": f.metrics.as_dict(),
                   "rounds": f.rounds, "stopped": f.stopped, "selected": self.selected_descriptors(f.fold)}
            if f.note:
                rec["note"] = f.note
            folds.append(rec)
        return {"learner": self.learner, "n_folds": self.n_folds, "seed": self.seed, "folds": folds,
                "mean": self.mean.as_dict()}


def fit_final(learner: str, X, y, w, min_leaf: int = 5, ripper_params: RipperParams | None = None):
    if learner == "cart":
        return train_cart(X, y, w, min_leaf)
    if learner == "ripper":
        return train_ripper(X, y, w, ripper_params)
    raise ValueError(f"unknown learner {learner!r} (expected one of {LEARNERS})")


def _run_fold(X, y, folds: FoldAssignment, f: int, learner: str, max_rounds: int, min_leaf: int,
              ripper_params: RipperParams | None) -> FoldResult:
    tr, te = folds.train_index(f), folds.test_index(f)
    ytr = y[tr]
    if len(np.unique(ytr)) < 2:
        raise DataError(f"fold {f}: training part holds a single class")
    w = balance_weights(ytr)
    Xtr = X[tr]
    ens, selected = adaboost_select(Xtr, ytr, w, max_rounds=max_rounds, min_leaf=min_leaf)
    cols = np.asarray(selected, dtype=np.int64)
    model = fit_final(learner, Xtr[:, cols], ytr, w, min_leaf, ripper_params)
    labels, scores = model.predict(X[te][:, cols])
    note = ""
    try:
        m = compute_metrics(y[te], labels, scores)
    except MetricError as exc:
        yt = y[te]
        tp = int(np.sum((yt == POS) & (labels == POS)))
        fp = int(np.sum((yt == NEG) & (labels == POS)))
        fn = int(np.sum((yt == POS) & (labels == NEG)))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        m = Metrics(prec, rec, f1, float(np.mean(yt == labels)), math.nan, tp + fp == 0)
        note = str(exc)
    return FoldResult(f, len(tr), len(te), m, list(selected), len(ens.trees), ens.stopped, note)


def cross_validate(
    X,
    y,
    learner: str = "cart",
    folds: FoldAssignment | int = 10,
    seed: int = 0,
    descriptors: list[str] | None = None,
    max_rounds: int = 10,
    min_leaf: int = 5,
    ripper_params: RipperParams | None = None,
    threads: int = 1,
) -> CVReport:
    """Per fold: AdaBoost feature selection on the training part only, the
    final learner on the selected columns, metrics on the held-out part."""
    X = np.ascontiguousarray(np.asarray(X), dtype=np.uint8)
    y = np.asarray(y, dtype=np.int64)
    if learner not in LEARNERS:
        raise ValueError(f"unknown learner {learner!r} (expected one of {LEARNERS})")
    if isinstance(folds, int):
        folds = make_folds(len(y), folds, seed)
    if len(folds.folds) != len(y):
        raise DataError("fold assignment does not match the number of examples")
    rp = ripper_params or RipperParams(seed=seed)

    def work(f: int) -> FoldResult:
        return _run_fold(X, y, folds, f, learner, max_rounds, min_leaf, rp)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, range(folds.n_folds)))
    else:
        results = [work(f) for f in range(folds.n_folds)]
    return CVReport(learner, results, mean_metrics([r.metrics for r in results]), descriptors, folds.seed)


# --------------------------------------------------------------------------
# significance


@dataclass
class TTest:
    t: float
    p: float
    df: float

    def as_dict(self) -> dict:
        return {"t": _clean(self.t), "p": _clean(self.p), "df": _clean(self.df)}


def t_test(a, b) -> TTest:
    """Two-sided Welch two-sample t-test."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 values")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return TTest(0.0, 1.0, float(len(a) + len(b) - 2))
        return TTest(math.copysign(math.inf, diff), 0.0, float(len(a) + len(b) - 2))
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    p = 2.0 * float(sps.t.sf(abs(t), df))
    return TTest(float(t), min(p, 1.0), float(df))


# --------------------------------------------------------------------------
# robustness


@dataclass
class RobustnessReport:
    baseline: CVReport
    shuffled: CVReport | None
    random_runs: list[CVReport]
    pool_sizes: list[int]
    overlap: dict[int, int]
    t_tests: dict[str, TTest]

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "shuffled": self.shuffled.to_dict() if self.shuffled else None,
            "random_negative_runs": [
                dict(r.to_dict(), index=i + 1, pool_size=s)
                for i, (r, s) in enumerate(zip(self.random_runs, self.pool_sizes))
            ],
            "overlap": {str(k): v for k, v in sorted(self.overlap.items(), reverse=True)},
            "t_tests": {k: v.as_dict() for k, v in self.t_tests.items()},
        }


def overlap_counts(selected_sets: Sequence[Iterable[str]], thresholds: Iterable[int] = (5, 4, 3, 2)) -> dict[int, int]:
    """Number of features present in at least ``j`` of the runs, per ``j``."""
    counts: dict[str, int] = {}
    for s in selected_sets:
        for d in set(s):
            counts[d] = counts.get(d, 0) + 1
    return {j: sum(1 for c in counts.values() if c >= j) for j in thresholds}


def robustness_suite(
    g,
    expert: LabeledDataset,
    build: Callable[[LabeledDataset], tuple[np.ndarray, list[str]]],
    criteria: NodeCriteria | None,
    learner: str = "cart",
    n_folds: int = 10,
    seed: int = 0,
    n_random: int = 5,
    shuffle: bool = True,
    threads: int = 1,
) -> RobustnessReport:
    """Expert baseline, shuffled-label control and random-negative runs.

    ``build`` turns a labeled root set into its feature matrix (rows in the
    dataset's order) and column descriptors; random-negative runs re-mine
    because their roots differ.
    """

    def cv(ds: LabeledDataset, s: int) -> CVReport:
        X, desc = build(ds)
        return cross_validate(X, ds.labels, learner, make_folds(len(ds), n_folds, s), s, desc, threads=threads)

    baseline = cv(expert, seed)
    shuffled = cv(shuffle_labels(expert, seed), seed) if shuffle else None
    runs, pools = [], []
    for i in range(1, n_random + 1):
        if criteria is None:
            raise ValueError("random-negative runs need node criteria")
        ds, pool = draw_random_negatives(g, expert.positives(), expert.negatives(), expert.n_neg,
                                         seed + i, criteria, index=i)
        runs.append(cv(ds, seed + i))
        pools.append(pool)
    overlap = overlap_counts([r.selected_descriptors() for r in runs]) if runs else {}
    tests = {}
    if runs:
        for name in METRIC_NAMES:
            pooled = np.concatenate([r.metric(name) for r in runs])
            tests[name] = t_test(pooled, baseline.metric(name))
    return RobustnessReport(baseline, shuffled, runs, pools, overlap, tests)


# --------------------------------------------------------------------------
# inter-rater agreement


@dataclass
class AnnotationTable:
    rows: list[tuple[str, str, str]]

    def __post_init__(self):
        seen = set()
        for fid, rater, ans in self.rows:
            if ans not in ANSWERS:
                raise DataError(f"answer {ans!r} for feature {fid} is not one of {ANSWERS}")
            if (fid, rater) in seen:
                raise DataError(f"rater {rater} answered feature {fid} twice")
            seen.add((fid, rater))

    @classmethod
    def from_csv(cls, path: str | Path) -> "AnnotationTable":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:3]] != ["feature_id", "rater", "answer"]:
                raise DataError(f"{path}: expected header 'feature_id,rater,answer'")
            rows = [(r[0].strip(), r[1].strip(), r[2].strip().lower()) for r in reader if r and "".join(r).strip()]
        return cls(rows)

    def raters(self) -> list[str]:
        return sorted({r for _, r, _ in self.rows})

    def features(self) -> list[str]:
        return sorted({f for f, _, _ in self.rows})

    def answers(self) -> dict[tuple[str, str], str]:
        return {(f, r): a for f, r, a in self.rows}


def kappa_from_counts(table) -> float:
    """Cohen's kappa from a square contingency table of counts."""
    t = np.asarray(table, dtype=np.float64)
    n = t.sum()
    if n <= 0:
        raise ValueError("empty contingency table")
    po = np.trace(t) / n
    pe = float(np.dot(t.sum(axis=0), t.sum(axis=1))) / (n * n)
    if pe >= 1.0:
        return 1.0
    return float((po - pe) / (1.0 - pe))


def _collapse(answer: str) -> str:
    return "yes" if answer in ("yes", "maybe") else "no"


@dataclass
class KappaReport:
    kappa_3way: float
    kappa_2way: float
    pairwise_3way: dict[tuple[str, str], float]
    pairwise_2way: dict[tuple[str, str], float]

    def to_dict(self) -> dict:
        return {
            "kappa_3way": self.kappa_3way,
            "kappa_2way": self.kappa_2way,
            "pairwise_3way": {f"{a}|{b}": k for (a, b), k in sorted(self.pairwise_3way.items())},
            "pairwise_2way": {f"{a}|{b}": k for (a, b), k in sorted(self.pairwise_2way.items())},
        }


def cohen_kappa(table: AnnotationTable, collapse: bool = False) -> tuple[float, dict[tuple[str, str], float]]:
    """Mean pairwise Cohen's kappa over rater pairs, plus the pairwise values."""
    cats = ("yes", "no") if collapse else ANSWERS
    index = {c: i for i, c in enumerate(cats)}
    answers = table.answers()
    raters = table.raters()
    if len(raters) < 2:
        raise DataError("kappa needs at least two raters")
    pairwise = {}
    for a, b in itertools.combinations(raters, 2):
        common = sorted({f for f, r in answers if r == a} & {f for f, r in answers if r == b})
        if not common:
            raise DataError(f"raters {a} and {b} share no annotated features")
        counts = np.zeros((len(cats), len(cats)))
        for f in common:
            x, z = answers[(f, a)], answers[(f, b)]
            if collapse:
                x, z = _collapse(x), _collapse(z)
            counts[index[x], index[z]] += 1
        pairwise[(a, b)] = kappa_from_counts(counts)
    return float(np.mean(list(pairwise.values()))), pairwise


def kappa_report(table: AnnotationTable) -> KappaReport:
    k3, p3 = cohen_kappa(table, collapse=False)
    k2, p2 = cohen_kappa(table, collapse=True)
    return KappaReport(k3, k2, p3, p2)
