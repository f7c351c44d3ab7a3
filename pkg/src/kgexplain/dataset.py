"""Labeled root sets, fold assignment, class balancing and the datasets
used by the robustness controls (shuffled labels, random negatives)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ConfigError, as_list, read_kv
from .graph import CanonicalGraph, KnowledgeGraph

POS, NEG = 1, 0
_LABEL_TOKENS = {"pos": POS, "neg": NEG}


class DataError(ValueError):
    """Input data is inconsistent (bad labels, duplicates, empty classes)."""


@dataclass
class LabeledDataset:
    roots: list[str]
    labels: np.ndarray
    provenance: str = "expert"
    unresolved: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if len(self.roots) != len(self.labels):
            raise DataError("roots and labels differ in length")
        if len(set(self.roots)) != len(self.roots):
            raise DataError("duplicate roots in dataset")

    def __len__(self) -> int:
        return len(self.roots)

    @property
    def n_pos(self) -> int:
        return int((self.labels == POS).sum())

    @property
    def n_neg(self) -> int:
        return int((self.labels == NEG).sum())

    def positives(self) -> list[str]:
        return [r for r, y in zip(self.roots, self.labels) if y == POS]

    def negatives(self) -> list[str]:
        return [r for r, y in zip(self.roots, self.labels) if y == NEG]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["root_iri", "label"])
            for r, y in zip(self.roots, self.labels.tolist()):
                w.writerow([r, "pos" if y == POS else "neg"])


def load_labels(path: str | Path, g: KnowledgeGraph | None = None) -> LabeledDataset:
    """Read a ``root_iri,label`` CSV (labels ``pos``/``neg``).

    With a graph, IRIs are resolved to canonical node IRIs; IRIs absent from
    the graph are listed in ``unresolved`` and left out.
    """
    roots: list[str] = []
    labels: list[int] = []
    unresolved: list[str] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["root_iri", "label"]:
            raise DataError(f"{path}: expected header 'root_iri,label'")
        for line_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{line_no}: expected two columns")
            iri, token = row[0].strip(), row[1].strip().lower()
            if token not in _LABEL_TOKENS:
                raise DataError(f"{path}:{line_no}: unknown label {row[1]!r} (expected pos or neg)")
            if iri in seen:
                raise DataError(f"{path}:{line_no}: duplicate root {iri} (first on line {seen[iri]})")
            seen[iri] = line_no
            if g is not None:
                if iri not in g.index:
                    unresolved.append(iri)
                    continue
                if isinstance(g, CanonicalGraph):
                    iri = g.iri(g.resolve(iri))
            if iri in roots:
                raise DataError(f"{path}:{line_no}: root {row[0]} merges with an earlier root into {iri}")
            roots.append(iri)
            labels.append(_LABEL_TOKENS[token])
    return LabeledDataset(roots, np.array(labels, dtype=np.int8), "expert", unresolved)


@dataclass
class FoldAssignment:
    n_folds: int
    folds: np.ndarray
    seed: int

    def test_index(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.folds == f)

    def train_index(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.folds != f)

    def sizes(self) -> list[int]:
        return np.bincount(self.folds, minlength=self.n_folds).tolist()

    def write_csv(self, path: str | Path, roots: list[str]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["root_iri", "fold"])
            for r, f in zip(roots, self.folds.tolist()):
                w.writerow([r, f])


def make_folds(ds: LabeledDataset | int, n: int = 10, seed: int = 0) -> FoldAssignment:
    """Unstratified random partition into ``n`` folds whose sizes differ by at most one."""
    size = ds if isinstance(ds, int) else len(ds)
    if n < 2:
        raise DataError("need at least 2 folds")
    if n > size:
        raise DataError(f"{n} folds requested for {size} examples")
    rng = np.random.default_rng(seed)
    folds = np.empty(size, dtype=np.int64)
    folds[rng.permutation(size)] = np.arange(size) % n
    return FoldAssignment(n, folds, seed)


def balance_weights(labels) -> np.ndarray:
    """Weight ``N / (2 * |class|)`` per example so both classes weigh N/2."""
    y = np.asarray(labels.labels if isinstance(labels, LabeledDataset) else labels)
    n = len(y)
    n_pos = int((y == POS).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("both classes must be present to balance weights")
    return np.where(y == POS, n / (2.0 * n_pos), n / (2.0 * n_neg))


def shuffle_labels(ds: LabeledDataset, seed: int) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    return LabeledDataset(list(ds.roots), rng.permutation(ds.labels), "shuffled")


@dataclass
class NodeCriteria:
    """Conjunction of node conditions; each list is a disjunction.

    ``classes``: instantiates one of them (directly or indirectly);
    ``namespaces``: one of the node's IRIs starts with one of them;
    ``predicates``: has an outgoing edge with one of them, whose object
    IRI starts with one of ``object_namespaces`` when that is given.
    """

    classes: tuple[str, ...] = ()
    namespaces: tuple[str, ...] = ()
    predicates: tuple[str, ...] = ()
    object_namespaces: tuple[str, ...] = ()

    @classmethod
    def from_file(cls, path: str | Path) -> "NodeCriteria":
        kv = read_kv(path)
        known = {"classes", "namespaces", "predicates", "object_namespaces"}
        unknown = set(kv) - known
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        return cls(**{k: tuple(as_list(v)) for k, v in kv.items()})

    def as_dict(self) -> dict:
        return {k: list(v) for k, v in self.__dict__.items()}

    def eligible(self, g: KnowledgeGraph) -> list[int]:
        nodes = np.asarray(list(g.nodes()), dtype=np.int64)
        keep = np.ones(len(nodes), dtype=np.bool_)
        if self.classes:
            cls_ids = [g.index[c] for c in self.classes if c in g.index]
            if isinstance(g, CanonicalGraph):
                cls_ids = [g.canonical(c) for c in cls_ids]
            keep &= g.instances_mask(cls_ids)[nodes]
        if self.namespaces:
            ns = tuple(self.namespaces)
            keep &= np.array([any(i.startswith(ns) for i in g.member_iris(int(n))) for n in nodes], dtype=np.bool_)
        if self.predicates:
            preds = {g.index[p] for p in self.predicates if p in g.index}
            ons = tuple(self.object_namespaces)

            def has_edge(n: int) -> bool:
                for p, o in g.out_edges(n):
                    if p in preds and (not ons or any(i.startswith(ons) for i in g.member_iris(o))):
                        return True
                return False

            keep &= np.array([has_edge(int(n)) if k else False for n, k in zip(nodes, keep)], dtype=np.bool_)
        return nodes[keep].tolist()


def draw_random_negatives(
    g: KnowledgeGraph,
    positives: Iterable[str],
    exclusions: Iterable[str],
    n: int,
    seed: int,
    criteria: NodeCriteria,
    index: int = 1,
) -> tuple[LabeledDataset, int]:
    """Positives plus ``n`` eligible nodes drawn without replacement as negatives.

    Returns the dataset and the size of the eligible pool.
    """
    positives = list(positives)
    banned = set(positives) | set(exclusions)
    if isinstance(g, CanonicalGraph):
        banned |= {g.iri(g.resolve(i)) for i in banned if i in g.index}
    pool = sorted(iri for iri in (g.iri(i) for i in criteria.eligible(g)) if iri not in banned)
    if len(pool) < n:
        raise DataError(f"eligible pool has {len(pool)} nodes, fewer than the {n} requested")
    rng = np.random.default_rng(seed)
    drawn = [pool[i] for i in sorted(rng.choice(len(pool), size=n, replace=False).tolist())]
    roots = positives + drawn
    labels = np.array([POS] * len(positives) + [NEG] * n, dtype=np.int8)
    return LabeledDataset(roots, labels, f"random-negatives-{index}"), len(pool)
