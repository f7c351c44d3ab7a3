"""Synthetic graphs with known structure, for tests, demos and benchmarks.

The planted task: drugs target proteins, proteins belong to pathways.
A drug is positive exactly when it targets ``prot_special``; a few labels
are then flipped as noise. A second region of the graph holds unrelated
drugs that serve as a pool for random negatives.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .dataset import NEG, POS, LabeledDataset, NodeCriteria
from .graph import RDF_TYPE, RDFS_LABEL, RDFS_SUBCLASS_OF, KnowledgeGraph, load_graph

NS = "http://example.org/syn/"
TARGETS = NS + "targets"
PART_OF = NS + "partOf"
CATEGORY = NS + "hasCategory"
SPECIAL = NS + "prot_special"
PLANTED_DESCRIPTOR = f"->{TARGETS} [{SPECIAL}]"
REGION2 = NS + "region2/"


@dataclass
class PlantedTask:
    lines: list[str]
    dataset: LabeledDataset
    criteria: NodeCriteria
    flipped: list[str]

    def graph(self) -> KnowledgeGraph:
        return graph_from_lines(self.lines)

    def ntriples(self) -> str:
        return "".join(self.lines)


def _t(s: str, p: str, o: str) -> str:
    return f"<{s}> <{p}> <{o}> .\n"


def _label(s: str, text: str) -> str:
    return f'<{s}> <{RDFS_LABEL}> "{text}" .\n'


def graph_from_lines(lines) -> KnowledgeGraph:
    return load_graph(io.BytesIO("".join(lines).encode("utf-8")))


def _ontology(lines: list[str]) -> None:
    for c, sup in (("Protein", "Resource"), ("Enzyme", "Protein"), ("Pathway", "Resource"),
                   ("Drug", "Resource"), ("Category", "Resource")):
        lines.append(_t(NS + c, RDFS_SUBCLASS_OF, NS + sup))


def planted_task(
    n_roots: int = 200,
    noise: float = 0.05,
    decoy_fraction: float = 0.0,
    n_proteins: int = 40,
    n_pathways: int = 8,
    n_region2: int = 300,
    seed: int = 0,
) -> PlantedTask:
    """Build the planted graph and its labeled roots.

    Half the roots target ``prot_special`` and are labeled positive.
    ``decoy_fraction`` of the negatives also target it (hard negatives).
    Exactly ``round(noise * n_roots)`` labels are flipped.
    """
    rng = np.random.default_rng(seed)
    lines: list[str] = []
    _ontology(lines)
    prots = [f"{NS}prot_{i}" for i in range(n_proteins)]
    pathways = [f"{NS}pw_{i}" for i in range(n_pathways)]
    cats = [f"{NS}cat_{i}" for i in range(4)]
    for i, p in enumerate(prots):
        lines.append(_t(p, RDF_TYPE, NS + ("Enzyme" if i % 3 == 0 else "Protein")))
        lines.append(_label(p, f"Protein {i}"))
        for j in rng.choice(n_pathways, size=2, replace=False).tolist():
            lines.append(_t(p, PART_OF, pathways[j]))
    lines.append(_t(SPECIAL, RDF_TYPE, NS + "Protein"))
    lines.append(_label(SPECIAL, "Special protein"))
    for pw in pathways:
        lines.append(_t(pw, RDF_TYPE, NS + "Pathway"))
    for c in cats:
        lines.append(_t(c, RDF_TYPE, NS + "Category"))

    n_pos = n_roots // 2
    n_neg = n_roots - n_pos
    n_decoy = int(round(decoy_fraction * n_neg))
    roots = [f"{NS}drug_{i:03d}" for i in range(n_roots)]
    truth = np.array([POS] * n_pos + [NEG] * n_neg, dtype=np.int8)
    order = rng.permutation(n_roots)
    roots = [roots[i] for i in order]
    truth = truth[order]
    neg_idx = np.flatnonzero(truth == NEG)
    decoys = set(rng.choice(neg_idx, size=n_decoy, replace=False).tolist()) if n_decoy else set()
    for i, d in enumerate(roots):
        lines.append(_t(d, RDF_TYPE, NS + "Drug"))
        for j in rng.choice(n_proteins, size=int(rng.integers(2, 5)), replace=False).tolist():
            lines.append(_t(d, TARGETS, prots[j]))
        lines.append(_t(d, CATEGORY, cats[int(rng.integers(len(cats)))]))
        if truth[i] == POS or i in decoys:
            lines.append(_t(d, TARGETS, SPECIAL))

    labels = truth.copy()
    n_flip = int(round(noise * n_roots))
    flip = np.sort(rng.choice(n_roots, size=n_flip, replace=False)) if n_flip else np.array([], dtype=np.int64)
    labels[flip] = 1 - labels[flip]

    # unrelated region: its own proteins and pathways
    r2_prots = [f"{REGION2}prot_{i}" for i in range(20)]
    r2_pw = [f"{REGION2}pw_{i}" for i in range(4)]
    for i, p in enumerate(r2_prots):
        lines.append(_t(p, RDF_TYPE, NS + "Protein"))
        lines.append(_t(p, PART_OF, r2_pw[i % len(r2_pw)]))
    for pw in r2_pw:
        lines.append(_t(pw, RDF_TYPE, NS + "Pathway"))
    for i in range(n_region2):
        d = f"{REGION2}drug_{i:03d}"
        lines.append(_t(d, RDF_TYPE, NS + "Drug"))
        for j in rng.choice(len(r2_prots), size=int(rng.integers(1, 4)), replace=False).tolist():
            lines.append(_t(d, TARGETS, r2_prots[j]))

    ds = LabeledDataset(roots, labels, "expert")
    criteria = NodeCriteria(classes=(NS + "Drug",), namespaces=(REGION2,))
    return PlantedTask(lines, ds, criteria, [roots[i] for i in flip.tolist()])


def large_graph(n_edges: int = 100_000, n_nodes: int = 20_000, n_predicates: int = 8, n_classes: int = 60,
                seed: int = 0) -> list[str]:
    """Random typed multigraph with ``n_edges`` edges plus a class tree.

    Degrees follow a heavy tail so a few hubs appear.
    """
    rng = np.random.default_rng(seed)
    lines: list[str] = []
    classes = [f"{NS}big/C{i}" for i in range(n_classes)]
    for i in range(1, n_classes):
        lines.append(_t(classes[i], RDFS_SUBCLASS_OF, classes[int(rng.integers(i))]))
    weights = 1.0 / np.arange(1, n_nodes + 1) ** 0.8
    weights /= weights.sum()
    subj = rng.integers(n_nodes, size=n_edges)
    obj = rng.choice(n_nodes, size=n_edges, p=weights)
    pred = rng.integers(n_predicates, size=n_edges)
    for s, p, o in zip(subj.tolist(), pred.tolist(), obj.tolist()):
        lines.append(f"<{NS}big/n{s}> <{NS}big/p{p}> <{NS}big/n{o}> .\n")
    for n in range(n_nodes):
        lines.append(_t(f"{NS}big/n{n}", RDF_TYPE, classes[int(rng.integers(n_classes))]))
    return lines
