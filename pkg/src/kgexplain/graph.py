"""RDF graph store: N-Triples ingestion, indexes and sameAs canonicalization.

Nodes (entities, classes, predicates) are interned to dense integer ids.
Literal objects are dropped at load time; only the values of the configured
label predicate are kept aside for rendering.
"""

from __future__ import annotations

import gzip
import io
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import ConfigError, as_bool, as_list, read_kv

log = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_SUBCLASS_OF = "http://www.w3.org/2000/01/rdf-schema#subClassOf"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
OWL_SAME_AS = "http://www.w3.org/2002/07/owl#sameAs"
BNODE_NS = "urn:kgexplain:bnode:"

#: id of the top class in class sets and path patterns; never a graph node
TOP = -1


class NTriplesError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class LoadConfig:
    type_predicate: str = RDF_TYPE
    subclass_predicate: str = RDFS_SUBCLASS_OF
    label_predicate: str = RDFS_LABEL
    equivalence_predicates: tuple[str, ...] = (OWL_SAME_AS,)
    gzip: bool | None = None  # None: sniff the magic bytes

    @classmethod
    def from_file(cls, path: str | Path) -> "LoadConfig":
        kv = read_kv(path)
        known = {"type_predicate", "subclass_predicate", "label_predicate", "equivalence_predicates", "gzip"}
        unknown = set(kv) - known
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        args: dict = {}
        for key in ("type_predicate", "subclass_predicate", "label_predicate"):
            if key in kv:
                args[key] = kv[key].strip()
        if "equivalence_predicates" in kv:
            args["equivalence_predicates"] = tuple(as_list(kv["equivalence_predicates"]))
        if "gzip" in kv:
            args["gzip"] = as_bool(kv["gzip"])
        return cls(**args)


@dataclass
class LoadStats:
    lines: int = 0
    triples_read: int = 0
    literals_dropped: int = 0
    type_triples: int = 0
    subclass_triples: int = 0
    traversal_triples: int = 0
    nodes: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------------------
# N-Triples lexing

_IRI = r"<([^<>\"{}|^`\\\x00-\x20]*(?:\\[uU][0-9A-Fa-f]{4,8}[^<>\"{}|^`\\\x00-\x20]*)*)>"
_BNODE = r"_:([A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)"
_LITERAL = r"\"((?:[^\"\\\n\r]|\\.)*)\"(?:@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)|\^\^" + _IRI + r")?"
_LINE = re.compile(
    r"^[ \t]*(?:" + _IRI + "|" + _BNODE + r")[ \t]*" + _IRI + r"[ \t]*(?:"
    + _IRI + "|" + _BNODE + "|" + _LITERAL + r")[ \t]*\.[ \t]*(?:#.*)?$"
)
_BLANK = re.compile(r"^[ \t]*(?:#.*)?$")
_UCHAR = re.compile(r"\\u([0-9A-Fa-f]{4})|\\U([0-9A-Fa-f]{8})")
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_ESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")


def _unescape_iri(s: str) -> str:
    if "\\" not in s:
        return s
    return _UCHAR.sub(lambda m: chr(int(m.group(1) or m.group(2), 16)), s)


def _unescape_literal(s: str, line: int) -> str:
    if "\\" not in s:
        return s

    def repl(m: re.Match) -> str:
        if m.group(3) is not None:
            if m.group(3) not in _ECHAR:
                raise NTriplesError(f"bad escape \\{m.group(3)}", line)
            return _ECHAR[m.group(3)]
        return chr(int(m.group(1) or m.group(2), 16))

    return _ESCAPE.sub(repl, s)


def iter_ntriples(stream: BinaryIO) -> Iterator[tuple[int, str, str, str | None, str | None]]:
    """Yield ``(line_no, subject, predicate, object_iri, literal)`` per triple.

    Exactly one of ``object_iri`` and ``literal`` is set. Blank nodes are
    rewritten into the reserved ``BNODE_NS`` namespace.
    """
    for line_no, raw in enumerate(stream, start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NTriplesError(f"invalid UTF-8 ({exc.reason})", line_no) from exc
        if line_no == 1 and text.startswith("\ufeff"):
            text = text[1:]
        text = text.rstrip("\r\n")
        if _BLANK.match(text):
            continue
        m = _LINE.match(text)
        if m is None:
            raise NTriplesError(f"malformed triple: {text[:80]!r}", line_no)
        s_iri, s_bn, p, o_iri, o_bn, lit, _lang, _dt = m.groups()
        subj = _unescape_iri(s_iri) if s_iri is not None else BNODE_NS + s_bn
        pred = _unescape_iri(p)
        if lit is not None:
            yield line_no, subj, pred, None, _unescape_literal(lit, line_no)
        else:
            obj = _unescape_iri(o_iri) if o_iri is not None else BNODE_NS + o_bn
            yield line_no, subj, pred, obj, None


def _open_stream(source, use_gzip: bool | None) -> BinaryIO:
    if isinstance(source, (str, Path)):
        fh = open(source, "rb")
    else:
        fh = source
    if not hasattr(fh, "peek"):
        fh = io.BufferedReader(fh)
    if use_gzip is None:
        use_gzip = fh.peek(2)[:2] == b"\x1f\x8b"
    return gzip.GzipFile(fileobj=fh) if use_gzip else fh


# --------------------------------------------------------------------------
# indexes


def _csr(keys: np.ndarray, n: int, *columns: np.ndarray) -> tuple[np.ndarray, ...]:
    """Group ``columns`` by ``keys`` (already sorted) into CSR arrays."""
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, keys + 1, 1)
    np.cumsum(indptr, out=indptr)
    return (indptr,) + tuple(np.ascontiguousarray(c, dtype=np.int64) for c in columns)


def _unique_rows(a: np.ndarray, width: int) -> np.ndarray:
    if a.size == 0:
        return np.empty((0, width), dtype=np.int64)
    return np.unique(a.reshape(-1, width), axis=0)


class KnowledgeGraph:
    """Interned, literal-free RDF multigraph.

    Traversal triples live in two CSR indexes (by subject and by object),
    sorted by (key, predicate, other end). Type and subclass edges are kept
    out of the traversal indexes, in their own CSR indexes.
    """

    def __init__(
        self,
        iris: list[str],
        triples: np.ndarray,
        type_pairs: np.ndarray,
        subclass_pairs: np.ndarray,
        labels: dict[int, str] | None = None,
        type_predicate: str = RDF_TYPE,
        subclass_predicate: str = RDFS_SUBCLASS_OF,
        stats: LoadStats | None = None,
    ):
        self.iris = iris
        self.index = {iri: i for i, iri in enumerate(iris)}
        self.labels = labels or {}
        self.type_predicate = type_predicate
        self.subclass_predicate = subclass_predicate
        n = len(iris)
        self.triples = _unique_rows(np.asarray(triples, dtype=np.int64), 3)
        t = self.triples
        self.out_ptr, self.out_pred, self.out_obj = _csr(t[:, 0], n, t[:, 1], t[:, 2])
        order = np.lexsort((t[:, 0], t[:, 1], t[:, 2]))
        ti = t[order]
        self.in_ptr, self.in_pred, self.in_subj = _csr(ti[:, 2], n, ti[:, 1], ti[:, 0])
        tp = _unique_rows(np.asarray(type_pairs, dtype=np.int64), 2)
        self.type_pairs = tp
        self.type_ptr, self.type_cls = _csr(tp[:, 0], n, tp[:, 1])
        sp = _unique_rows(np.asarray(subclass_pairs, dtype=np.int64), 2)
        self.subclass_pairs = sp
        self.sup_ptr, self.sup_cls = _csr(sp[:, 0], n, sp[:, 1])
        order = np.lexsort((sp[:, 0], sp[:, 1]))
        spi = sp[order]
        self.sub_ptr, self.sub_cls = _csr(spi[:, 1], n, spi[:, 0])
        self.out_degree = np.diff(self.out_ptr)
        self.in_degree = np.diff(self.in_ptr)
        self.stats = stats or LoadStats(nodes=n, traversal_triples=len(t))
        self._closure_cache: dict[int, frozenset[int]] = {}
        self._adjacency: dict[bool, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    # -- basic accessors ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.iris)

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    def has_node(self, n: int) -> bool:
        return 0 <= n < len(self.iris)

    def nodes(self) -> range:
        return range(len(self.iris))

    def node_id(self, iri: str) -> int:
        try:
            return self.index[iri]
        except KeyError:
            raise KeyError(f"unknown node {iri!r}") from None

    def iri(self, n: int) -> str:
        return self.iris[n]

    def _check(self, n: int) -> None:
        if not self.has_node(n):
            raise KeyError(f"unknown node id {n}")

    def out_edges(self, n: int) -> list[tuple[int, int]]:
        self._check(n)
        lo, hi = self.out_ptr[n], self.out_ptr[n + 1]
        return list(zip(self.out_pred[lo:hi].tolist(), self.out_obj[lo:hi].tolist()))

    def in_edges(self, n: int) -> list[tuple[int, int]]:
        self._check(n)
        lo, hi = self.in_ptr[n], self.in_ptr[n + 1]
        return list(zip(self.in_pred[lo:hi].tolist(), self.in_subj[lo:hi].tolist()))

    def direct_types(self, n: int) -> list[int]:
        return self.type_cls[self.type_ptr[n]:self.type_ptr[n + 1]].tolist()

    def direct_superclasses(self, c: int) -> list[int]:
        return self.sup_cls[self.sup_ptr[c]:self.sup_ptr[c + 1]].tolist()

    def direct_subclasses(self, c: int) -> list[int]:
        return self.sub_cls[self.sub_ptr[c]:self.sub_ptr[c + 1]].tolist()

    def label(self, n: int) -> str | None:
        return self.labels.get(n)

    def member_iris(self, n: int) -> list[str]:
        """IRIs standing for node ``n`` (several after canonicalization)."""
        return [self.iris[n]]

    # -- ontology walking ---------------------------------------------------

    def class_generalizations(self, n: int, t: int, b_gen_types: Iterable[int] = ()) -> frozenset[int]:
        """Classes within distance ``t`` of ``n`` plus ``TOP``.

        One step for the instantiation edge, one per subsumption edge;
        ``t = -1`` is unbounded. Blacklisted classes are left out of the
        result but the walk continues through them.
        """
        if t < -1:
            raise ValueError("t must be >= 0 or -1")
        self._check(n)
        blocked = set(b_gen_types)
        found: dict[int, int] = {}
        frontier = [c for c in self.direct_types(n)]
        depth = 1
        while frontier and (t == -1 or depth <= t):
            nxt = []
            for c in frontier:
                if c in found:
                    continue
                found[c] = depth
                nxt.extend(self.direct_superclasses(c))
            frontier = nxt
            depth += 1
        return frozenset(c for c in found if c not in blocked) | {TOP}

    def type_closure(self, n: int) -> frozenset[int]:
        """All classes ``n`` instantiates directly or indirectly (no ``TOP``)."""
        cached = self._closure_cache.get(n)
        if cached is None:
            cached = self.class_generalizations(n, -1) - {TOP}
            self._closure_cache[n] = cached
        return cached

    def superclass_closure(self, c: int) -> frozenset[int]:
        """Strict and non-strict superclasses of ``c`` (includes ``c``)."""
        seen = {c}
        todo = [c]
        while todo:
            for d in self.direct_superclasses(todo.pop()):
                if d not in seen:
                    seen.add(d)
                    todo.append(d)
        return frozenset(seen)

    def instances_mask(self, classes: Iterable[int]) -> np.ndarray:
        """Boolean mask of nodes instantiating any of ``classes`` (directly
        or through subclasses)."""
        mask = np.zeros(self.n_nodes, dtype=np.bool_)
        seeds = [c for c in set(classes) if self.has_node(c)]
        if not seeds:
            return mask
        cls = np.zeros(self.n_nodes, dtype=np.bool_)
        todo = deque(seeds)
        cls[seeds] = True
        while todo:
            for s in self.direct_subclasses(todo.popleft()):
                if not cls[s]:
                    cls[s] = True
                    todo.append(s)
        if len(self.type_pairs):
            hit = cls[self.type_pairs[:, 1]]
            mask[self.type_pairs[hit, 0]] = True
        return mask

    # -- traversal ----------------------------------------------------------

    def node_degree(self, n: int, undirected: bool = False) -> int:
        self._check(n)
        d = int(self.out_degree[n])
        return d + int(self.in_degree[n]) if undirected else d

    def degrees(self, undirected: bool = False) -> np.ndarray:
        return self.out_degree + self.in_degree if undirected else self.out_degree.copy()

    def adjacency(self, undirected: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR traversal adjacency ``(indptr, pred_code, target)``.

        ``pred_code = 2 * predicate + inverse``; inverse steps (object to
        subject) only appear in undirected mode.
        """
        cached = self._adjacency.get(undirected)
        if cached is not None:
            return cached
        if not undirected:
            result = (self.out_ptr, 2 * self.out_pred, self.out_obj)
        else:
            t = self.triples
            src = np.concatenate([t[:, 0], t[:, 2]])
            code = np.concatenate([2 * t[:, 1], 2 * t[:, 1] + 1])
            dst = np.concatenate([t[:, 2], t[:, 0]])
            order = np.lexsort((dst, code, src))
            indptr, code, dst = _csr(src[order], self.n_nodes, code[order], dst[order])
            result = (indptr, code, dst)
        self._adjacency[undirected] = result
        return result

    # -- serialization ------------------------------------------------------

    def _term(self, n: int) -> str:
        iri = self.iris[n]
        if iri.startswith(BNODE_NS):
            return "_:" + iri[len(BNODE_NS):]
        return f"<{iri}>"

    def iter_ntriples(self, include_labels: bool = False, label_predicate: str = RDFS_LABEL) -> Iterator[str]:
        term = self._term
        for s, p, o in self.triples.tolist():
            yield f"{term(s)} {term(p)} {term(o)} .\n"
        if len(self.type_pairs):
            tp = f"<{self.type_predicate}>"
            for s, o in self.type_pairs.tolist():
                yield f"{term(s)} {tp} {term(o)} .\n"
        if len(self.subclass_pairs):
            sp = f"<{self.subclass_predicate}>"
            for s, o in self.subclass_pairs.tolist():
                yield f"{term(s)} {sp} {term(o)} .\n"
        if include_labels:
            for n in sorted(self.labels):
                value = self.labels[n].replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r")
                yield f'{term(n)} <{label_predicate}> "{value}" .\n'

    def write_ntriples(self, path: str | Path, include_labels: bool = True) -> None:
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wt", encoding="utf-8", newline="\n") as fh:
            fh.writelines(self.iter_ntriples(include_labels=include_labels))


def load_graph(source, config: LoadConfig | None = None) -> KnowledgeGraph:
    """Load an N-Triples document (path or binary stream) into a graph.

    Triples with literal objects are counted and dropped; literal values
    of the label predicate are kept as node labels.
    """
    config = config or LoadConfig()
    stats = LoadStats()
    index: dict[str, int] = {}
    iris: list[str] = []

    def intern(iri: str) -> int:
        i = index.get(iri)
        if i is None:
            i = index[iri] = len(iris)
            iris.append(iri)
        return i

    triples: list[int] = []
    types: list[int] = []
    subs: list[int] = []
    labels: dict[int, str] = {}
    stream = _open_stream(source, config.gzip)
    try:
        line_no = 0
        for line_no, s, p, o, lit in iter_ntriples(stream):
            stats.triples_read += 1
            si, pi = intern(s), intern(p)
            if lit is not None:
                stats.literals_dropped += 1
                if p == config.label_predicate and si not in labels:
                    labels[si] = lit
                continue
            oi = intern(o)
            if p == config.type_predicate:
                types += (si, oi)
            elif p == config.subclass_predicate:
                subs += (si, oi)
            else:
                triples += (si, pi, oi)
    except (OSError, EOFError) as exc:
        raise NTriplesError(f"cannot read stream: {exc}", line_no + 1) from exc
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    stats.lines = line_no
    g = KnowledgeGraph(
        iris,
        np.array(triples, dtype=np.int64).reshape(-1, 3),
        np.array(types, dtype=np.int64).reshape(-1, 2),
        np.array(subs, dtype=np.int64).reshape(-1, 2),
        labels=labels,
        type_predicate=config.type_predicate,
        subclass_predicate=config.subclass_predicate,
        stats=stats,
    )
    stats.nodes = g.n_nodes
    stats.traversal_triples = g.n_triples
    stats.type_triples = len(g.type_pairs)
    stats.subclass_triples = len(g.subclass_pairs)
    log.info("loaded %d nodes, %d traversal triples, dropped %d literals",
             stats.nodes, stats.traversal_triples, stats.literals_dropped)
    return g


# --------------------------------------------------------------------------
# canonicalization


@dataclass
class CanonicalStats:
    groups_merged: int = 0
    nodes_merged: int = 0
    largest_group: int = 1
    group_size_histogram: dict[int, int] = field(default_factory=dict)
    equivalence_edges: int = 0
    contraction_loops_dropped: int = 0

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["group_size_histogram"] = {str(k): v for k, v in sorted(self.group_size_histogram.items())}
        return d


class CanonicalGraph(KnowledgeGraph):
    """A graph whose equivalence-linked nodes are contracted.

    Shares the id space of ``base``; ``class_map[n]`` is the canonical
    representative of original node ``n`` (the member with the smallest
    IRI). Non-representative ids keep no edges.
    """

    def __init__(self, base: KnowledgeGraph, class_map: np.ndarray, triples, type_pairs, subclass_pairs,
                 labels, stats: CanonicalStats):
        super().__init__(base.iris, triples, type_pairs, subclass_pairs, labels=labels,
                         type_predicate=base.type_predicate, subclass_predicate=base.subclass_predicate)
        self.base = base
        self.class_map = class_map
        self.canonical_stats = stats
        self.stats = base.stats
        self._members: dict[int, list[int]] = {}
        for n in np.flatnonzero(class_map != np.arange(len(class_map))).tolist():
            self._members.setdefault(int(class_map[n]), []).append(n)

    def has_node(self, n: int) -> bool:
        return 0 <= n < len(self.iris) and self.class_map[n] == n

    def nodes(self) -> list[int]:
        return np.flatnonzero(self.class_map == np.arange(len(self.class_map))).tolist()

    def canonical(self, n: int) -> int:
        return int(self.class_map[n])

    def resolve(self, iri: str) -> int:
        """Canonical id of an original IRI."""
        return int(self.class_map[self.node_id(iri)])

    def members(self, n: int) -> list[int]:
        return sorted([n] + self._members.get(n, []), key=self.iris.__getitem__)

    def member_iris(self, n: int) -> list[str]:
        return [self.iris[m] for m in self.members(n)]


def canonicalize(g: KnowledgeGraph, equivalence_predicates: Iterable[int | str] = (OWL_SAME_AS,)) -> CanonicalGraph:
    """Contract equivalence edges (transitively) into single nodes."""
    eq_ids = set()
    for p in equivalence_predicates:
        if isinstance(p, str):
            if p in g.index:
                eq_ids.add(g.index[p])
        else:
            eq_ids.add(int(p))
    n = g.n_nodes
    t = g.triples
    is_eq = np.isin(t[:, 1], list(eq_ids)) if eq_ids and len(t) else np.zeros(len(t), dtype=np.bool_)
    eq = t[is_eq]
    stats = CanonicalStats(equivalence_edges=int(is_eq.sum()))

    class_map = np.arange(n, dtype=np.int64)
    if len(eq):
        adj = coo_matrix((np.ones(len(eq)), (eq[:, 0], eq[:, 2])), shape=(n, n))
        _, comp = connected_components(adj, directed=True, connection="weak")
        order = sorted(range(n), key=g.iris.__getitem__)
        rep_of_comp: dict[int, int] = {}
        for node in order:
            rep_of_comp.setdefault(int(comp[node]), node)
        class_map = np.array([rep_of_comp[int(c)] for c in comp], dtype=np.int64)
        sizes = np.bincount(comp)
        for size in sizes[sizes > 1].tolist():
            stats.group_size_histogram[size] = stats.group_size_histogram.get(size, 0) + 1
        stats.groups_merged = int((sizes > 1).sum())
        stats.nodes_merged = int(sizes[sizes > 1].sum())
        stats.largest_group = int(sizes.max())

    rest = t[~is_eq]
    s, o = class_map[rest[:, 0]], class_map[rest[:, 2]]
    loop = (s == o) & (rest[:, 0] != rest[:, 2])
    stats.contraction_loops_dropped = int(loop.sum())
    triples = np.column_stack([s, rest[:, 1], o])[~loop]

    tp = g.type_pairs
    type_pairs = np.column_stack([class_map[tp[:, 0]], class_map[tp[:, 1]]]) if len(tp) else tp
    sp = g.subclass_pairs
    if len(sp):
        a, b = class_map[sp[:, 0]], class_map[sp[:, 1]]
        keep = ~((a == b) & (sp[:, 0] != sp[:, 1]))
        subclass_pairs = np.column_stack([a, b])[keep]
    else:
        subclass_pairs = sp

    labels: dict[int, str] = {}
    for node in sorted(g.labels, key=g.iris.__getitem__):
        labels.setdefault(int(class_map[node]), g.labels[node])
    for node, value in g.labels.items():
        if class_map[node] == node:
            labels[node] = value
    cg = CanonicalGraph(g, class_map, triples, type_pairs, subclass_pairs, labels, stats)
    log.info("canonicalized: %d groups, %d nodes merged", stats.groups_merged, stats.nodes_merged)
    return cg


def class_generalizations(g: KnowledgeGraph, n: int, t: int, b_gen_types: Iterable[int] = ()) -> frozenset[int]:
    return g.class_generalizations(n, t, b_gen_types)


def node_degree(g: KnowledgeGraph, n: int, undirected: bool = False) -> int:
    return g.node_degree(n, undirected)
