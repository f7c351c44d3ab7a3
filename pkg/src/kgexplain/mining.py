"""Feature mining: neighbors, simple paths and ontology-generalized path
patterns rooted at a set of entities, with the pruning and filtering steps
that keep the feature space tractable.

Internally features are integer keys:

* neighbor ``(n,)``
* path / pattern ``(pc1, e1, pc2, e2, ...)`` with predicate code
  ``pc = 2 * predicate + inverse`` and element code ``2 * node``,
  ``2 * class + 1`` or ``TOP_CODE``.

Keys are converted to IRI-based :class:`Feature` objects only for output.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from . import kernels
from .config import ConfigError, as_list, read_kv
from .features import CLASS, NEIGHBOR, NODE, PATH, PATTERN, TOP_KIND, Element, Feature, Step
from .graph import TOP, CanonicalGraph, KnowledgeGraph

log = logging.getLogger(__name__)

TOP_CODE = -1
DOMAIN_FILTERS = ("no-check", "p", "g", "m", "pg", "pgm")
CATEGORIES = {"p": "pathway", "g": "gene", "m": "mesh"}

Key = tuple[int, ...]


class FeatureCapExceeded(RuntimeError):
    """Mining stopped because the number of held features hit the cap."""

    def __init__(self, cap: int, stats: dict):
        super().__init__(f"feature cap of {cap} reached after {stats.get('roots_processed', 0)} roots")
        self.cap = cap
        self.stats = stats


@dataclass
class MiningParams:
    k: int = 3
    t: int = 3
    deg: int = -1
    s_min: int = 0
    s_max: int | None = None
    undirected: bool = False
    b_predicates: frozenset = frozenset()
    b_exp_types: frozenset = frozenset()
    b_gen_types: frozenset = frozenset()
    m: str = "no-check"
    feature_cap: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.t < -1:
            raise ValueError("t must be >= 0 or -1")
        if self.deg < -1:
            raise ValueError("deg must be >= 0 or -1")
        if self.s_max is not None and self.s_min > self.s_max:
            raise ValueError(f"s_min={self.s_min} exceeds s_max={self.s_max}")
        if self.m not in DOMAIN_FILTERS:
            raise ValueError(f"domain filter must be one of {DOMAIN_FILTERS}")
        if self.feature_cap is not None and self.feature_cap < 1:
            raise ValueError("feature_cap must be positive")
        self.b_predicates = frozenset(self.b_predicates)
        self.b_exp_types = frozenset(self.b_exp_types)
        self.b_gen_types = frozenset(self.b_gen_types)

    def as_dict(self, g: KnowledgeGraph | None = None) -> dict:
        def names(items):
            out = [g.iri(i) if (g is not None and isinstance(i, (int, np.integer))) else str(i) for i in items]
            return sorted(out)

        return {
            "k": self.k, "t": self.t, "deg": self.deg, "s_min": self.s_min,
            "s_max": self.s_max, "undirected": self.undirected,
            "b_predicates": names(self.b_predicates), "b_exp_types": names(self.b_exp_types),
            "b_gen_types": names(self.b_gen_types), "m": self.m, "feature_cap": self.feature_cap,
        }


@dataclass
class DomainRegistry:
    """Category -> IRI prefixes and class IRIs used by the domain filter."""

    prefixes: dict[str, tuple[str, ...]] = field(default_factory=dict)
    classes: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        known = set(CATEGORIES.values())
        for cat in set(self.prefixes) | set(self.classes):
            if cat not in known:
                raise ConfigError(f"unknown domain category {cat!r}; expected one of {sorted(known)}")

    @classmethod
    def from_file(cls, path: str | Path) -> "DomainRegistry":
        prefixes: dict[str, tuple[str, ...]] = {}
        classes: dict[str, tuple[str, ...]] = {}
        for key, value in read_kv(path).items():
            cat, _, what = key.partition(".")
            if what == "prefixes":
                prefixes[cat] = tuple(as_list(value))
            elif what == "classes":
                classes[cat] = tuple(as_list(value))
            else:
                raise ConfigError(f"{path}: bad key {key!r} (expected <category>.prefixes or <category>.classes)")
        return cls(prefixes, classes)

    def categories_for(self, m: str) -> list[str]:
        if m == "no-check":
            return []
        cats = [CATEGORIES[c] for c in m]
        missing = [c for c in cats if c not in self.prefixes and c not in self.classes]
        if missing:
            raise ConfigError(f"domain filter {m!r} needs categories missing from the registry: {missing}")
        return cats


# --------------------------------------------------------------------------
# mining context


def resolve_ids(g: KnowledgeGraph, items: Iterable) -> set[int]:
    """Map IRIs or original ids to (canonical) node ids; unknown IRIs are skipped."""
    out = set()
    canon = isinstance(g, CanonicalGraph)
    for item in items:
        if isinstance(item, str):
            if item not in g.index:
                continue
            i = g.index[item]
        else:
            i = int(item)
        out.add(int(g.class_map[i]) if canon else i)
    return out


class MiningContext:
    """Precomputed masks and caches for one graph and one parameter set."""

    def __init__(self, g: KnowledgeGraph, params: MiningParams):
        self.g = g
        self.params = params
        self.indptr, self.codes, self.targets = g.adjacency(params.undirected)
        b_pred = resolve_ids(g, params.b_predicates)
        if b_pred:
            self.edge_ok = ~np.isin(self.codes // 2, np.fromiter(b_pred, dtype=np.int64))
        else:
            self.edge_ok = np.ones(len(self.codes), dtype=np.bool_)
        self.node_ok = ~g.instances_mask(resolve_ids(g, params.b_exp_types))
        if params.deg >= 0:
            self.expand_ok = g.degrees(params.undirected) <= params.deg
        else:
            self.expand_ok = np.ones(g.n_nodes, dtype=np.bool_)
        self.b_gen = frozenset(resolve_ids(g, params.b_gen_types))
        self._gen: dict[int, tuple[int, ...]] = {}
        self._sup: dict[int, frozenset[int]] = {}

    def check_root(self, root: int) -> None:
        if not self.g.has_node(root):
            raise KeyError(f"root {root} is not a node of the graph")

    def neighbors(self, root: int) -> np.ndarray:
        self.check_root(root)
        return kernels.bfs_within(self.indptr, self.targets, self.edge_ok, self.node_ok,
                                  self.expand_ok, root, self.params.k)

    def path_keys(self, root: int) -> list[Key]:
        self.check_root(root)
        rows = kernels.simple_paths(self.indptr, self.targets, self.edge_ok, self.node_ok,
                                    self.expand_ok, root, self.params.k)
        codes, targets = self.codes, self.targets
        keys = []
        for row in rows.tolist():
            key = []
            for s in row:
                if s < 0:
                    break
                key.append(int(codes[s]))
                key.append(2 * int(targets[s]))
            keys.append(tuple(key))
        return keys

    def generalizations(self, node: int) -> tuple[int, ...]:
        """Element codes a node may take in a pattern, node code first."""
        gen = self._gen.get(node)
        if gen is None:
            classes = self.g.class_generalizations(node, self.params.t, self.b_gen)
            gen = (2 * node,) + tuple(sorted(2 * c + 1 for c in classes if c != TOP)) + (TOP_CODE,)
            self._gen[node] = gen
        return gen

    def pattern_keys(self, path: Key) -> Iterable[Key]:
        preds = path[0::2]
        options = [self.generalizations(n >> 1) for n in path[1::2]]
        for combo in itertools.product(*options):
            if combo == path[1::2]:
                continue
            key = [0] * len(path)
            key[0::2] = preds
            key[1::2] = combo
            yield tuple(key)

    # element specificity: a <= b when a is b, or b generalizes a
    def _superclasses(self, c: int) -> frozenset[int]:
        sup = self._sup.get(c)
        if sup is None:
            sup = self._sup[c] = self.g.superclass_closure(c)
        return sup

    def element_le(self, a: int, b: int) -> bool:
        if a == b or b == TOP_CODE:
            return True
        if a == TOP_CODE or not (b & 1):
            return False
        cb = b >> 1
        if a & 1:
            return cb in self._superclasses(a >> 1)
        return cb in self.g.type_closure(a >> 1)


# --------------------------------------------------------------------------
# key <-> feature conversion


def _element(g: KnowledgeGraph, code: int) -> Element:
    if code == TOP_CODE:
        return Element(TOP_KIND)
    return Element(CLASS if code & 1 else NODE, g.iri(code >> 1))


def key_to_feature(g: KnowledgeGraph, key: Key) -> Feature:
    if len(key) == 1:
        return Feature.neighbor(g.iri(key[0]))
    steps = tuple(
        Step(g.iri(pc >> 1), _element(g, e), bool(pc & 1))
        for pc, e in zip(key[0::2], key[1::2])
    )
    return Feature.from_steps(steps)


def feature_to_key(g: KnowledgeGraph, f: Feature) -> Key:
    if f.kind == NEIGHBOR:
        return (g.node_id(f.node),)
    key: list[int] = []
    for s in f.steps:
        key.append(2 * g.node_id(s.predicate) + int(s.inverse))
        e = s.element
        if e.kind == TOP_KIND:
            key.append(TOP_CODE)
        else:
            key.append(2 * g.node_id(e.iri) + (e.kind == CLASS))
    return tuple(key)


def key_kind(key: Key) -> str:
    if len(key) == 1:
        return NEIGHBOR
    return PATH if all(e >= 0 and not e & 1 for e in key[1::2]) else PATTERN


# --------------------------------------------------------------------------
# public operations


def collect_neighbors(g: KnowledgeGraph, root: int, params: MiningParams,
                      ctx: MiningContext | None = None) -> set[int]:
    ctx = ctx or MiningContext(g, params)
    return set(ctx.neighbors(root).tolist())


def enumerate_paths(g: KnowledgeGraph, root: int, params: MiningParams,
                    ctx: MiningContext | None = None) -> set[Feature]:
    ctx = ctx or MiningContext(g, params)
    return {key_to_feature(g, k) for k in ctx.path_keys(root)}


def generalize_path(g: KnowledgeGraph, path: Feature, t: int, b_gen_types: Iterable = ()) -> set[Feature]:
    """All patterns obtained by replacing path nodes with their classes
    (within depth ``t``) or top; predicates are kept."""
    if path.kind != PATH:
        raise ValueError("generalize_path expects a path feature")
    ctx = MiningContext(g, MiningParams(k=max(1, path.length), t=t, b_gen_types=frozenset(b_gen_types)))
    return {key_to_feature(g, k) for k in ctx.pattern_keys(feature_to_key(g, path))}


def _prune_keys(ctx: MiningContext, extents: Mapping[Key, tuple]) -> set[Key]:
    groups: dict[tuple, list[Key]] = {}
    for key, ext in extents.items():
        if len(key) > 1:
            groups.setdefault((key[0::2], tuple(ext)), []).append(key)
    removed: set[Key] = set()
    le = ctx.element_le
    for members in groups.values():
        if len(members) < 2:
            continue
        elems = [m[1::2] for m in members]
        for i, b in enumerate(elems):
            for j, a in enumerate(elems):
                if i == j:
                    continue
                if all(le(x, y) for x, y in zip(a, b)) and not all(le(y, x) for x, y in zip(a, b)):
                    removed.add(members[i])
                    break
    return set(extents) - removed


def prune_most_specific(g: KnowledgeGraph, extents: Mapping[Feature, Iterable[int]]) -> set[Feature]:
    """Drop every path/pattern that has a strictly more specific
    counterpart (same predicate sequence) with the same extent."""
    ctx = MiningContext(g, MiningParams(k=1))
    by_key = {feature_to_key(g, f): f for f in extents}
    kept = _prune_keys(ctx, {feature_to_key(g, f): tuple(sorted(e)) for f, e in extents.items()})
    return {by_key[k] for k in kept}


def filter_support(extents: Mapping, s_min: int, s_max: int | None = None) -> set:
    if s_max is not None and s_min > s_max:
        raise ValueError(f"s_min={s_min} exceeds s_max={s_max}")
    hi = math.inf if s_max is None else s_max
    return {f for f, e in extents.items() if s_min <= len(e) <= hi}


class _DomainMatcher:
    def __init__(self, g: KnowledgeGraph, registry: DomainRegistry, categories: list[str]):
        self.g = g
        self.rules = []
        for cat in categories:
            prefixes = registry.prefixes.get(cat, ())
            classes = frozenset(resolve_ids(g, registry.classes.get(cat, ())))
            self.rules.append((prefixes, classes))
        self._cache: dict[int, bool] = {}

    def element(self, code: int) -> bool:
        if code == TOP_CODE:
            return False
        hit = self._cache.get(code)
        if hit is None:
            n = code >> 1
            iris = self.g.member_iris(n)
            if code & 1:
                closure = self.g.superclass_closure(n)
            else:
                closure = self.g.type_closure(n) | {n}
            hit = any(
                any(iri.startswith(p) for iri in iris for p in prefixes) or bool(classes & closure)
                for prefixes, classes in self.rules
            )
            self._cache[code] = hit
        return hit

    def key(self, key: Key) -> bool:
        if len(key) == 1:
            return self.element(2 * key[0])
        return any(self.element(e) for e in key[1::2])


def filter_domain(g: KnowledgeGraph, features: Iterable, m: str, registry: DomainRegistry | None) -> set:
    """Keep features mentioning at least one element of the categories in ``m``."""
    if m not in DOMAIN_FILTERS:
        raise ValueError(f"domain filter must be one of {DOMAIN_FILTERS}")
    features = list(features)
    if m == "no-check":
        return set(features)
    if registry is None:
        raise ConfigError(f"domain filter {m!r} requires a domain registry")
    matcher = _DomainMatcher(g, registry, registry.categories_for(m))
    out = set()
    for f in features:
        key = feature_to_key(g, f) if isinstance(f, Feature) else f
        if matcher.key(key):
            out.add(f)
    return out


# --------------------------------------------------------------------------
# feature matrix


@dataclass
class FeatureMatrix:
    root_iris: list[str]
    features: list[Feature]
    incidence: sparse.csr_matrix
    stats: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.incidence = sparse.csr_matrix(self.incidence, dtype=np.uint8)
        if self.incidence.shape != (len(self.root_iris), len(self.features)):
            raise ValueError("incidence shape does not match roots x features")

    @property
    def shape(self) -> tuple[int, int]:
        return self.incidence.shape

    @property
    def descriptors(self) -> list[str]:
        return [f.descriptor for f in self.features]

    def dense(self) -> np.ndarray:
        return np.ascontiguousarray(self.incidence.toarray(), dtype=np.uint8)

    def extent(self, j: int) -> np.ndarray:
        col = self.incidence.tocsc()[:, j]
        return np.sort(col.indices)

    def extents(self) -> dict[str, tuple[str, ...]]:
        csc = self.incidence.tocsc()
        out = {}
        for j, f in enumerate(self.features):
            rows = np.sort(csc.indices[csc.indptr[j]:csc.indptr[j + 1]])
            out[f.descriptor] = tuple(self.root_iris[r] for r in rows)
        return out

    def select_rows(self, iris: Iterable[str]) -> "FeatureMatrix":
        pos = {iri: i for i, iri in enumerate(self.root_iris)}
        idx = [pos[i] for i in iris]
        return FeatureMatrix([self.root_iris[i] for i in idx], self.features,
                             self.incidence[idx], dict(self.stats), dict(self.params))

    # -- export / import ---------------------------------------------------

    def write_tsv(self, path: str | Path) -> None:
        X = self.dense()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("root\t" + "\t".join(self.descriptors) + "\n")
            for iri, row in zip(self.root_iris, X):
                fh.write(iri + "\t" + "\t".join("1" if v else "0" for v in row.tolist()) + "\n")

    def write(self, directory: str | Path, header: dict | None = None) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.write_tsv(d / "matrix.tsv")
        sizes = np.asarray(self.incidence.sum(axis=0)).ravel().tolist()
        sidecar = {
            "schema": "kgexplain.features/1",
            "config": header or {},
            "features": [dict(f.to_record(), support=int(s)) for f, s in zip(self.features, sizes)],
        }
        (d / "features.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        stats = {"schema": "kgexplain.mining-stats/1", "config": header or {}, "params": self.params,
                 "stats": self.stats}
        (d / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, directory: str | Path) -> "FeatureMatrix":
        d = Path(directory)
        sidecar = json.loads((d / "features.json").read_text(encoding="utf-8"))
        features = [Feature.from_record(r) for r in sidecar["features"]]
        with open(d / "matrix.tsv", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if header[1:] != [f.descriptor for f in features]:
                raise ValueError("matrix.tsv header does not match features.json")
            roots, rows = [], []
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                roots.append(parts[0])
                rows.append([int(v) for v in parts[1:]])
        X = np.array(rows, dtype=np.uint8).reshape(len(roots), len(features))
        stats_path = d / "stats.json"
        stats, params = {}, {}
        if stats_path.exists():
            blob = json.loads(stats_path.read_text(encoding="utf-8"))
            stats, params = blob.get("stats", {}), blob.get("params", {})
        return cls(roots, features, sparse.csr_matrix(X), stats, params)


# --------------------------------------------------------------------------
# orchestration


def _count_kinds(keys: Iterable[Key]) -> dict[str, int]:
    counts = {NEIGHBOR: 0, PATH: 0, PATTERN: 0}
    for k in keys:
        counts[key_kind(k)] += 1
    return counts


class _CapGuard:
    def __init__(self, cap: int | None):
        self.cap = cap
        self.peak = 0

    def note(self, size: int) -> bool:
        """Record a held-feature count; False when it would pass the cap."""
        if self.cap is not None and size > self.cap:
            return False
        self.peak = max(self.peak, size)
        return True


class _RootAbort(Exception):
    pass


def _root_keys(ctx: MiningContext, root: int, guard: _CapGuard) -> set[Key]:
    out: set[Key] = set()

    def add(key: Key) -> None:
        if key not in out:
            if not guard.note(len(out) + 1):
                raise _RootAbort
            out.add(key)

    for n in ctx.neighbors(root).tolist():
        add((n,))
    for path in ctx.path_keys(root):
        add(path)
        for pattern in ctx.pattern_keys(path):
            add(pattern)
    return out


def mine_features(g: KnowledgeGraph, roots: list[int], params: MiningParams,
                  registry: DomainRegistry | None = None) -> FeatureMatrix:
    """Mine, prune and filter features for ``roots``; see module docstring."""
    ctx = MiningContext(g, params)
    for r in roots:
        ctx.check_root(r)
    if len(set(roots)) != len(roots):
        raise ValueError("roots must be distinct")
    if params.m != "no-check":
        if registry is None:
            raise ConfigError(f"domain filter {params.m!r} requires a domain registry")
        registry.categories_for(params.m)

    guard = _CapGuard(params.feature_cap)
    extents: dict[Key, list[int]] = {}
    stats: dict = {"roots": len(roots), "roots_processed": 0, "feature_cap": params.feature_cap,
                   "aborted": False, "backend": kernels.BACKEND}

    def abort():
        stats["aborted"] = True
        stats["peak_features"] = guard.peak
        stats["mined"] = _count_kinds(extents)
        raise FeatureCapExceeded(params.feature_cap, stats)

    def merge(i: int, keys: set[Key]) -> None:
        for key in sorted(keys):
            ext = extents.get(key)
            if ext is None:
                if not guard.note(len(extents) + 1):
                    abort()
                extents[key] = [i]
            else:
                ext.append(i)
        stats["roots_processed"] = i + 1

    def work(root: int) -> set[Key]:
        return _root_keys(ctx, root, guard)

    try:
        if params.threads > 1:
            with ThreadPoolExecutor(params.threads) as pool:
                for i, keys in enumerate(pool.map(work, roots)):
                    merge(i, keys)
        else:
            for i, root in enumerate(roots):
                merge(i, work(root))
    except _RootAbort:
        abort()

    stats["peak_features"] = guard.peak
    stats["mined"] = _count_kinds(extents)
    frozen = {k: tuple(v) for k, v in extents.items()}
    kept = _prune_keys(ctx, frozen)
    stats["after_specificity"] = _count_kinds(kept)
    kept = filter_support({k: frozen[k] for k in kept}, params.s_min, params.s_max)
    stats["after_support"] = _count_kinds(kept)
    if params.m != "no-check":
        matcher = _DomainMatcher(g, registry, registry.categories_for(params.m))
        kept = {k for k in kept if matcher.key(k)}
    stats["after_domain"] = _count_kinds(kept)

    pairs = [(key_to_feature(g, k), k) for k in kept]
    pairs.sort(key=lambda fk: fk[0].descriptor)
    rows, cols = [], []
    for j, (_, key) in enumerate(pairs):
        ext = frozen[key]
        rows.extend(ext)
        cols.extend([j] * len(ext))
    incidence = sparse.csr_matrix(
        (np.ones(len(rows), dtype=np.uint8), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(len(roots), len(pairs)),
    )
    features = [f for f, _ in pairs]
    log.info("mined %d features for %d roots", len(features), len(roots))
    return FeatureMatrix([g.iri(r) for r in roots], features, incidence, stats, params.as_dict(g))
