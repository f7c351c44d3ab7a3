import gzip
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgexplain.graph import (
    BNODE_NS, OWL_SAME_AS, RDF_TYPE, RDFS_SUBCLASS_OF, TOP, LoadConfig, NTriplesError, canonicalize,
    class_generalizations, load_graph, node_degree,
)

from conftest import graph_of, nt

SAME = f"<{OWL_SAME_AS}>"
TYPE = f"<{RDF_TYPE}>"
SUB = f"<{RDFS_SUBCLASS_OF}>"


def test_literal_dropped_and_counted():
    g = graph_of('<http://x/a> <http://x/p> <http://x/b> .', '<http://x/a> <http://x/p> "x" .')
    assert g.n_nodes == 3
    assert g.n_triples == 1
    assert g.stats.literals_dropped == 1


def test_empty_stream():
    g = load_graph(io.BytesIO(b""))
    assert g.n_nodes == 0 and g.n_triples == 0


def test_line_scan_counts():
    rng = np.random.default_rng(3)
    lines = []
    for i in range(1000):
        s = f"<http://x/n{rng.integers(50)}>"
        if i % 10 == 0:
            lines.append(f"{s} {TYPE} <http://x/C{rng.integers(5)}> .")
        else:
            lines.append(f"{s} <http://x/p{i}> <http://x/n{rng.integers(50)}> .")
    g = graph_of(*lines)
    n_type = sum(1 for line in lines if RDF_TYPE in line)
    assert n_type == 100
    assert g.n_triples == 900
    assert len(g.type_pairs) == len(set((line.split()[0], line.split()[2]) for line in lines if RDF_TYPE in line))
    assert g.stats.type_triples == len(g.type_pairs)


def test_labels_escapes_and_blank_nodes():
    g = graph_of(
        '<http://x/a> <http://www.w3.org/2000/01/rdf-schema#label> "caf\\u00E9 \\"one\\""@fr .',
        "_:b1 <http://x/p> <http://x/a> .",
        "# a comment",
        "",
    )
    a = g.node_id("http://x/a")
    assert g.label(a) == 'café "one"'
    assert g.has_node(g.node_id(BNODE_NS + "b1"))


def test_malformed_line_reports_line_number():
    with pytest.raises(NTriplesError) as exc:
        graph_of("<http://x/a> <http://x/p> <http://x/b> .", "<http://x/a> <http://x/p> .")
    assert exc.value.line == 2


def test_invalid_utf8_is_error():
    data = b"<http://x/a> <http://x/p> \"\xff\xfe\" .\n"
    with pytest.raises(NTriplesError):
        load_graph(io.BytesIO(data))


def test_gzip_sniffed(tmp_path):
    p = tmp_path / "g.nt.gz"
    p.write_bytes(gzip.compress(nt("<http://x/a> <http://x/p> <http://x/b> .")))
    assert load_graph(p).n_triples == 1


def test_indexes_consistent():
    g = graph_of("<http://x/a> <http://x/p> <http://x/b> .", "<http://x/c> <http://x/q> <http://x/b> .")
    b = g.node_id("http://x/b")
    assert sorted(g.in_edges(b)) == sorted([(g.node_id("http://x/p"), g.node_id("http://x/a")),
                                            (g.node_id("http://x/q"), g.node_id("http://x/c"))])
    for s, p, o in g.triples.tolist():
        assert (p, o) in g.out_edges(s)
        assert (p, s) in g.in_edges(o)


def test_round_trip(tmp_path):
    g = graph_of("<http://x/a> <http://x/p> <http://x/b> .", f"<http://x/a> {TYPE} <http://x/C> .",
                 f"<http://x/C> {SUB} <http://x/D> .")
    p = tmp_path / "out.nt"
    g.write_ntriples(p)
    h = load_graph(p)
    edges = lambda gr: sorted((gr.iri(s), gr.iri(q), gr.iri(o)) for s, q, o in gr.triples.tolist())
    assert edges(g) == edges(h)
    assert len(h.type_pairs) == 1 and len(h.subclass_pairs) == 1


def test_type_edges_not_traversed():
    g = graph_of(f"<http://x/a> {TYPE} <http://x/C> .")
    a = g.node_id("http://x/a")
    assert g.out_edges(a) == []
    assert g.direct_types(a) == [g.node_id("http://x/C")]


def test_load_config_custom_type_predicate(tmp_path):
    cfg = tmp_path / "load.cfg"
    cfg.write_text("type_predicate = http://x/isA\n")
    g = graph_of("<http://x/a> <http://x/isA> <http://x/C> .", config=LoadConfig.from_file(cfg))
    assert g.n_triples == 0 and len(g.type_pairs) == 1


# -- canonicalization -------------------------------------------------------


def test_contraction_unions_edges():
    g = graph_of(f"<http://x/A> {SAME} <http://x/B> .", "<http://x/A> <http://x/p> <http://x/C> .",
                 "<http://x/B> <http://x/q> <http://x/D> .")
    cg = canonicalize(g)
    a = cg.resolve("http://x/B")
    assert cg.iri(a) == "http://x/A"
    got = {(cg.iri(p), cg.iri(o)) for p, o in cg.out_edges(a)}
    assert got == {("http://x/p", "http://x/C"), ("http://x/q", "http://x/D")}


def test_transitive_chain_and_smallest_iri():
    g = graph_of(f"<http://x/c> {SAME} <http://x/b> .", f"<http://x/b> {SAME} <http://x/a> .")
    cg = canonicalize(g)
    reps = {cg.iri(cg.resolve(f"http://x/{n}")) for n in "abc"}
    assert reps == {"http://x/a"}
    assert cg.member_iris(cg.resolve("http://x/c")) == ["http://x/a", "http://x/b", "http://x/c"]


def test_identity_without_equivalence():
    g = graph_of("<http://x/a> <http://x/p> <http://x/b> .")
    cg = canonicalize(g)
    assert np.array_equal(cg.class_map, np.arange(g.n_nodes))
    assert canonicalize(g, ["http://x/absent"]).canonical_stats.groups_merged == 0


def test_contraction_self_loop_dropped():
    g = graph_of(f"<http://x/a> {SAME} <http://x/b> .", "<http://x/a> <http://x/p> <http://x/b> .")
    cg = canonicalize(g)
    assert cg.n_triples == 0
    assert cg.canonical_stats.contraction_loops_dropped == 1


def _random_sameas_graph(seed):
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(60):
        s, o = rng.integers(25, size=2)
        p = "sameAs" if rng.random() < 0.25 else f"p{rng.integers(3)}"
        pred = SAME if p == "sameAs" else f"<http://x/{p}>"
        lines.append(f"<http://x/n{s}> {pred} <http://x/n{o}> .")
    return graph_of(*lines)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_canonicalization_is_homomorphism(seed):
    g = _random_sameas_graph(seed)
    cg = canonicalize(g)
    same = g.index.get(OWL_SAME_AS, -1)
    cm = cg.class_map
    assert np.array_equal(cm[cm], cm)
    expected = set()
    for s, p, o in g.triples.tolist():
        if p == same:
            assert cm[s] == cm[o]
            continue
        if cm[s] == cm[o] and s != o:
            continue  # loop created by contraction
        expected.add((int(cm[s]), p, int(cm[o])))
    assert {tuple(t) for t in cg.triples.tolist()} == expected
    for n in range(g.n_nodes):
        members = cg.member_iris(cm[n])
        assert cg.iri(cm[n]) == min(members)


# -- ontology ---------------------------------------------------------------


def _onto():
    return graph_of(f"<http://x/n> {TYPE} <http://x/C1> .", f"<http://x/C1> {SUB} <http://x/C2> .",
                    f"<http://x/C2> {SUB} <http://x/C3> .")


def test_generalization_depth():
    g = _onto()
    n, c1, c2 = (g.node_id(f"http://x/{x}") for x in ("n", "C1", "C2"))
    assert class_generalizations(g, n, 1) == {c1, TOP}
    assert class_generalizations(g, n, 2) == {c1, c2, TOP}
    assert class_generalizations(g, n, 0) == {TOP}


def test_generalization_untyped_node_is_top_only():
    g = graph_of("<http://x/a> <http://x/p> <http://x/b> .")
    assert class_generalizations(g, g.node_id("http://x/a"), 3) == {TOP}


def test_blacklisted_class_passed_through():
    g = _onto()
    n, c1, c2, c3 = (g.node_id(f"http://x/{x}") for x in ("n", "C1", "C2", "C3"))
    assert class_generalizations(g, n, -1, {c2}) == {c1, c3, TOP}


def test_generalization_matches_bfs_oracle():
    rng = np.random.default_rng(11)
    lines = []
    for i in range(1, 50):
        for j in rng.choice(i, size=min(i, int(rng.integers(1, 3))), replace=False):
            lines.append(f"<http://x/C{i}> {SUB} <http://x/C{j}> .")
    for n in range(20):
        for c in rng.choice(50, size=2, replace=False):
            lines.append(f"<http://x/n{n}> {TYPE} <http://x/C{c}> .")
    g = graph_of(*lines)
    sup = {}
    for line in lines:
        a, _, b, _ = line.split()
        if RDFS_SUBCLASS_OF in line:
            sup.setdefault(a[1:-1], set()).add(b[1:-1])
    types = {}
    for line in lines:
        a, _, b, _ = line.split()
        if RDF_TYPE in line:
            types.setdefault(a[1:-1], set()).add(b[1:-1])
    for n in range(20):
        iri = f"http://x/n{n}"
        frontier, found = set(types[iri]), set()
        for _ in range(3):
            found |= frontier
            frontier = {s for c in frontier for s in sup.get(c, ())} - found
        got = {g.iri(c) for c in class_generalizations(g, g.node_id(iri), 3) if c != TOP}
        assert got == found


@given(st.integers(0, 5), st.integers(0, 5))
def test_generalization_monotone_in_t(t1, t2):
    g = _onto()
    n = g.node_id("http://x/n")
    lo, hi = sorted((t1, t2))
    a, b = class_generalizations(g, n, lo), class_generalizations(g, n, hi)
    assert a <= b and TOP in a


# -- degree -----------------------------------------------------------------


def test_node_degree():
    g = graph_of(*[f"<http://x/a> <http://x/p> <http://x/o{i}> ." for i in range(3)],
                 *[f"<http://x/s{i}> <http://x/p> <http://x/a> ." for i in range(2)],
                 f"<http://x/a> {TYPE} <http://x/C> .")
    a = g.node_id("http://x/a")
    assert node_degree(g, a) == 3
    assert node_degree(g, a, undirected=True) == 5
    with pytest.raises((KeyError, IndexError, ValueError)):
        node_degree(g, 10_000)


def test_hub_fixture_degree():
    g = graph_of(*[f"<http://x/hub> <http://x/p> <http://x/o{i}> ." for i in range(600)])
    assert node_degree(g, g.node_id("http://x/hub")) == 600 > 500
    assert np.all(g.degrees() <= g.degrees(undirected=True))
