import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgexplain.config import ConfigError
from kgexplain.features import CLASS, NODE, TOP_ELEMENT, Element, Feature, Step
from kgexplain.graph import RDF_TYPE, RDFS_SUBCLASS_OF
from kgexplain.mining import (
    DomainRegistry, FeatureCapExceeded, FeatureMatrix, MiningParams, collect_neighbors, enumerate_paths,
    filter_domain, filter_support, generalize_path, mine_features, prune_most_specific,
)

from conftest import graph_of
from oracles import brute_force_mine, params_of, random_case

X = "http://x/"
TYPE = f"<{RDF_TYPE}>"
SUB = f"<{RDFS_SUBCLASS_OF}>"


def ids(g, *names):
    return [g.node_id(X + n) for n in names]


def path(*pairs):
    return Feature.from_steps(Step(X + p, Element(NODE, X + n)) for p, n in pairs)


def test_worked_example_eight_patterns():
    g = graph_of(f"<{X}d> <{X}p1> <{X}n1> .", f"<{X}n1> <{X}p2> <{X}n2> .",
                 f"<{X}n1> {TYPE} <{X}C1> .", f"<{X}n2> {TYPE} <{X}C2> .")
    got = generalize_path(g, path(("p1", "n1"), ("p2", "n2")), t=1)
    n1, n2 = Element(NODE, X + "n1"), Element(NODE, X + "n2")
    c1, c2 = Element(CLASS, X + "C1"), Element(CLASS, X + "C2")
    T = TOP_ELEMENT
    expected = {
        Feature.from_steps([Step(X + "p1", a), Step(X + "p2", b)])
        for a, b in [(c1, n2), (n1, c2), (c1, c2), (T, n2), (n1, T), (c1, T), (T, c2), (T, T)]
    }
    assert got == expected


def test_untyped_length_one_generalizes_to_top():
    g = graph_of(f"<{X}d> <{X}p1> <{X}n1> .")
    got = generalize_path(g, path(("p1", "n1")), t=3)
    assert got == {Feature.from_steps([Step(X + "p1", TOP_ELEMENT)])}


def test_length_three_product():
    lines = [f"<{X}d> <{X}p> <{X}a> .", f"<{X}a> <{X}p> <{X}b> .", f"<{X}b> <{X}p> <{X}c> ."]
    for n in "abc":
        lines += [f"<{X}{n}> {TYPE} <{X}K{n}1> .", f"<{X}{n}> {TYPE} <{X}K{n}2> ."]
    g = graph_of(*lines)
    got = generalize_path(g, path(("p", "a"), ("p", "b"), ("p", "c")), t=2)
    assert len(got) == 4 ** 3 - 1
    assert len({f.descriptor for f in got}) == 63


def test_star_and_chain_neighbors():
    g = graph_of(*[f"<{X}r> <{X}p> <{X}{n}> ." for n in "xyz"])
    r = g.node_id(X + "r")
    assert collect_neighbors(g, r, MiningParams(k=1)) == set(ids(g, "x", "y", "z"))
    g = graph_of(f"<{X}r> <{X}p> <{X}a> .", f"<{X}a> <{X}p> <{X}b> .", f"<{X}b> <{X}p> <{X}c> .")
    assert collect_neighbors(g, g.node_id(X + "r"), MiningParams(k=2)) == set(ids(g, "a", "b"))


def test_missing_root_is_error():
    g = graph_of(f"<{X}r> <{X}p> <{X}a> .")
    with pytest.raises(KeyError):
        collect_neighbors(g, 999, MiningParams())


def test_paths_with_prefixes_and_blacklist():
    g = graph_of(f"<{X}r> <{X}p1> <{X}n1> .", f"<{X}n1> <{X}p2> <{X}n2> .")
    r = g.node_id(X + "r")
    assert enumerate_paths(g, r, MiningParams(k=2)) == {path(("p1", "n1")), path(("p1", "n1"), ("p2", "n2"))}
    blocked = MiningParams(k=2, b_predicates=frozenset({X + "p1"}))
    assert enumerate_paths(g, r, blocked) == set()


def test_hub_reached_not_expanded():
    lines = [f"<{X}r> <{X}p> <{X}hub> ."] + [f"<{X}hub> <{X}p> <{X}o{i}> ." for i in range(5)]
    g = graph_of(*lines)
    r = g.node_id(X + "r")
    assert collect_neighbors(g, r, MiningParams(k=2, deg=4)) == set(ids(g, "hub"))
    assert len(collect_neighbors(g, r, MiningParams(k=2, deg=5))) == 6


def test_exp_type_blacklist_excludes_node():
    g = graph_of(f"<{X}r> <{X}p> <{X}a> .", f"<{X}a> <{X}p> <{X}b> .", f"<{X}a> {TYPE} <{X}Bad> .")
    r = g.node_id(X + "r")
    assert collect_neighbors(g, r, MiningParams(k=2, b_exp_types=frozenset({X + "Bad"}))) == set()


def test_pruning_examples():
    g = graph_of(f"<{X}d> <{X}p> <{X}n1> .", f"<{X}n1> {TYPE} <{X}C1> .")
    p_node = Feature.from_steps([Step(X + "p", Element(NODE, X + "n1"))])
    p_class = Feature.from_steps([Step(X + "p", Element(CLASS, X + "C1"))])
    p_top = Feature.from_steps([Step(X + "p", TOP_ELEMENT)])
    assert prune_most_specific(g, {p_node: {1, 2}, p_class: {1, 2}}) == {p_node}
    assert prune_most_specific(g, {p_class: {1, 2}, p_top: {1, 2}}) == {p_class}
    assert prune_most_specific(g, {p_class: {1, 2}, p_top: {1, 2, 3}}) == {p_class, p_top}
    nb = Feature.neighbor(X + "n1")
    assert nb in prune_most_specific(g, {nb: {1, 2}, p_node: {1, 2}})


def test_support_filter_inclusive():
    ext = {"a": {1, 2, 3, 4}, "b": {1, 2, 3, 4, 5}}
    assert filter_support(ext, 5) == {"b"}
    assert filter_support(ext, 0, 4) == {"a"}
    with pytest.raises(ValueError):
        filter_support(ext, 5, 4)


@given(st.lists(st.integers(0, 12), max_size=30), st.integers(0, 12), st.integers(0, 12))
def test_support_filter_oracle(sizes, a, b):
    ext = {i: set(range(s)) for i, s in enumerate(sizes)}
    lo, hi = min(a, b), max(a, b)
    assert filter_support(ext, lo, hi) == {i for i, s in enumerate(sizes) if lo <= s <= hi}


def _domain_graph():
    return graph_of(
        f"<{X}d> <{X}p> <http://kegg/pw1> .",
        f"<{X}d> <{X}p> <{X}chem> .",
        f"<{X}d> <{X}q> <{X}go1> .",
        f"<{X}go1> {TYPE} <{X}GoTerm> .",
        f"<{X}GoTerm> {SUB} <{X}GoRoot> .",
    )


def test_domain_filter():
    g = _domain_graph()
    reg = DomainRegistry({"pathway": ("http://kegg/",), "mesh": ("http://mesh/",)}, {"gene": (X + "GoRoot",)})
    pw = Feature.from_steps([Step(X + "p", Element(NODE, "http://kegg/pw1"))])
    chem = path(("p", "chem"))
    go = path(("q", "go1"))
    go_cls = Feature.from_steps([Step(X + "q", Element(CLASS, X + "GoTerm"))])
    feats = [pw, chem, go, go_cls, Feature.neighbor("http://kegg/pw1")]
    assert filter_domain(g, feats, "no-check", None) == set(feats)
    assert filter_domain(g, feats, "p", reg) == {pw, Feature.neighbor("http://kegg/pw1")}
    assert filter_domain(g, feats, "pg", reg) == {pw, go, go_cls, Feature.neighbor("http://kegg/pw1")}
    assert chem not in filter_domain(g, feats, "pgm", reg)
    with pytest.raises(ConfigError):
        DomainRegistry({"chemistry": ("x",)})


def test_registry_from_file(tmp_path):
    p = tmp_path / "reg.cfg"
    p.write_text("pathway.prefixes = http://kegg/\n  http://reactome/\ngene.classes = http://x/Gene\n")
    reg = DomainRegistry.from_file(p)
    assert reg.prefixes["pathway"] == ("http://kegg/", "http://reactome/")
    assert reg.categories_for("pg") == ["pathway", "gene"]
    with pytest.raises(ConfigError):
        reg.categories_for("m")


def test_no_edges_gives_empty_matrix():
    g = graph_of(f"<{X}d> {TYPE} <{X}Drug> .")
    fm = mine_features(g, [g.node_id(X + "d")], MiningParams())
    assert fm.shape == (1, 0)


@given(st.integers(0, 100_000))
@settings(max_examples=30, deadline=None)
def test_miner_matches_brute_force(seed):
    raw, g, roots, kw = random_case(seed)
    fm = mine_features(g, [g.node_id(r) for r in roots], params_of(kw))
    assert fm.extents() == brute_force_mine(raw, roots, **kw)


@given(st.integers(0, 100_000))
@settings(max_examples=15, deadline=None)
def test_monotonicity(seed):
    raw, g, roots, kw = random_case(seed)
    kw.pop("s_max", None)
    r = [g.node_id(x) for x in roots]
    base = set(mine_features(g, r, params_of(kw)).descriptors)
    stricter = set(mine_features(g, r, params_of(dict(kw, s_min=kw["s_min"] + 1))).descriptors)
    assert stricter <= base
    if kw["deg"] >= 0:
        nb = lambda d: {x for x in mine_features(g, r, params_of(dict(kw, deg=d))).descriptors if x.startswith("[")}
        assert nb(kw["deg"]) <= nb(kw["deg"] + 3)


def test_threads_do_not_change_output(tmp_path):
    _, g, roots, kw = random_case(5)
    r = [g.node_id(x) for x in roots]
    a = mine_features(g, r, params_of(kw))
    b = mine_features(g, r, params_of(dict(kw, threads=3)))
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    assert (tmp_path / "a" / "matrix.tsv").read_bytes() == (tmp_path / "b" / "matrix.tsv").read_bytes()
    assert (tmp_path / "a" / "features.json").read_bytes() == (tmp_path / "b" / "features.json").read_bytes()


def test_matrix_round_trip_and_order(tmp_path):
    _, g, roots, kw = random_case(8)
    fm = mine_features(g, [g.node_id(x) for x in roots], params_of(kw))
    assert fm.descriptors == sorted(fm.descriptors)
    fm.write(tmp_path, {"note": "x"})
    back = FeatureMatrix.read(tmp_path)
    assert back.features == fm.features
    assert back.root_iris == fm.root_iris
    assert np.array_equal(back.dense(), fm.dense())


def test_stage_counts_and_cap():
    _, g, roots, kw = random_case(21)
    r = [g.node_id(x) for x in roots]
    fm = mine_features(g, r, params_of(kw))
    s = fm.stats
    for stage_a, stage_b in (("mined", "after_specificity"), ("after_specificity", "after_support"),
                             ("after_support", "after_domain")):
        for kind in s[stage_a]:
            assert s[stage_b][kind] <= s[stage_a][kind]
    total = sum(s["mined"].values())
    if total > 2:
        with pytest.raises(FeatureCapExceeded) as exc:
            mine_features(g, r, params_of(dict(kw, feature_cap=total - 1)))
        assert exc.value.stats["peak_features"] <= total - 1
        assert exc.value.stats["aborted"]
