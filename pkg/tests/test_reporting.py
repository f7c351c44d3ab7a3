import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgexplain.dataset import DataError
from kgexplain.evaluation import ANSWERS, AnnotationTable
from kgexplain.features import CLASS, NODE, TOP_ELEMENT, Element, Feature, Step
from kgexplain.graph import RDF_TYPE, RDFS_LABEL
from kgexplain.reporting import (
    AgreementTable, agreement_markdown, agreement_ratios, is_generic, local_name, postprocess_rules,
    render_features, rules_markdown, translate_feature,
)
from kgexplain.ripper import Literal, Rule, RuleSet, ruleset_predict

from conftest import graph_of
from oracles import agreement_fixture

DB = "http://bio2rdf.org/drugbank:"
VOC = "http://bio2rdf.org/drugbank_vocabulary:"
RES = "http://bio2rdf.org/genatlas_vocabulary:Resource"
LEX = {VOC + "enzyme": "interactsWith", VOC + "target": "targets"}


def _graph():
    return graph_of(
        f'<{DB}BE0003543> <{RDFS_LABEL}> "Cytochrome P450 1A1" .',
        f"<{DB}DB00001> <{VOC}enzyme> <{DB}BE0003543> .",
        f"<{DB}BE0003543> <{RDF_TYPE}> <{RES}> .",
        f"<{DB}DB00001> <{VOC}target> <{DB}BE0000048> .",
    )


def test_label_resolution():
    g = _graph()
    f = Feature.from_steps([Step(VOC + "enzyme", Element(NODE, DB + "BE0003543"))])
    r = translate_feature(f, g, LEX)
    assert r.text == "-[interactsWith]-> Cytochrome P450 1A1"
    assert r.main_entity == DB + "BE0003543"
    c = Feature.from_steps([Step(VOC + "enzyme", Element(CLASS, DB + "BE0003543"))])
    assert translate_feature(c, g, LEX).text == "-[interactsWith]-> Cytochrome P450 1A1"


def test_fallbacks_and_negation():
    g = _graph()
    f = Feature.from_steps([Step(VOC + "target", Element(NODE, DB + "BE0000048")),
                            Step(VOC + "unknownRel", TOP_ELEMENT, inverse=True)])
    r = translate_feature(f, g, LEX, negated=True)
    assert r.text == "¬(-[targets]-> BE0000048 <-[unknownRel]-)"
    assert r.main_entity is None
    assert translate_feature(f, g, LEX, negated=True).text == r.text
    assert translate_feature(Feature.neighbor(DB + "BE0003543"), g).text == "~ Cytochrome P450 1A1"
    assert local_name("http://x/a#b") == "b" and local_name("http://x/a/") == "a"


def test_renderings_distinct():
    g = graph_of(f'<http://x/a> <{RDFS_LABEL}> "Same" .', f'<http://y/a> <{RDFS_LABEL}> "Same" .',
                 "<http://x/a> <http://x/p> <http://y/a> .")
    feats = [Feature.from_steps([Step("http://x/p", Element(NODE, "http://x/a"))]),
             Feature.from_steps([Step("http://x/p", Element(NODE, "http://y/a"))]),
             Feature.from_steps([Step("http://x/p", Element(CLASS, "http://x/a"))]),
             Feature.from_steps([Step("http://x/p", TOP_ELEMENT)]),
             Feature.neighbor("http://x/a")]
    texts = [r.text for r in render_features(feats, g)]
    assert len(set(texts)) == len(texts)


def _generic_fixture():
    resource = Feature.from_steps([Step("http://x/p", Element(CLASS, RES)), Step("http://x/q", Element(CLASS, RES))])
    top = Feature.from_steps([Step("http://x/p", TOP_ELEMENT)])
    enzyme = Feature.from_steps([Step(VOC + "enzyme", Element(NODE, DB + "BE0003543"))])
    mixed = Feature.from_steps([Step("http://x/p", Element(CLASS, RES)), Step("http://x/q", Element(NODE, "http://x/n"))])
    return [resource, top, enzyme, mixed]


def test_generic_filter():
    feats = _generic_fixture()
    assert [is_generic(f, {RES}) for f in feats] == [True, True, False, False]
    rules = RuleSet([Rule((Literal(0), Literal(2, False)), 10, 2), Rule((Literal(1), Literal(3), Literal(2)), 6, 1)], 4)
    items = postprocess_rules(rules, feats, {RES})
    assert [it.feature_index for it in items] == [2, 3]
    assert items[0].occurrences == [(0, False), (1, True)]


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_postprocess_keeps_predictions(seed):
    rng = np.random.default_rng(seed)
    feats = _generic_fixture()
    rules = RuleSet([Rule(tuple(Literal(int(j), bool(rng.integers(2))) for j in rng.choice(4, size=2, replace=False)),
                          8, 1) for _ in range(3)], 4)
    X = rng.integers(2, size=(20, 4))
    before = [ruleset_predict(rules, row) for row in X]
    snapshot = rules.to_dict()
    postprocess_rules(rules, feats, {RES})
    assert rules.to_dict() == snapshot
    assert [ruleset_predict(rules, row) for row in X] == before


def test_rules_markdown():
    g = _graph()
    feats = _generic_fixture()
    md = rules_markdown(RuleSet([Rule((Literal(2), Literal(1, False)), 106.79, 14.81)], 4), feats, g, LEX)
    assert "| # | Rule | Support | Nb of FP |" in md
    assert "-[interactsWith]-> Cytochrome P450 1A1 ∧ ¬(-[p]->) ⇒ ⊕ | 106.79 | 14.81 |" in md


def test_agreement_all_yes():
    rows = [(f"f{i}", r, "yes") for i in range(4) for r in "ABC"]
    t = agreement_ratios(AnnotationTable(rows))
    assert t.ratios == {"full_no": 0.0, "at_least_1": 1.0, "at_least_2": 1.0, "at_least_3": 1.0, "full_yes": 1.0}


def test_agreement_missing_answer():
    with pytest.raises(DataError, match="f1/B"):
        agreement_ratios(AnnotationTable([("f1", "A", "yes"), ("f2", "A", "no"), ("f2", "B", "no")]))


def test_agreement_fixture_counts():
    t = agreement_ratios(AnnotationTable(agreement_fixture(11, 11, 10, 8, 2)))
    assert t.counts == {"full_no": 0, "at_least_1": 11, "at_least_2": 10, "at_least_3": 8, "full_yes": 2}
    assert "0.73 (8)" in agreement_markdown({"DILI": t})


def _recount(rows):
    by = {}
    for f, r, a in rows:
        by.setdefault(f, []).append(a)
    out = dict.fromkeys(AgreementTable.KEYS, 0)
    for answers in by.values():
        k = sum(a != "no" for a in answers)
        out["at_least_1"] += k >= 1
        out["at_least_2"] += k >= 2
        out["at_least_3"] += k >= 3
        out["full_yes"] += all(a == "yes" for a in answers)
        out["full_no"] += all(a == "no" for a in answers)
    return out


@given(st.integers(0, 10_000), st.integers(1, 30))
@settings(max_examples=50)
def test_agreement_matches_recount(seed, n):
    rng = np.random.default_rng(seed)
    rows = [(f"f{i}", r, ANSWERS[int(rng.integers(3))]) for i in range(n) for r in "ABC"]
    t = agreement_ratios(AnnotationTable(rows))
    assert t.counts == _recount(rows)
    r = t.ratios
    assert r["at_least_1"] >= r["at_least_2"] >= r["at_least_3"] >= r["full_yes"]
    assert r["full_no"] + r["at_least_1"] == pytest.approx(1.0)
