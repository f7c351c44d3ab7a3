import pytest

from kgexplain.features import CLASS, NODE, PATH, PATTERN, TOP_ELEMENT, Element, Feature, Step


def test_descriptors():
    f = Feature.from_steps([Step("http://x/p", Element(NODE, "http://x/n")),
                            Step("http://x/q", Element(CLASS, "http://x/C"), inverse=True),
                            Step("http://x/r", TOP_ELEMENT)])
    assert f.kind == PATTERN
    assert f.descriptor == "->http://x/p [http://x/n] <-http://x/q [C:http://x/C] ->http://x/r [T]"
    assert Feature.neighbor("http://x/n").descriptor == "[http://x/n]"
    assert Feature.from_steps([Step("http://x/p", Element(NODE, "http://x/n"))]).kind == PATH


def test_record_round_trip():
    f = Feature.from_steps([Step("http://x/p", Element(CLASS, "http://x/C"), True)])
    assert Feature.from_record(f.to_record()) == f
    nb = Feature.neighbor("http://x/a")
    assert Feature.from_record(nb.to_record()) == nb
    rec = f.to_record()
    rec["descriptor"] = "wrong"
    with pytest.raises(ValueError):
        Feature.from_record(rec)


def test_validation():
    with pytest.raises(ValueError):
        Feature(PATH, (Step("p", TOP_ELEMENT),))
    with pytest.raises(ValueError):
        Element(NODE)
    with pytest.raises(ValueError):
        Feature(PATH, ())
