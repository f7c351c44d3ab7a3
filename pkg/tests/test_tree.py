import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgexplain.tree import DecisionTree, adaboost_select, best_split, train_cart, tree_predict

from oracles import gini_split_oracle


def test_root_gini_balanced():
    X = np.zeros((10, 1), dtype=np.uint8)
    y = np.array([1] * 5 + [0] * 5)
    tree = train_cart(X, y, np.ones(10))
    assert tree.n_nodes == 1
    assert tree.gini(0) == pytest.approx(0.5)


def test_perfect_split():
    X = np.array([[1, 0]] * 6 + [[0, 1]] * 6, dtype=np.uint8)
    y = np.array([1] * 6 + [0] * 6)
    tree = train_cart(X, y, np.ones(12), min_leaf=1)
    assert tree.feature[0] == 0
    for leaf in tree.leaves():
        assert tree.gini(leaf) == 0.0
    labels, _ = tree.predict(X)
    assert np.array_equal(labels, y)


def _fixture12():
    rng = np.random.default_rng(12)
    X = (rng.random((12, 4)) < 0.5).astype(np.uint8)
    y = np.array([1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0])
    w = rng.random(12) + 0.5
    return X, y, w


def test_split_matches_exhaustive_oracle_fixture():
    X, y, w = _fixture12()
    for min_leaf in (1, 2, 3):
        j, gain = best_split(X, y, w, np.arange(12), frozenset(), min_leaf)
        oj, og = gini_split_oracle(X, y, w, min_leaf)
        assert j == oj
        if j >= 0:
            assert gain == pytest.approx(og, abs=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_split_matches_oracle_random(seed, min_leaf):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 20))
    X = (rng.random((n, 5)) < 0.5).astype(np.uint8)
    y = rng.integers(2, size=n)
    w = rng.random(n) + 0.1
    j, gain = best_split(X, y, w, np.arange(n), frozenset(), min_leaf)
    oj, og = gini_split_oracle(X, y, w, min_leaf)
    if oj < 0:
        assert j < 0 or gain < 1e-10
    else:
        assert gain == pytest.approx(og, abs=1e-10)


def test_leaf_score_three_to_one():
    X = np.zeros((4, 1), dtype=np.uint8)
    tree = train_cart(X, np.array([1, 1, 1, 0]), np.ones(4))
    label, score = tree_predict(tree, np.array([0]))
    assert label == 1 and score == pytest.approx(0.75)


def test_min_leaf_respected():
    rng = np.random.default_rng(5)
    X = (rng.random((60, 8)) < 0.3).astype(np.uint8)
    y = rng.integers(2, size=60)
    tree = train_cart(X, y, np.ones(60), min_leaf=5)
    assert all(tree.count[i] >= 5 for i in tree.leaves())


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
@settings(max_examples=30, deadline=None)
def test_weight_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    X = (rng.random((30, 5)) < 0.5).astype(np.uint8)
    y = rng.integers(2, size=30)
    w = rng.random(30) + 0.1
    a, b = train_cart(X, y, w, 3), train_cart(X, y, w * c, 3)
    assert np.array_equal(a.feature, b.feature)
    assert np.array_equal(a.predict(X)[0], b.predict(X)[0])


def test_predict_length_mismatch():
    X, y, w = _fixture12()
    tree = train_cart(X, y, w, 2)
    with pytest.raises(ValueError):
        tree_predict(tree, np.zeros(3))


def test_serialization_round_trip():
    X, y, w = _fixture12()
    tree = train_cart(X, y, w, 1)
    again = DecisionTree.from_dict(tree.to_dict())
    assert np.array_equal(again.predict(X)[1], tree.predict(X)[1])


def test_alpha_for_quarter_error():
    # the absent leaf ties 3/3 and goes negative, so 3 of 12 are missed
    X = np.array([[1]] * 6 + [[0]] * 6, dtype=np.uint8)
    y = np.array([1] * 6 + [0] * 3 + [1] * 3)
    ens, _ = adaboost_select(X, y, np.ones(12), max_rounds=1, min_leaf=1)
    assert ens.errors[0] == pytest.approx(0.25)
    assert ens.alphas[0] == pytest.approx(0.5 * math.log(3), abs=1e-4)
    assert ens.alphas[0] == pytest.approx(0.5493, abs=1e-4)


def test_perfect_fit_stops_with_capped_alpha():
    X = np.array([[1]] * 5 + [[0]] * 5, dtype=np.uint8)
    y = np.array([1] * 5 + [0] * 5)
    ens, sel = adaboost_select(X, y, np.ones(10), max_rounds=10, min_leaf=1)
    assert len(ens.trees) == 1 and ens.stopped == "perfect_fit"
    assert sel == [0]
    e0 = 1 / 20
    assert ens.alphas[0] == pytest.approx(0.5 * math.log((1 - e0) / e0))


def test_chance_learner_stops():
    X = np.zeros((10, 2), dtype=np.uint8)
    y = np.array([1] * 5 + [0] * 5)
    ens, sel = adaboost_select(X, y, np.ones(10))
    assert ens.trees == [] and sel == []
    assert ens.stopped == "weak_learner_at_chance"


def test_boost_weights_sum_to_one():
    rng = np.random.default_rng(1)
    X = (rng.random((50, 6)) < 0.5).astype(np.uint8)
    y = (X[:, 0] ^ (rng.random(50) < 0.2)).astype(int)
    ens, _ = adaboost_select(X, y, rng.random(50) + 0.5, max_rounds=5, min_leaf=3)
    for wt in ens.weights:
        assert wt.sum() == pytest.approx(1.0)


def test_selection_grows_with_rounds():
    rng = np.random.default_rng(2)
    X = (rng.random((80, 10)) < 0.5).astype(np.uint8)
    y = ((X[:, 0] + X[:, 1] + X[:, 2]) >= 2).astype(int)
    prev: set[int] = set()
    for r in range(1, 7):
        _, sel = adaboost_select(X, y, np.ones(80), max_rounds=r, min_leaf=3)
        assert prev <= set(sel)
        prev = set(sel)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        train_cart(np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    with pytest.raises(ValueError):
        train_cart(np.zeros((2, 2)), np.array([0, 1]), np.array([1.0, 0.0]))
