import numpy as np
import pytest

from hcrspread.basis import enumerate_basis
from hcrspread.errors import InvalidSpecError
from hcrspread.grouping import ScoreParams, build_tree, cut_tree, fit_common
from hcrspread.model import fit
from hcrspread.synthetic import sample_conditional

BX = enumerate_basis("B((2),2,1)")
BY = enumerate_basis("B((3),3,1)")


def planted(seed, n=1500, per_group=3, c=0.7):
    rng = np.random.default_rng(seed)
    data = {}
    for g, sign in (("a", 1), ("b", -1)):
        for i in range(per_group):
            data[f"{g}{i}"] = sample_conditional(rng, n, 1, [(sign * c, 1, (1,))])
    return data


def test_single_entity_common_is_individual(rng):
    x, y = sample_conditional(rng, 500, 1, [(0.5, 1, (1,))])
    model, scores = fit_common({"e": (x, y)}, BX, BY)
    np.testing.assert_array_equal(model.beta, fit(BX, BY, x, y).beta)
    assert list(scores) == ["e"]


def test_identical_entities_score_equally(rng):
    data = sample_conditional(rng, 500, 1, [(0.5, 1, (1,))])
    for cv in (False, True):
        _, scores = fit_common({"a": data, "b": data}, BX, BY, ScoreParams(cv=cv))
        assert scores["a"] == pytest.approx(scores["b"], abs=1e-12)


def test_opposite_dependence_cancels():
    data = planted(1, per_group=1)
    _, common = fit_common(data, BX, BY)
    for e in data:
        _, indiv = fit_common({e: data[e]}, BX, BY)
        assert indiv[e] > 0.1
        assert abs(common[e]) < 0.03


def test_individual_beats_common_in_cv():
    data = planted(2, per_group=1)
    params = ScoreParams(cv=True)
    _, common = fit_common(data, BX, BY, params)
    for e in data:
        _, indiv = fit_common({e: data[e]}, BX, BY, params)
        assert indiv[e] > common[e] + 0.05


def test_tree_recovers_planted_groups():
    data = planted(3)
    tree = build_tree(data, BX, BY)
    assert len(tree.merges) == 5
    for m in tree.merges[:4]:
        assert len({e[0] for e in m.members}) == 1
    root = tree.merges[-1]
    assert {frozenset(root.left), frozenset(root.right)} == {
        frozenset({"a0", "a1", "a2"}), frozenset({"b0", "b1", "b2"})}
    clusters = cut_tree(tree, 2)
    assert sorted(tuple(sorted(c.members)) for c in clusters) == [("a0", "a1", "a2"), ("b0", "b1", "b2")]


def test_two_entities_one_merge(rng):
    data = {e: sample_conditional(rng, 400, 1, [(0.5, 1, (1,))]) for e in ("p", "q")}
    tree = build_tree(data, BX, BY)
    assert len(tree.merges) == 1
    assert set(tree.merges[0].members) == {"p", "q"}


def test_twin_criterion_is_one(rng):
    data = sample_conditional(rng, 600, 1, [(0.6, 1, (1,))])
    other = sample_conditional(rng, 600, 1, [(-0.6, 1, (1,))])
    tree = build_tree({"a": data, "twin": data, "other": other}, BX, BY)
    first = tree.merges[0]
    assert set(first.members) == {"a", "twin"}
    assert first.criterion == pytest.approx(1.0, abs=1e-9)


def test_cut_tree_extremes_and_models():
    data = planted(4, n=600)
    tree = build_tree(data, BX, BY)
    (everything,) = cut_tree(tree, 1, data)
    assert set(everything.members) == set(data) and everything.model is not None
    singles = cut_tree(tree, 6)
    assert [c.members for c in singles] == [(e,) for e in data]
    for k in (0, 7):
        with pytest.raises(InvalidSpecError):
            cut_tree(tree, k)


def test_tree_deterministic_and_exports(tmp_path):
    data = planted(5, n=500)
    a, b = build_tree(data, BX, BY), build_tree(data, BX, BY)
    assert [(m.left, m.right, m.criterion) for m in a.merges] == [(m.left, m.right, m.criterion) for m in b.merges]
    a.write_json(tmp_path / "t.json")
    a.write_levels_csv(tmp_path / "t.csv")
    levels = a.levels()
    assert len(levels) == len(data) + sum(len(m.members) for m in a.merges)
    nested = a.to_nested()
    assert sorted(nested["members"]) == sorted(data)


def test_negative_individual_scores_use_difference(rng):
    # independent data: in-sample scores hover around zero, some negative under CV
    data = {e: (rng.random(300), rng.random(300)) for e in "abc"}
    tree = build_tree(data, BX, BY, ScoreParams(cv=True))
    assert len(tree.merges) == 2
    for m in tree.merges:
        if m.individual_ll <= 0:
            assert m.criterion == pytest.approx(m.common_ll - m.individual_ll)
