"""Test semilinear sets, the nonnegative linear solver and unary sets
"""

import itertools

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from rbcm.machines import ResourceLimitError, automaton_words
from rbcm.semilinear import (
    LinearSet,
    SemilinearSet,
    UltimatelyPeriodicSet,
    sls_member,
    solve_nonneg_linear,
    unary_to_upset,
    upset_to_dfa,
)

BOX = 12


def _box_check(A, b, box=BOX):
    """Compare solver output with brute force over ``[0, box]^n``"""
    A = np.asarray(A)
    n = A.shape[1]
    solved = solve_nonneg_linear(A, b)
    points = np.array(list(itertools.product(range(box + 1), repeat=n)))
    satisfied = np.all(points @ A.T == np.asarray(b), axis=1)
    for x, expected in zip(points, satisfied):
        assert sls_member(solved, tuple(x)) == bool(expected), f"{tuple(x)}"
    return solved


@pytest.mark.parametrize(
    "A, b",
    [
        pytest.param([[1, 1]], [3], id="x+y=3"),
        pytest.param([[1, -1]], [0], id="x=y"),
        pytest.param([[2, -1]], [1], id="2x-y=1"),
        pytest.param([[2]], [1], id="2x=1 infeasible"),
        pytest.param([[1, -2, 0]], [0], id="free third variable"),
        pytest.param([[1, 1, -1]], [2], id="x+y-z=2"),
        pytest.param([[1, -1, 0], [0, 1, -1]], [0, 0], id="x=y=z"),
        pytest.param([[3, -2]], [0], id="3x=2y"),
        pytest.param([[1, 2, -3]], [1], id="x+2y-3z=1"),
        pytest.param([[1, -1, 1, -1]], [0], id="four unknowns"),
        pytest.param([[1, 0, -1, 0], [0, 1, 0, -1]], [1, 2], id="two shifts"),
        pytest.param([[0, 0]], [0], id="zero matrix"),
    ],
)
def test_solve_nonneg_linear_box(A, b):
    """Test solver soundness and completeness over a bounded box"""
    _box_check(A, b)


def test_solve_nonneg_linear_structure():
    """Test the constants and periods of a simple system"""
    solved = solve_nonneg_linear([[1, -1]], [1])
    assert solved.components == (LinearSet((1, 0), ((1, 1),)),)


def test_solve_nonneg_linear_infeasible_is_empty():
    assert solve_nonneg_linear([[2, 4]], [3]).is_empty


def test_solve_nonneg_linear_norm_cap():
    with pytest.raises(ResourceLimitError):
        solve_nonneg_linear([[7, -11]], [0], norm_cap=5)


def test_solve_nonneg_linear_shape_mismatch():
    with pytest.raises(ValueError):
        solve_nonneg_linear([[1, 1]], [1, 2])


@settings(deadline=None, max_examples=25)
@given(
    st.lists(st.integers(-2, 2), min_size=2, max_size=3),
    st.integers(0, 3),
)
def test_solve_nonneg_linear_sound(row, rhs):
    """Test that every constant and period obeys the system"""
    solved = solve_nonneg_linear([row], [rhs])
    for c in solved.components:
        assert np.dot(row, c.constant) == rhs
        for p in c.periods:
            assert np.dot(row, p) == 0


def test_linear_set_rejects_negative():
    with pytest.raises(ValueError):
        LinearSet((-1,))


def test_semilinear_operations():
    """Test union, sum, star and projection on small sets"""
    evens = SemilinearSet(1, (LinearSet((0,), ((2,),)),))
    three = SemilinearSet.point((3,))
    odd_from_3 = evens.plus(three)
    assert (5,) in odd_from_3
    assert (4,) not in odd_from_3
    assert (4,) in evens.union(three)
    assert (9,) in three.star()
    assert (0,) in three.star()
    assert (4,) not in three.star()
    plane = SemilinearSet(2, (LinearSet((1, 2), ((1, 1),)),))
    assert plane.project([1]).components == (LinearSet((2,), ((1,),)),)


def test_semilinear_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        SemilinearSet.point((1,)).union(SemilinearSet.point((1, 2)))


def test_simplified_drops_redundancy():
    s = SemilinearSet(
        1,
        (
            LinearSet((0,), ((2,), (4,))),
            LinearSet((2,), ((2,),)),
        ),
    )
    assert s.simplified().components == (LinearSet((0,), ((2,),)),)


def test_image():
    s = SemilinearSet(1, (LinearSet((1,), ((1,),)),))
    doubled = s.image([[2], [1]], offset=[0, 1])
    assert (4, 3) in doubled
    assert (3, 3) not in doubled


@pytest.mark.parametrize(
    "components, members",
    [
        pytest.param([((0,), [(3,)])], {0, 3, 6, 9, 12}, id="multiples of 3"),
        pytest.param([((2,), [(3,), (5,)])], {2, 5, 7, 8, 10, 11, 12, 13}, id="numerical semigroup"),
        pytest.param([((1,), []), ((4,), [])], {1, 4}, id="finite"),
        pytest.param([], set(), id="empty"),
    ],
)
def test_unary_to_upset(components, members):
    """Test the ultimately periodic normal form and its DFA"""
    s = SemilinearSet(1, tuple(LinearSet(c, p) for c, p in components))
    upset = unary_to_upset(s)
    horizon = 14
    assert {n for n in range(horizon) if n in upset} == members
    for n in range(40):
        assert (n in upset) == sls_member(s, (n,))
    words = automaton_words(upset_to_dfa(upset), 40)
    assert {len(w) for w in words} == {n for n in range(41) if n in upset}


@pytest.mark.parametrize(
    "components, threshold, period, explicit, residues",
    [
        pytest.param([((3,), [(1,)])], 3, 1, set(), {0}, id="from 3 on"),
        pytest.param([((0,), [(3,)])], 0, 3, set(), {0}, id="multiples of 3"),
        pytest.param([((0,), [(2,)]), ((1,), [(2,)])], 0, 1, set(), {0}, id="all by halves"),
        pytest.param([((2,), [(3,), (5,)])], 10, 1, {2, 5, 7, 8}, {0}, id="numerical semigroup"),
        pytest.param([((1,), []), ((4,), [])], 5, 1, {1, 4}, set(), id="finite"),
        pytest.param([], 0, 1, set(), set(), id="empty"),
    ],
)
def test_unary_to_upset_is_tight(components, threshold, period, explicit, residues):
    """Test that the normal form uses the smallest period and threshold"""
    s = SemilinearSet(1, tuple(LinearSet(c, p) for c, p in components))
    upset = unary_to_upset(s)
    assert upset.threshold == threshold
    assert upset.period == period
    assert upset.explicit == explicit
    assert upset.residues == residues


def test_upset_validation():
    with pytest.raises(ValueError):
        UltimatelyPeriodicSet(2, 0, set(), set())
    with pytest.raises(ValueError):
        UltimatelyPeriodicSet(2, 3, {2}, set())
    assert UltimatelyPeriodicSet(0, 1, set(), set()).is_empty
