import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arccert.interval import (
    Box,
    Interval,
    alpha,
    arith,
    contains,
    contains_box,
    join,
    matvec,
    monotone,
)


def iv(lo, hi):
    return Interval(lo, hi)


class TestExamples:
    def test_alpha(self):
        b = alpha([np.array([0.1]), np.array([0.15])])
        assert b.interval(0) == iv(0.1, 0.15)
        assert alpha([np.array([1.0, 2.0])]).is_degenerate()
        b = alpha([np.array([0.0, 1.0]), np.array([1.0, 0.0])])
        assert b == Box([0.0, 0.0], [1.0, 1.0])

    def test_alpha_empty(self):
        with pytest.raises(ValueError):
            alpha([])

    def test_join(self):
        assert join(iv(1, 2), iv(10, 12)) == iv(1, 12)
        assert join(iv(0, 1), iv(0.5, 0.7)) == iv(0, 1)
        a = Box([0.0, 1.0], [2.0, 3.0])
        assert join(a, a) == a

    def test_join_dim_mismatch(self):
        with pytest.raises(ValueError):
            join(Box([0.0], [1.0]), Box([0.0, 0.0], [1.0, 1.0]))

    def test_arith(self):
        assert arith("add", iv(1, 2), iv(3, 4)) == iv(4, 6)
        assert arith("mul", iv(-1, 2), iv(3, 4)) == iv(-4, 8)
        assert arith("mul", iv(0, 0), iv(-5, 7)) == iv(0, 0)

    def test_monotone(self):
        assert monotone("relu", iv(-1, 2)) == iv(0, 2)
        assert monotone("tanh", iv(0, 0)) == iv(0, 0)
        assert monotone("sigmoid", iv(0, 0)) == iv(0.5, 0.5)

    def test_matvec(self):
        out = matvec(np.array([[1.0, -1.0]]), np.zeros(1), Box([0.0, 0.0], [1.0, 1.0]))
        assert out == Box([-1.0], [1.0])
        v = Box([0.0, -2.0], [1.0, 3.0])
        assert matvec(np.eye(2), np.zeros(2), v) == v
        W, b, p = np.array([[2.0, 3.0], [-1.0, 0.5]]), np.array([0.1, -0.2]), np.array([0.3, -0.7])
        out = matvec(W, b, Box.point(p))
        assert out.is_degenerate() and np.allclose(out.lo, W @ p + b)

    def test_matvec_shape_mismatch(self):
        with pytest.raises(ValueError):
            matvec(np.eye(3), np.zeros(3), Box([0.0], [1.0]))

    def test_contains(self):
        b = Box([0.0], [1.0])
        assert contains(b, [0.5], 0)
        assert contains(b, [1 + 1e-12], 1e-9)
        assert not contains(b, [2.0])

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            Interval(1.0, 0.0)
        with pytest.raises(ValueError):
            Box([0.0], [float("inf")])


finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return iv(min(a, b), max(a, b))


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals(), intervals())
def test_join_lattice_laws(a, b, c):
    assert join(a, b) == join(b, a)
    assert join(join(a, b), c) == join(a, join(b, c))
    assert join(a, a) == a


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_mul_contains_products(a, b, u, v):
    p = a.lo + u * (a.hi - a.lo)
    q = b.lo + v * (b.hi - b.lo)
    p, q = min(max(p, a.lo), a.hi), min(max(q, b.lo), b.hi)
    assert contains(Box.from_intervals([arith("mul", a, b)]), [p * q], 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=1, max_size=6))
def test_alpha_is_least(points):
    X = np.array(points)
    box = alpha(list(X))
    assert all(contains(box, x) for x in X)
    # each bound is attained by some point, so shrinking it excludes that point
    assert np.all(np.isin(box.lo, X) | (box.lo == X.min(axis=0)))
    for d in range(3):
        assert (X[:, d] == box.lo[d]).any() and (X[:, d] == box.hi[d]).any()


@settings(max_examples=100, deadline=None)
@given(intervals(), intervals(), finite)
def test_join_contains_members(a, b, v):
    ab = Box.from_intervals([join(a, b)])
    if v in a or v in b:
        assert contains(ab, [v])


def test_contains_box():
    outer = Box([0.0, 0.0], [2.0, 2.0])
    assert contains_box(outer, Box([0.5, 0.5], [1.0, 2.0]))
    assert not contains_box(outer, Box([-0.5, 0.5], [1.0, 2.0]))
