from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynkinlab.space import (Circle, ConfigError, Gasket, Line, OpenSetSpec, ball_membership,
                             inner_set_membership, volume_doubling_report)

finite = st.floats(-50, 50, allow_nan=False)


def test_ball_membership_examples():
    line = Line()
    assert ball_membership(line, 0.0, 1.0, 0.999)
    assert not ball_membership(line, 0.0, 1.0, 1.0)
    assert ball_membership(Circle(1.0), 0.0, 0.3, 0.8)


def test_inner_set_membership_examples():
    line = Line()
    U = OpenSetSpec.interval(0.0, 1.0)
    assert inner_set_membership(line, U, 0.2, 1.0, 0.5)
    assert not inner_set_membership(line, U, 0.2, 1.0, 0.15)
    with pytest.raises(ConfigError):
        inner_set_membership(line, U, 1.0, 1.0, 0.5)


def test_inner_set_on_circle_is_smaller_ball():
    c = Circle(4.0)
    U = OpenSetSpec.ball(0.0, 0.5)
    xs = np.linspace(0.0, 4.0, 4001)
    inner = inner_set_membership(c, U, 0.25, 1.0, xs)
    np.testing.assert_array_equal(inner, c.dist(0.0, xs) < 0.25)


def test_volume_doubling_line_exact():
    rep = volume_doubling_report(Line(), np.linspace(-5, 5, 11), np.logspace(-3, 1, 9), 100.0)
    assert rep.estimate == 2.0 and rep.ok


def test_volume_doubling_circle_saturates():
    rep = volume_doubling_report(Circle(1.0), np.linspace(0, 1, 7), np.linspace(0.05, 0.49, 12), 0.5)
    assert rep.estimate <= 2.0 + 1e-12


def test_volume_doubling_gasket_level5():
    g = Gasket(5)
    # radii of at least two edges; one edge leaves only the center in the open ball
    radii = 2.0 ** -np.arange(1, 5)
    rep = volume_doubling_report(g, np.arange(g.n_vertices), radii, 1.0)
    assert rep.ok
    # graph granularity pushes the ratio past the continuum value 3
    assert 3.0 <= rep.estimate < 5.0


def test_gasket_structure():
    g = Gasket(3)
    assert g.n_vertices == (3**4 + 3) // 2
    assert sorted(g.degree[:3]) == [2, 2, 2]
    assert np.all(g.degree[3:] == 4)
    for v in range(g.n_vertices):
        for w in g.neighbors[v, : g.degree[v]]:
            assert v in g.neighbors[w]
            assert g.dist(v, w) == pytest.approx(g.edge_length)


@given(finite, finite, finite)
def test_triangle_inequality_line(x, y, z):
    d = Line().dist
    # the sum can round one ulp below the exact value
    assert d(x, z) <= (d(x, y) + d(y, z)) * (1 + 1e-15) + 1e-300


@given(finite, finite, finite)
def test_triangle_inequality_circle(x, y, z):
    d = Circle(3.0).dist
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-12


def test_triangle_inequality_gasket_all_triples():
    g = Gasket(2)
    D = g.distance_matrix
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-12)


@given(st.floats(-3, 3), st.floats(0.01, 2), finite)
def test_dist_to_complement_consistent_with_contains(c, r, x):
    line = Line()
    B = OpenSetSpec.ball(c, r)
    assert (B.dist_to_complement(line, x) > 0) == bool(B.contains(line, x))


def test_closure_inside():
    line = Line()
    U = OpenSetSpec.interval(-1, 1)
    assert OpenSetSpec.interval(-0.5, 0.5, closed=True).closure_inside(line, U)
    assert not OpenSetSpec.interval(-1, 0.5, closed=True).closure_inside(line, U)


def test_bad_sets_rejected():
    with pytest.raises(ConfigError):
        OpenSetSpec.interval(1.0, 0.0)
    with pytest.raises(ConfigError):
        OpenSetSpec.ball(0.0, -1.0)
    with pytest.raises(ConfigError):
        OpenSetSpec("square")
