from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynkinlab.scale import (ScaleFunction, phi_eval, phi_power_closed_form, phi_sandwich_check, psi_doubling_verify,
                             psi_eval, psi_inverse, default_pairs)
from dynkinlab.space import ConfigError

PIECE = ScaleFunction.piecewise((1.0,), (2.0, 3.0))
pos = st.floats(1e-3, 1e3, allow_nan=False)


def test_psi_examples():
    assert psi_eval(ScaleFunction.power(2.0), 3.0) == pytest.approx(9.0)
    assert psi_eval(PIECE, 0.0) == 0.0
    assert psi_eval(ScaleFunction.power(2.5), 0.0) == 0.0
    assert psi_eval(PIECE, 2.0) == pytest.approx(8.0)


def test_doubling_examples():
    rep = psi_doubling_verify(ScaleFunction.power(2.0), default_pairs(ScaleFunction.power(2.0)))
    assert rep.passed and rep.worst_ratio == pytest.approx(1.0)
    assert psi_doubling_verify(PIECE, default_pairs(PIECE)).passed
    loose = ScaleFunction.power(2.0, beta1=2.5, beta2=2.5, validate=False)
    assert not psi_doubling_verify(loose, default_pairs(loose)).passed
    with pytest.raises(ConfigError):
        ScaleFunction.power(2.0, beta1=2.5, beta2=2.5)


def test_phi_examples():
    sf2 = ScaleFunction.power(2.0)
    assert phi_eval(sf2, 0.0, 1.0) == 0.0
    assert phi_eval(sf2, 2.0, 1.0) == pytest.approx(1.0, rel=1e-9)
    assert phi_power_closed_form(2.0, 2.0, 1.0) == pytest.approx(1.0)
    assert phi_power_closed_form(2.0, 0.0, 1.0) == 0.0
    assert phi_power_closed_form(3.0, 1.0, 1.0) == pytest.approx(2 * 3**-1.5)
    b = math.log2(5.0)
    assert phi_eval(ScaleFunction.power(b), 1.0, 1.0) == pytest.approx(phi_power_closed_form(b, 1.0, 1.0), rel=1e-9)


@pytest.mark.parametrize("beta", [1.5, 2.0, 2.5, math.log2(5.0)])
def test_phi_closed_form_grid(beta):
    g = np.logspace(-2, 2, 50)
    R, t = np.meshgrid(g, g, indexing="ij")
    num = phi_eval(ScaleFunction.power(beta), R, t)
    exact = phi_power_closed_form(beta, R, t)
    assert np.max(np.abs(num - exact) / exact) <= 1e-6


def test_sandwich_examples():
    g = np.logspace(-2, 1, 100)
    assert phi_sandwich_check(ScaleFunction.power(2.0), g, g).passed
    rep = phi_sandwich_check(PIECE, g, g)
    assert rep.passed and rep.min_upper_slack >= 1.0
    # a = 1 is equality
    assert phi_sandwich_check(PIECE, g, g, scales=(1.0,)).homogeneity_violations == 0


@given(pos)
def test_psi_inverse_roundtrip(r):
    for sf in (ScaleFunction.power(2.0), PIECE):
        assert psi_inverse(sf, psi_eval(sf, r)) == pytest.approx(r, rel=1e-9)


@given(pos, pos, st.floats(1.0, 20.0))
def test_phi_homogeneity_and_monotone(R, t, a):
    for sf in (ScaleFunction.power(2.0), PIECE):
        p = phi_eval(sf, R, t)
        assert a * p <= phi_eval(sf, a * R, t) * (1 + 1e-9) + 1e-300
        assert phi_eval(sf, R, 2.0 * t) <= p * (1 + 1e-9) + 1e-300


@given(pos, pos)
def test_phi_positive(R, t):
    assert phi_eval(PIECE, R, t) > 0


def test_bad_scale_functions():
    with pytest.raises(ConfigError):
        ScaleFunction.power(1.0)
    with pytest.raises(ConfigError):
        ScaleFunction.piecewise((1.0, 0.5), (2.0, 3.0, 2.0))
    with pytest.raises(ConfigError):
        ScaleFunction.piecewise((1.0,), (2.0,))


def test_tabulated_matches_power():
    r = np.logspace(-2, 2, 30)
    sf = ScaleFunction.tabulated(r, r**2, 2.0, 2.0, 1.0)
    x = np.logspace(-3, 3, 17)
    np.testing.assert_allclose(psi_eval(sf, x), x**2, rtol=1e-9)
