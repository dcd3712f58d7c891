"""Frozen oracle values, each recomputed here by an independent route."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from dynkinlab import acceptance, oracles


def _survival_images(t: float, a: float = 1.0) -> float:
    # reflection-principle series for P_0[sup_{s<=t} |B_s| < a]
    k = np.arange(-60, 61)
    s = math.sqrt(t)
    return float(np.sum((-1.0) ** k * (norm.cdf((2 * k + 1) * a / s) - norm.cdf((2 * k - 1) * a / s))))


def _dirichlet_images(y, t, x=0.0):
    k = np.arange(-50, 51)

    def g(z):
        return np.exp(-z * z / (2 * t)) / math.sqrt(2 * math.pi * t)

    return float(np.sum(g(y - x - 4 * k) - g(-2 - y - x - 4 * k)))


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_exit_prob_frozen_matches_two_expansions(t):
    frozen = acceptance.ORACLE_EXIT_PROB[t]
    assert abs(oracles.interval_exit_prob(0.0, t) - frozen) < 1e-9
    assert abs((1.0 - _survival_images(t)) - frozen) < 1e-9


def test_capped_mean_frozen():
    images = integrate.quad(_survival_images, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)[0]
    assert abs(images - acceptance.ORACLE_CAPPED_MEAN) < 1e-9
    assert abs(oracles.capped_mean_exit(0.0, 1.0) - acceptance.ORACLE_CAPPED_MEAN) < 1e-9


def test_mean_exit_ode_solution():
    assert oracles.mean_exit(0.0) == 1.0
    assert oracles.mean_exit(0.5, -1.0, 1.0) == pytest.approx(0.75)


def test_cell_density_frozen():
    w = 2.0**-9
    val = integrate.quad(_dirichlet_images, 0.0, w, args=(0.1,), epsabs=1e-14)[0] / w
    assert abs(val - acceptance.ORACLE_CELL_DENSITY) < 1e-8
    mass = oracles.dirichlet_cell_mass(0.1, 0.0, 0.0, w)
    assert abs(mass / w - acceptance.ORACLE_CELL_DENSITY) < 1e-8


def test_laplace_transform_of_exit():
    # E_0[exp(-tau)] for (-1, 1) equals 1/cosh(sqrt 2)
    assert oracles.laplace_exit_centered(1.0, 1.0) == pytest.approx(0.4590981311, abs=1e-10)


@pytest.mark.parametrize("t,x", [(0.01, 0.0), (0.1, 0.3), (0.5, -0.7), (2.0, 0.0)])
def test_dirichlet_kernel_matches_images(t, x):
    ys = np.linspace(-0.95, 0.95, 7)
    got = oracles.dirichlet_kernel(t, x, ys)
    ref = [_dirichlet_images(y, t, x) for y in ys]
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-14)


def test_gaussian_interval_prob():
    assert oracles.gaussian_interval_prob(0.0, 1.0, -1.0, 1.0) == pytest.approx(0.6826894921370859)
