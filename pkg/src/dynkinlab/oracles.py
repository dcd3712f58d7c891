"""Exact reference values for Brownian motion in one dimension.

All formulas are for unit variance per unit time; pass ``scale`` to rescale
time. These are independent of the simulators and serve as test oracles.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr


def gaussian_interval_prob(x: float, t: float, lo: float, hi: float, scale: float = 1.0) -> float:
    """``P_x[X_t in (lo, hi)]`` for free Brownian motion."""
    s = math.sqrt(scale * t)
    return float(ndtr((hi - x) / s) - ndtr((lo - x) / s))


def gaussian_density(t, y, scale: float = 1.0):
    v = scale * np.asarray(t, dtype=float)
    return np.exp(-np.asarray(y, dtype=float) ** 2 / (2.0 * v)) / np.sqrt(2.0 * np.pi * v)


def interval_survival(x: float, t: float, a: float = -1.0, b: float = 1.0, scale: float = 1.0, terms: int = 4000) -> float:
    """``P_x[tau_(a,b) > t]`` by the sine eigenfunction expansion."""
    if t <= 0:
        return 1.0 if a < x < b else 0.0
    L = b - a
    k = np.arange(1, terms + 1)
    coef = 2.0 * (1.0 - (-1.0) ** k) / (k * math.pi)
    lam = 0.5 * scale * (k * math.pi / L) ** 2
    return float(np.sum(coef * np.sin(k * math.pi * (x - a) / L) * np.exp(-lam * t)))


def interval_exit_prob(x: float, t: float, a: float = -1.0, b: float = 1.0, scale: float = 1.0) -> float:
    """``P_x[tau_(a,b) <= t]``."""
    return 1.0 - interval_survival(x, t, a, b, scale)


def capped_mean_exit(x: float, cap: float, a: float = -1.0, b: float = 1.0, scale: float = 1.0) -> float:
    """``E_x[tau_(a,b) ^ cap] = int_0^cap P_x[tau > s] ds`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda s: interval_survival(x, s, a, b, scale), 0.0, cap, limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(val)


def mean_exit(x: float, a: float = -1.0, b: float = 1.0, scale: float = 1.0) -> float:
    """``E_x[tau_(a,b)] = (x - a)(b - x)/scale`` (solution of ``scale/2 u'' = -1``)."""
    return (x - a) * (b - x) / scale


def laplace_exit_centered(r: float, lam: float, scale: float = 1.0) -> float:
    """``E_x[exp(-lam tau_B(x,r))] = 1/cosh(r sqrt(2 lam/scale))``."""
    return 1.0 / math.cosh(r * math.sqrt(2.0 * lam / scale))


def dirichlet_kernel(t, x, y, a: float = -1.0, b: float = 1.0, scale: float = 1.0, images: int = 50):
    """Transition density of Brownian motion killed on leaving ``(a, b)``, by the image method."""
    L = b - a
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(t, x, y).shape)
    for m in range(-images, images + 1):
        out = out + gaussian_density(t, y - x + 2.0 * m * L, scale)
        out = out - gaussian_density(t, y + x - 2.0 * a + 2.0 * m * L, scale)
    inside = (x > a) & (x < b) & (y > a) & (y < b)
    return np.where(inside, out, 0.0)


def dirichlet_cell_mass(t: float, x: float, lo: float, hi: float, a: float = -1.0, b: float = 1.0,
                        scale: float = 1.0, images: int = 50) -> float:
    """``P_x[X_t in (lo, hi), t < tau_(a,b)]`` by integrating the image series in closed form."""
    s = math.sqrt(scale * t)
    L = b - a
    lo, hi = max(lo, a), min(hi, b)
    if hi <= lo:
        return 0.0
    total = 0.0
    for m in range(-images, images + 1):
        # direct images: y - x + 2mL ; reflected: y + x - 2a + 2mL
        total += ndtr((hi - x + 2 * m * L) / s) - ndtr((lo - x + 2 * m * L) / s)
        total -= ndtr((hi + x - 2 * a + 2 * m * L) / s) - ndtr((lo + x - 2 * a + 2 * m * L) / s)
    return float(total)


def one_step_exit_bound(r: float, dt: float, scale: float = 1.0) -> float:
    """``P[|N(0, scale dt)| >= r]`` (exit of a ball of radius ``r`` within one step, no bridge)."""
    return float(2.0 * ndtr(-r / math.sqrt(scale * dt)))
