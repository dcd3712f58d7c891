"""Compiled and numpy kernels agree bit for bit; thread count never changes results."""

from __future__ import annotations

import numpy as np
import pytest

from dynkinlab import backend, dynkin_hunt, engine
from dynkinlab.process import ProcessModel
from dynkinlab.space import Gasket, OpenSetSpec

pytestmark = pytest.mark.skipif("cython" not in backend.available(), reason="compiled kernels not built")

KILLED = ProcessModel("brownian_killed", a=-1.0, b=1.0)
LINE = ProcessModel("brownian_line")
SEED = 77


def _both(fn):
    out = {}
    for which in ("cython", "python"):
        backend.set_backend(which)
        try:
            out[which] = fn()
        finally:
            backend.set_backend("cython")
    return out["cython"], out["python"]


def _eq(a, b):
    if isinstance(a, (tuple, list)):
        return all(_eq(u, v) for u, v in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


@pytest.mark.parametrize("bridge", [False, True])
def test_simulate(bridge):
    c, p = _both(lambda: engine.simulate(KILLED, 0.2, 1e-3, 300, SEED, 5, 3000, bridge, 1))
    assert _eq(c, p)


def test_exit_samples():
    c, p = _both(lambda: engine.exit_samples(KILLED, 0.0, 1e-3, 400, SEED, 3000, -0.5, 0.5, [0, 200, 400],
                                             True, True, 1))
    assert _eq(c, p)


def test_mdh():
    U = OpenSetSpec.interval(-1.0, 1.0)
    B = OpenSetSpec.interval(-0.5, 0.5, closed=True)

    def run():
        leds = dynkin_hunt.verify_multiple_dh(LINE, U, B, B, (0.2, 0.5), 0.0, 1500, SEED, 1e-3, m_inner=4)
        return [(le.lhs.value, le.part.value, le.rhs, le.diff.se) for le in leds]

    c, p = _both(run)
    assert c == p


def test_walk():
    g = Gasket(3)
    c, p = _both(lambda: engine.walk(g.neighbors, g.degree, 0, 200, SEED, 0, 3000, 1))
    assert _eq(c, p)


@pytest.mark.parametrize("threads", [2, 8])
def test_thread_count_invariance(threads):
    a = engine.exit_samples(KILLED, 0.0, 1e-3, 300, SEED, 9000, -0.5, 0.5, [300], True, True, 1)
    b = engine.exit_samples(KILLED, 0.0, 1e-3, 300, SEED, 9000, -0.5, 0.5, [300], True, True, threads)
    assert _eq(a, b)


def test_forced_python_backend(python_backend):
    assert backend.name() == "python"
