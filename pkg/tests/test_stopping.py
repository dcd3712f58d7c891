from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynkinlab import oracles
from dynkinlab.process import Path, ProcessModel, sample_paths
from dynkinlab.space import ConfigError, OpenSetSpec
from dynkinlab.stopping import entrance_time, entrance_time_after, exit_time, exit_time_after, mdh_sequence

LINE = ProcessModel("brownian_line")
U = OpenSetSpec.interval(-1.0, 1.0)
B = OpenSetSpec.interval(-0.5, 0.5, closed=True)


def _path(states, dt=1.0):
    return Path(LINE, dt, np.asarray(states, dtype=float), math.inf, (0, 0))


def test_inside_forever_is_censored():
    assert exit_time(_path([0.0, 0.1, -0.2, 0.3]), U) == math.inf


def test_entrance_variants():
    p = _path([0.0, 0.9, 0.2, 0.8, 0.9])
    assert entrance_time(p, B) == 0.0
    assert entrance_time_after(p, B, 0.0) == entrance_time(p, B)
    assert entrance_time_after(p, B, math.inf) == math.inf
    assert entrance_time_after(p, B, 3.0) == math.inf  # B visited only before 3
    assert entrance_time_after(p, B, 1.0) == 2.0


def test_zigzag_hand_trace():
    #        0    1    2    3    4    5    6    7    8    9
    xs = [0.0, 0.7, 1.2, 0.8, 0.4, 0.9, -1.1, -0.6, -0.3, 0.1]
    seq = mdh_sequence(_path(xs), U, B)
    assert seq.taus == [2.0, 6.0, math.inf]  # stays in U after sigma_2
    assert seq.sigmas == [4.0, 8.0]
    assert seq.interleaved()
    assert exit_time_after(_path(xs), U, 4.0) == 6.0


def test_never_leaving():
    seq = mdh_sequence(_path([0.0, 0.2, 0.1]), U, B)
    assert seq.taus == [math.inf] and seq.sigmas == []


def test_b_must_sit_inside_u():
    with pytest.raises(ConfigError):
        mdh_sequence(_path([0.0]), U, OpenSetSpec.interval(-1.0, 0.5, closed=True))


def test_exit_equals_lifetime_for_killed():
    killed = ProcessModel("brownian_killed", a=-1.0, b=1.0)
    b = sample_paths(killed, 0.0, 1.0, 1e-3, 4, 0, 300, bridge=True)
    for i in range(300):
        p = b.path(i)
        if math.isfinite(p.zeta):
            assert exit_time(p, U) == pytest.approx(p.zeta)
        else:
            assert exit_time(p, U) == math.inf


def test_exit_prob_series():
    b = sample_paths(LINE, 0.0, 1.0, 1e-3, 8, 0, 10_000, bridge=True)
    hit = np.array([exit_time(b.path(i), U) <= 1.0 for i in range(10_000)])
    p = oracles.interval_exit_prob(0.0, 1.0)
    assert abs(hit.mean() - p) <= 3 * math.sqrt(p * (1 - p) / hit.size)


def test_sigma_counts_decrease():
    b = sample_paths(LINE, 0.0, 1.0, 1e-3, 9, 0, 2000, bridge=True)
    counts = np.zeros(10)
    for i in range(2000):
        s = mdh_sequence(b.path(i), U, B).sigmas
        for n, v in enumerate(s[:10]):
            counts[n] += v <= 1.0
    assert np.all(np.diff(counts) <= 0)


@given(st.integers(0, 2**32))
def test_pathwise_interleaving_and_monotone_exits(seed):
    b = sample_paths(LINE, 0.0, 0.5, 1e-3, seed, 0, 5, bridge=True)
    for i in range(5):
        p = b.path(i)
        assert mdh_sequence(p, U, B).interleaved()
        ex = [exit_time(p, OpenSetSpec.ball(0.0, r)) for r in (0.1, 0.2, 0.4, 0.8)]
        assert ex == sorted(ex)
