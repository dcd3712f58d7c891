from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from dynkinlab import oracles
from dynkinlab.process import ProcessModel, read_paths, restart_path, sample_path, sample_paths, write_paths
from dynkinlab.space import ConfigError

LINE = ProcessModel("brownian_line")
KILLED = ProcessModel("brownian_killed", a=-1.0, b=1.0)


def test_line_endpoint_variance():
    b = sample_paths(LINE, 0.0, 1.0, 1e-2, 42, 0, 100_000)
    x1 = b.states[:, -1]
    se = math.sqrt(2.0 / (x1.size - 1))  # SE of the variance of a unit normal sample
    assert abs(x1.var(ddof=1) - 1.0) <= 3 * se


def test_killed_survival_matches_series():
    b = sample_paths(KILLED, 0.0, 1.0, 1e-3, 7, 0, 20_000, bridge=True)
    dead = b.kill_steps >= 0
    p = oracles.interval_exit_prob(0.0, 1.0)
    se = math.sqrt(p * (1 - p) / dead.size)
    assert abs(dead.mean() - p) <= 3 * se


def test_path_is_reproducible_and_addressable():
    a = sample_path(LINE, 0.0, 0.1, 1e-3, (9, 17))
    b = sample_paths(LINE, 0.0, 0.1, 1e-3, 9, 10, 10).path(7)
    np.testing.assert_array_equal(a.states, b.states)


def test_cemetery_absorbing():
    b = sample_paths(KILLED, 0.5, 2.0, 1e-3, 3, 0, 500, bridge=True)
    alive = np.isfinite(b.states)
    assert not np.any(~alive[:, :-1] & alive[:, 1:])
    assert np.all(np.isnan(b.states[b.kill_steps >= 0, -1]))


def test_gasket_one_step_uniform():
    g = ProcessModel("gasket_walk", level=1)
    top = g.space.vertex(0, 2)
    b = sample_paths(g, top, g.step_time, g.step_time, 11, 0, 6000)
    nb = g.space.neighbors[top, : g.space.degree[top]]
    counts = np.array([(b.states[:, 1] == v).sum() for v in nb])
    assert counts.sum() == 6000
    assert stats.chisquare(counts).pvalue > 1e-3


def test_restart_at_zero_is_identity_law():
    p = sample_path(LINE, 0.0, 0.5, 1e-3, (1, 0))
    q = restart_path(LINE, p, 0.0, 0.5, (1, 0))
    np.testing.assert_array_equal(p.states, q.states)


def test_restart_composes_in_law():
    n, dt = 3000, 1e-2
    full = sample_paths(LINE, 0.0, 1.0, dt, 5, 0, n).states[:, -1]
    first = sample_paths(LINE, 0.0, 0.5, dt, 6, 0, n)
    ends = np.array([restart_path(LINE, first.path(i), 0.5, 0.5, (77, i)).states[-1] for i in range(n)])
    assert stats.ks_2samp(full, ends).pvalue > 0.01


def test_killed_restart_survival():
    n = 4000
    first = sample_paths(KILLED, 0.0, 0.5, 1e-3, 12, 0, n, bridge=True)
    died, expect = 0, 0.0
    for i in range(n):
        p = first.path(i)
        if not p.alive()[-1]:
            continue
        q = restart_path(KILLED, p, 0.5, 0.5, (13, i))
        died += int(math.isfinite(q.zeta))
        expect += oracles.interval_exit_prob(float(p.states[-1]), 0.5)
    # sum of independent Bernoullis with oracle means
    assert abs(died - expect) <= 3 * math.sqrt(expect) + 1


def test_restart_from_cemetery_rejected():
    b = sample_paths(KILLED, 0.0, 2.0, 1e-3, 3, 0, 200, bridge=True)
    i = int(np.argmax(b.kill_steps >= 0))
    with pytest.raises(ConfigError):
        restart_path(KILLED, b.path(i), 2.0, 0.1, (1, 1))


def test_dump_roundtrip(tmp_path):
    b = sample_paths(KILLED, 0.0, 0.3, 1e-3, 3, 0, 20, bridge=True)
    f = tmp_path / "p.bin"
    write_paths(str(f), b)
    meta, st = read_paths(str(f))
    assert meta["model"] == "brownian_killed" and meta["n_paths"] == 20 and meta["n_steps"] == 300
    np.testing.assert_array_equal(st, b.states)


def test_bad_models_and_starts():
    with pytest.raises(ConfigError):
        ProcessModel("levy")
    with pytest.raises(ConfigError):
        ProcessModel("brownian_killed", a=1.0, b=0.0)
    with pytest.raises(ConfigError):
        sample_paths(KILLED, 2.0, 0.1, 1e-3, 1, 0, 1)
