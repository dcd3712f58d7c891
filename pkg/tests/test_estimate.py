from __future__ import annotations

import math

import numpy as np
import pytest

from dynkinlab import estimate, oracles
from dynkinlab.process import ProcessModel
from dynkinlab.space import ConfigError, OpenSetSpec

LINE = ProcessModel("brownian_line")
KILLED = ProcessModel("brownian_killed", a=-1.0, b=1.0)
WHOLE = OpenSetSpec.whole()
SEED = 314


def _z(e, ref):
    return abs(e.value - ref) / e.se


def test_transition_prob_examples():
    half = estimate.transition_prob(LINE, 0.0, 1.0, OpenSetSpec.interval(-math.inf, 0.0), 20_000, SEED, 1e-2)
    assert _z(half, 0.5) <= 3
    e = estimate.transition_prob(LINE, 0.0, 1.0, OpenSetSpec.interval(-1.0, 1.0), 20_000, SEED, 1e-2)
    assert _z(e, oracles.gaussian_interval_prob(0.0, 1.0, -1.0, 1.0)) <= 3
    assert estimate.transition_prob(LINE, 0.0, 1.0, WHOLE, 1000, SEED, 1e-2).value == 1.0


def test_part_transition_examples():
    A = OpenSetSpec.interval(-0.1, 0.1)
    full = estimate.transition_prob(LINE, 0.0, 0.5, A, 5000, SEED, 1e-3)
    part = estimate.part_transition_prob(LINE, 0.0, 0.5, WHOLE, A, 5000, SEED, 1e-3)
    assert part.value == full.value
    U = OpenSetSpec.interval(-1.0, 1.0)
    e = estimate.part_transition_prob(LINE, 0.0, 0.1, U, A, 40_000, SEED, 1e-4, bridge=True)
    ref = oracles.dirichlet_cell_mass(0.1, 0.0, -0.1, 0.1)
    assert _z(e, ref) <= 3
    assert estimate.part_transition_prob(LINE, 2.0, 0.1, U, A, 500, SEED, 1e-3).value == 0.0


def test_part_le_full_pathwise():
    U = OpenSetSpec.interval(-0.5, 0.5)
    A = OpenSetSpec.interval(-0.3, 0.8)
    pe, fe, part, full = estimate.part_and_full(KILLED, 0.0, 0.3, U, A, 5000, SEED, 1e-3, bridge=True)
    assert not np.any(part & ~full)
    assert pe.value <= fe.value


def test_exit_prob_examples():
    e = estimate.exit_prob(LINE, 0.0, 1.0, 1.0, 20_000, SEED, 1e-3, bridge=True)
    assert _z(e, oracles.interval_exit_prob(0.0, 1.0)) <= 3
    assert estimate.exit_prob(LINE, 0.0, 1.0, 1e-4, 100_000, SEED, 1e-4, bridge=True).value <= 1e-3
    assert estimate.exit_prob(LINE, 0.0, 100.0, 1.0, 10_000, SEED, 1e-2, bridge=True).value == 0.0


def test_exit_prob_grid_matches_single_runs():
    grid = estimate.exit_prob_grid(LINE, 0.0, [0.5], [0.1, 0.3], 3000, SEED, 1e-3, bridge=True)
    one = estimate.exit_prob(LINE, 0.0, 0.5, 0.3, 3000, SEED, 1e-3, bridge=True)
    assert grid[(0.5, 0.3)].value == one.value
    assert grid[(0.5, 0.1)].value <= grid[(0.5, 0.3)].value


def test_mean_exit_examples():
    m = estimate.mean_exit_time(LINE, 0.0, 1.0, None, 20_000, SEED, 1e-3, bridge=True)
    assert abs(m.value - 1.0) <= 0.02 and not m.notes["flagged"]
    c = estimate.mean_exit_time(LINE, 0.0, 1.0, 1.0, 20_000, SEED, 1e-3, bridge=True)
    assert abs(c.value - oracles.capped_mean_exit(0.0, 1.0)) <= 0.02 * 0.7
    assert estimate.mean_exit_time(LINE, 0.0, 1.0, 0.0, 10, SEED, 1e-3).value == 0.0


def test_mean_exit_flags_censoring():
    m = estimate.mean_exit_time(LINE, 0.0, 1.0, None, 2000, SEED, 1e-2, horizon=0.5)
    assert m.notes["flagged"] and m.notes["censored_fraction"] > 0.5


def test_laplace_exit():
    e = estimate.laplace_exit(LINE, 0.0, 1.0, 1.0, 20_000, SEED, 1e-3, bridge=True)
    assert abs(e.value - 1.0 / math.cosh(math.sqrt(2.0))) <= 3 * e.se + 2e-3
    with pytest.raises(ConfigError):
        estimate.laplace_exit(LINE, 0.0, 1.0, 0.0, 10, SEED, 1e-3)


def test_density_symmetric_split():
    ke = estimate.density_extract(KILLED, 0.0, 0.2, WHOLE, (-1.0, 1.0), 1, 20_000, SEED, 1e-3, bridge=True)
    d = ke.density(1)
    se = ke.se(1)
    assert abs(d[0] - d[1]) <= 3 * math.hypot(se[0], se[1])


def test_density_integrates_to_part_prob():
    U = OpenSetSpec.interval(-0.6, 0.6)
    W = (-0.5, 0.5)
    ke = estimate.density_extract(LINE, 0.0, 0.1, U, W, 7, 8000, SEED, 1e-3, bridge=True)
    part = estimate.part_transition_prob(LINE, 0.0, 0.1, U, OpenSetSpec.interval(*W), 8000, SEED, 1e-3, True)
    widths = ke.hierarchy.widths(7)
    assert math.fsum(ke.density(7) * widths) == pytest.approx(part.value, abs=1e-12)
    assert ke.telescoping_exact()


def test_density_window_checks():
    with pytest.raises(ConfigError):
        estimate.density_extract(LINE, 0.0, 0.1, OpenSetSpec.interval(-0.5, 0.5), (-1.0, 1.0), 3, 10, SEED, 1e-3)
