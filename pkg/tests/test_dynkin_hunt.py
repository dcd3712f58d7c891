from __future__ import annotations

import numpy as np
import pytest

from dynkinlab import dynkin_hunt
from dynkinlab.process import ProcessModel
from dynkinlab.space import ConfigError, OpenSetSpec

LINE = ProcessModel("brownian_line")
U = OpenSetSpec.interval(-1.0, 1.0)
B = OpenSetSpec.interval(-0.5, 0.5, closed=True)
SEED = 2718


@pytest.mark.parametrize("x", [0.0, 2.0])
def test_multiple_identity(x):
    # unit-level band of 4 SE; the 3 SE acceptance test lives in test_acceptance.py
    for led in dynkin_hunt.verify_multiple_dh(LINE, U, B, B, (0.1, 0.5, 1.0), x, 20_000, SEED, 1e-3):
        assert -4 * led.combined_se <= led.diff.value <= led.remainder + 4 * led.combined_se
        assert abs(led.lhs.value - led.oracle) <= 4 * max(led.lhs.se, 1e-3)
        if x == 2.0:
            assert led.part.value == 0.0


def test_combined_se_is_calibrated():
    z = []
    for s in range(40):
        led = dynkin_hunt.verify_multiple_dh(LINE, U, B, B, (0.5,), 0.0, 3000, 9000 + s, 1e-3)[0]
        z.append(led.diff.value / led.combined_se)
    z = np.asarray(z)
    assert abs(z.mean()) <= 3 / np.sqrt(z.size)
    assert 0.7 <= z.std() <= 1.35


def test_huge_u_no_terms():
    big = OpenSetSpec.interval(-50.0, 50.0)
    led = dynkin_hunt.verify_multiple_dh(LINE, big, B, B, (0.1,), 0.0, 5000, SEED, 1e-3)[0]
    assert led.n_used == 0 and led.lhs.value == led.part.value


def test_p_sigma_decreasing():
    led = dynkin_hunt.verify_multiple_dh(LINE, U, B, B, (1.0,), 0.0, 5000, SEED, 1e-3)[0]
    assert np.all(np.diff(led.p_sigma) <= 0)


def test_single_identity():
    A = OpenSetSpec.interval(-0.5, 0.5)
    for led in dynkin_hunt.verify_single_dh(LINE, U, A, (0.5,), 0.0, 20_000, SEED, 1e-3):
        assert led.passed and led.oracle_ok


def test_single_whole_space():
    A = OpenSetSpec.interval(-0.5, 0.5)
    led = dynkin_hunt.verify_single_dh(LINE, OpenSetSpec.whole(), A, (0.5,), 0.0, 3000, SEED, 1e-3)[0]
    assert led.lhs.value == led.part.value and led.diff.value == 0.0


def test_single_outside_start():
    A = OpenSetSpec.interval(-0.5, 0.5)
    led = dynkin_hunt.verify_single_dh(LINE, U, A, (0.5,), 2.0, 5000, SEED, 1e-3)[0]
    assert led.part.value == 0.0 and led.passed


def test_preconditions():
    with pytest.raises(ConfigError):
        dynkin_hunt.verify_multiple_dh(LINE, U, OpenSetSpec.interval(-1.0, 0.5, closed=True), B, (0.1,), 0.0, 10,
                                       SEED, 1e-3)
    with pytest.raises(ConfigError):
        dynkin_hunt.verify_multiple_dh(LINE, U, B, OpenSetSpec.interval(-0.8, 0.0), (0.1,), 0.0, 10, SEED, 1e-3)
    with pytest.raises(ConfigError):
        dynkin_hunt.verify_multiple_dh(ProcessModel("gasket_walk", level=2), U, B, B, (0.1,), 0, 10, SEED, 1e-3)
