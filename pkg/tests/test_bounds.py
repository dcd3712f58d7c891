from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynkinlab import bounds
from dynkinlab.process import ProcessModel
from dynkinlab.scale import ScaleFunction, phi_eval
from dynkinlab.space import ConfigError, Line, OpenSetSpec

SF2 = ScaleFunction.power(2.0)
BASE = {"c_psi": 1.0, "beta1": 2.0, "beta2": 2.0, "c_F": 1.0, "alpha_F": 1.0, "c": 2.0, "gamma": 1.0}
KILLED = ProcessModel("brownian_killed", a=-1.0, b=1.0)
F_GAUSS = bounds.BoundFunction.power(1.01 / math.sqrt(2 * math.pi), 0.5)


# ---------------------------------------------------------------- F and H


def test_power_db_exact():
    F = bounds.BoundFunction.power(2.0, 0.7)
    rep = bounds.db_psi_verify(F, SF2, np.logspace(-2, 1, 9), np.linspace(-1, 1, 5), Line())
    assert rep.passed and rep.worst_ratio == pytest.approx(1.0, abs=1e-12)


def test_db_negative_control():
    F = bounds.BoundFunction("power", 1.0, 0.4, c3=1.0, alpha1=0.5)  # declared alpha_F too small
    assert not bounds.db_psi_verify(F, SF2, np.logspace(-2, 1, 9), [0.0, 0.5], Line()).passed


def test_volume_db_line():
    space = Line(-1.0, 1.0)
    F = bounds.BoundFunction.volume(1.0, space, SF2, c_vd=4.0, R=1.0)
    assert (F.c_F, F.alpha_F) == (16.0, 1.0)
    rep = bounds.db_psi_verify(F, SF2, np.logspace(-3, 0, 7), np.linspace(-0.99, 0.99, 7), space)
    assert rep.passed


def test_h_bound_examples():
    F = bounds.BoundFunction.power(1.0, 0.5)
    assert bounds.h_bound_eval(F, SF2, 1.0, 1.0, 1.0, 0.3, 0.3, Line()) == pytest.approx(F(1.0))
    assert bounds.h_bound_eval(F, SF2, 1.0, 1.0, 1.0, 0.0, 2.0, Line()) == pytest.approx(F(1.0) / math.e)
    assert bounds.h_bound_eval(F, SF2, 0.0, 1.0, 1.0, 0.0, 2.0, Line()) == F(1.0)


@given(st.floats(0.1, 5), st.floats(0.01, 10), st.floats(0.2, 3), st.floats(0.5, 3))
def test_poly_exp_sup_dominates_grid(alpha, A, kappa, q2):
    q1 = q2 + 0.5
    val = bounds._poly_exp_sup(alpha, A, kappa, q1, q2)
    u = np.exp(np.linspace(0, 60, 400001))
    v = kappa * u
    f = np.exp(alpha * np.log(u) - A * np.where(v < 1, v**q1, v**q2))
    assert val >= f.max() * (1 - 1e-9)
    assert val <= f.max() * (1 + 1e-6)


# ---------------------------------------------------------------- ledger


def test_displayed_examples():
    led = bounds.derive_constants({**BASE, "eps": 0.5}, "chain")
    assert led["gamma_eps"] == pytest.approx(0.1)
    led = bounds.derive_constants({**BASE, "delta": 1.0}, "chain")
    assert led["gamma_p_delta"] == pytest.approx(0.025)
    led = bounds.derive_constants({**BASE, "eps": 0.5}, {"c_eps_1": 1.0})
    assert led["c_eps_2"] == pytest.approx(2**5 * math.exp(-3))


def test_ledger_arithmetic_exact():
    ov = {"c_eps_0": 1.5, "c_eps_1": 0.2, "c_eps_3": 3.0, "c_eps_4": 0.05}
    led = bounds.derive_constants({**BASE, "c_F": 1.3, "alpha_F": 0.75, "eps": 0.25}, ov)
    # cp_eps is chain-only; displayed mode leaves it missing unless overridden
    assert led.values["cp_eps"] is None and not led.complete
    ov["cp_eps"] = 7.0
    led = bounds.derive_constants({**BASE, "c_F": 1.3, "alpha_F": 0.75, "eps": 0.25}, ov)
    c, cF, aF = 2.0, 1.3, 0.75
    e2 = aF * 1.0
    c2 = 2 ** (5 * e2) * (e2 / (math.e * 0.2)) ** (3 * e2)
    assert led["c_eps_2"] == pytest.approx(c2, rel=1e-14)
    assert led["cp_eps_displayed"] == pytest.approx(c * c * cF * c2 / (2 ** (aF / 2) - 1), rel=1e-14)
    c5 = (3.0 / (math.e * 0.05)) ** 3
    assert led["c_eps_5"] == pytest.approx(c5, rel=1e-14)
    cpp = c * 7.0 * cF * 3.0 * (2 * c5 + 1)
    assert led["cpp_eps"] == pytest.approx(cpp, rel=1e-14)
    assert led["c_eps"] == pytest.approx(max((7.0 + cpp) * cF * 2**aF, cpp * cF**2 * 2 ** (2 * aF)), rel=1e-14)
    assert led.complete and led.provenance["cp_eps"] == "override"


def test_displayed_mode_incomplete_and_flags():
    led = bounds.derive_constants({**BASE, "eps": 0.25}, "displayed")
    assert not led.complete
    with pytest.raises(ConfigError):
        bounds.theorem52_rhs(led, F_GAUSS, SF2, 1.0, OpenSetSpec.interval(-0.5, 0.5), Line(), 0.1, 0.0, 0.0)
    with pytest.raises(ConfigError):
        bounds.derive_constants({**BASE, "eps": 0.25}, "chain", {"bogus": 1.0})
    with pytest.raises(ConfigError):
        bounds.derive_constants({**BASE, "eps": 1.5})


def test_chain_ledger_complete_and_global():
    led = bounds.derive_constants({**BASE, "eps": 0.25, "delta": 0.5}, "chain")
    assert led.complete and led.global_complete
    assert led["c_global"] >= led["c_eps@1/4"]


# ---------------------------------------------------------------- chain


def test_chain_examples():
    assert bounds.exit_chain_constants("2->3", {"eps": 0.5, "delta": 1.0})["eps"] == 0.5
    out = bounds.exit_chain_constants("4->5", {"eps": math.exp(-1), "delta": 1.0, "c_psi": 1.0, "beta1": 2.0})
    assert out["eta"] == 1.0 and out["gamma"] == pytest.approx(1.0) and out["c"] == pytest.approx(math.e)
    out = bounds.exit_chain_constants("7->2", {"c": 2.0, "eps": 0.25, "gamma": 1.0, "beta2": 2.0})
    assert out["delta"] == pytest.approx(1.0 / math.log(8.0))
    with pytest.raises(ConfigError):
        bounds.exit_chain_constants("7->2", {"c": 2.0, "eps": 0.75, "gamma": 1.0, "beta2": 2.0})
    with pytest.raises(ConfigError):
        bounds.exit_chain_constants("1'->2", {"eps": 0.1, "delta": 1.0, "c_psi": 1.0, "beta2": 2.0})
    with pytest.raises(ConfigError):
        bounds.exit_chain_constants("9->1", {})


def test_compose_chain_threads_outputs():
    steps = bounds.compose_chain(["3->4", "4->5", "5->6"], {"eps": 0.6, "c_psi": 1.0, "beta1": 2.0, "beta2": 2.0})
    assert [s["step"] for s in steps] == ["3->4", "4->5", "5->6"]
    assert steps[-1]["c"] == steps[1]["c"]


def test_mean_exit_criterion_examples():
    assert bounds.mean_exit_criterion(1.0, 1.0, 2.0, SF2, 1.0) == (0.5, 0.875)
    assert bounds.mean_exit_criterion(2.0, 1.0, 2.0, SF2, 1.0) == (0.25, 0.96875)
    with pytest.raises(ConfigError):
        bounds.mean_exit_criterion(0.5, 1.0, 2.0, SF2, 1.0)
    with pytest.raises(ConfigError):
        bounds.mean_exit_criterion(1.0, 1.0, 2.0, SF2, 1.0, witness=(2.0, 0.01))


# ---------------------------------------------------------------- bound profile


@pytest.fixture(scope="module")
def ledger():
    return bounds.derive_constants({"c_psi": 1.0, "beta1": 2.0, "beta2": 2.0, "c_F": 1.0, "alpha_F": 0.5,
                                    "c": 1.35, "gamma": 0.3, "eps": 0.25}, "chain")


U_HALF = OpenSetSpec.interval(-0.5, 0.5)


def test_tail_case_constant(ledger):
    vals = {bounds.theorem52_rhs(ledger, F_GAUSS, SF2, 1.0, U_HALF, Line(), t, x, y)
            for t in (1.0, 3.0) for x, y in ((0.0, 0.0), (0.9, 0.1), (-0.3, 0.2))}
    assert len(vals) == 1
    assert vals.pop() == pytest.approx(ledger["c_eps"] * F_GAUSS(1.0))


def test_on_diagonal_case(ledger):
    assert bounds.theorem52_rhs(ledger, F_GAUSS, SF2, 1.0, U_HALF, Line(), 0.1, 0.1, 0.1) == pytest.approx(
        ledger["c_eps"] * F_GAUSS(0.1))


def test_monotone_decay_in_distance(ledger):
    ys = np.linspace(-0.24, 0.24, 25)
    vals = [bounds.theorem52_rhs(ledger, F_GAUSS, SF2, 1.0, U_HALF, Line(), 0.01, -0.24, y) for y in ys]
    assert np.all(np.diff(vals) <= 0)


def test_outside_case_matches_formula(ledger):
    got = bounds.theorem52_rhs(ledger, F_GAUSS, SF2, 1.0, U_HALF, Line(), 0.2, 0.8, 0.0)
    ref = ledger["c_eps"] * F_GAUSS(0.4) * math.exp(-phi_eval(SF2, ledger["gamma_eps"] * 1.0, 0.2))
    assert got == pytest.approx(ref)


def test_y_must_be_interior(ledger):
    with pytest.raises(ConfigError):
        bounds.theorem52_rhs(ledger, F_GAUSS, SF2, 1.0, U_HALF, Line(), 0.1, 0.0, 0.3)


def test_global_bound():
    led = bounds.derive_constants({"c_psi": 1.0, "beta1": 2.0, "beta2": 2.0, "c_F": 1.0, "alpha_F": 0.5,
                                   "c": 1.35, "gamma": 0.3, "delta": 0.5}, "chain")
    v0 = bounds.theorem54_rhs(led, F_GAUSS, SF2, math.inf, Line(), 0.1, 0.0, 0.0)
    assert v0 == pytest.approx(led["c_global"] * 0.5 ** (-1.0) * F_GAUSS(0.1))
    assert bounds.theorem54_rhs(led, F_GAUSS, SF2, math.inf, Line(), 0.1, 0.0, 3.0) < v0


# ---------------------------------------------------------------- empirical checks


def test_du_condition_and_negative_control():
    args = (KILLED, U_HALF, 1.0, SF2, [(0.05, 0.0)], 5, 8000, 21, 1e-3)
    assert bounds.verify_du_condition(F_GAUSS, *args).passed
    weak = bounds.BoundFunction.power(F_GAUSS.c3 * 1e-3, 0.5)
    assert not bounds.verify_du_condition(weak, *args).passed
    with pytest.raises(ConfigError):
        bounds.verify_du_condition(F_GAUSS, KILLED, U_HALF, 1.0, SF2, [(1.0, 0.0)], 5, 10, 21, 1e-3)


def test_p_condition_examples():
    line = ProcessModel("brownian_line")
    samples = [(0.0, r) for r in (0.25, 0.5, 1.0)]
    times = (0.05, 0.1, 0.25, 0.5, 1.0)
    args = (line, OpenSetSpec.whole(), math.inf, SF2)
    assert bounds.verify_p_condition(*args, 2.0, 0.5, samples, times, 5000, 5, 1e-3).passed
    assert not bounds.verify_p_condition(*args, 2.0, 100.0, samples, times, 5000, 5, 1e-3).passed
    # t much larger than Psi(r): bound near c >= 1
    assert bounds.exit_bound(SF2, 2.0, 0.5, 0.25, 1e4) > 1.99
