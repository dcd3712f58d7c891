"""Acceptance suite at full size.

Run with ``pytest -v -s tests/test_acceptance.py`` to see one
``criterion NN [PASS|FAIL]`` line per criterion.
"""

from __future__ import annotations

import pytest

from dynkinlab import acceptance
from dynkinlab.acceptance import TOL

PINNED = {
    "phi_rel_error": 1e-6, "phi_runtime_s": 5.0, "sandwich_runtime_s": 5.0, "z": 3.0,
    "mean_rel_error": 0.02, "claim_margin_se": 50.0, "density_rel_error": 0.05,
}


def test_tolerances_pinned():
    assert TOL == PINNED
    assert acceptance.ACCEPTANCE_SEED == 20261018


def test_oracles_pinned():
    assert acceptance.ORACLE_EXIT_PROB == {0.25: 0.0910005238, 0.5: 0.3145542331, 1.0: 0.6292225702}
    assert acceptance.ORACLE_CAPPED_MEAN == 0.6994545296
    assert acceptance.ORACLE_MEAN == 1.0
    assert acceptance.ORACLE_CELL_DENSITY == 1.261558235




@pytest.mark.parametrize("k", sorted(acceptance.CRITERIA))
def test_criterion(k):
    fn = acceptance.CRITERIA[k]
    res = fn(False) if k in (1, 2) else fn(False, acceptance.ACCEPTANCE_SEED, 1)
    print()
    print(res.line())
    assert res.passed, res.details
