from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from dynkinlab import rng

seeds = st.integers(min_value=0, max_value=2**63 - 1)


@given(seeds, st.integers(0, 10**6))
def test_path_keys_are_addressable(seed, start):
    keys = rng.path_keys(seed, start, 4)
    assert keys[2] == rng.path_keys(seed, start + 2, 1)[0]
    assert int(keys[0]) == rng.path_key(seed, start)


@given(seeds)
def test_uniforms_in_open_unit_interval(seed):
    keys = rng.path_keys(seed, 0, 256)
    u = rng.bridge_uniforms(keys, np.full(256, 3))
    assert np.all((u > 0) & (u < 1))


def test_distinct_seeds_give_distinct_streams():
    a = rng.step_normals(rng.path_keys(1, 0, 1000), 1)
    b = rng.step_normals(rng.path_keys(2, 0, 1000), 1)
    assert not np.array_equal(a, b)


def test_normals_pass_ks():
    keys = rng.path_keys(2026, 0, 20000)
    z = np.concatenate([rng.step_normals(keys, k) for k in (1, 2, 3)])
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1.0) < 0.02


def test_scalar_and_vector_normals_agree():
    keys = rng.path_keys(99, 5, 3)
    v = rng.step_normals(keys, 7)
    for i, key in enumerate(keys):
        assert rng.step_normals(np.array([key], dtype=np.uint64), 7)[0] == v[i]


def test_walk_uniforms_deterministic():
    keys = rng.path_keys(5, 0, 10)
    np.testing.assert_array_equal(rng.walk_uniforms(keys, 4), rng.walk_uniforms(keys, 4))
