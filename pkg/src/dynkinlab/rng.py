"""Counter-based random words keyed by (seed, stream ids, counter).

Every random number used by the simulators is a pure function of its key and
counter, so a path's randomness does not depend on batch order or thread
count. The mixer is the SplitMix64 finalizer; a word is produced by
``derive(key, counter)``.

Layout shared by both kernel backends (step ``k`` is 1-based):

* The normal increment of step ``k`` comes from a 128-layer ziggurat fed by
  the word at counter ``2(k - 1)``: the top 53 bits give the abscissa, the
  low 7 bits the layer. Rejections (about 1.2% of draws) take further words
  from counters ``RETRY_BASE + ((k - 1) << 8) + j``, ``j = 0, 1, ...``.
* The bridge-crossing uniform for step ``k`` uses counter ``2(k - 1) + 1``.
* Gasket walk step ``k`` uses counter ``k - 1``.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
ROOT_KEY = 0x243F6A8885A308D3

# stream tags
TAG_PATH = 1
TAG_INNER = 2
TAG_AUX = 3

_INV53 = 1.0 / 9007199254740992.0
RETRY_BASE = 1 << 63

# ziggurat tables (Doornik's 128-block layout)
ZIG_R = 3.442619855899
ZIG_V = 9.91256303526217e-3


def _zig_tables() -> tuple[np.ndarray, np.ndarray]:
    x = [0.0] * 129
    f = math.exp(-0.5 * ZIG_R * ZIG_R)
    x[0] = ZIG_V / f
    x[1] = ZIG_R
    x[128] = 0.0
    for i in range(2, 128):
        x[i] = math.sqrt(-2.0 * math.log(ZIG_V / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = [x[i + 1] / x[i] for i in range(128)]
    return np.array(x), np.array(ratio)


ZIG_X, ZIG_RATIO = _zig_tables()


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive(key: int, x: int) -> int:
    return mix64(key ^ mix64(((x + 1) * GAMMA) & MASK64))


def stream_key(seed: int, *ids: int) -> int:
    """Key of the substream addressed by ``seed`` and a tuple of integer ids."""
    k = derive(ROOT_KEY, seed & MASK64)
    for i in ids:
        k = derive(k, i & MASK64)
    return k


def path_key(seed: int, index: int) -> int:
    return stream_key(seed, TAG_PATH, index)


def inner_key(seed: int, index: int, n: int, j: int) -> int:
    return stream_key(seed, TAG_INNER, index, n, j)


def to_uniform(w: int) -> float:
    return ((w >> 11) + 0.5) * _INV53


# ---------------------------------------------------------------- vectorized


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def derive_np(key, x) -> np.ndarray:
    """Vectorized :func:`derive`; ``key`` and ``x`` broadcast as uint64."""
    with np.errstate(over="ignore"):
        xs = (np.asarray(x, dtype=np.uint64) + np.uint64(1)) * np.uint64(GAMMA)
        return mix64_np(np.asarray(key, dtype=np.uint64) ^ mix64_np(xs))


def uniform_np(w: np.ndarray) -> np.ndarray:
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


def path_keys(seed: int, start: int, count: int) -> np.ndarray:
    return np.array([path_key(seed, start + i) for i in range(count)], dtype=np.uint64)


def bridge_uniforms(keys: np.ndarray, ks) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.int64)
    c = (np.uint64(2) * (ks - 1).astype(np.uint64)) + np.uint64(1)
    return uniform_np(derive_np(keys, c))


def walk_uniforms(keys: np.ndarray, k: int) -> np.ndarray:
    return uniform_np(derive_np(keys, k - 1))


# ------------------------------------------------------------------ normals


def _retry_counter(k: int, j: int) -> int:
    return RETRY_BASE + ((k - 1) << 8) + (j & 0xFF)


def normal_from_word(key: int, k: int, w: int) -> float:
    """Ziggurat normal for step ``k`` whose first word is ``w``.

    Scalar reference used for rejected draws; uses libm through ``math`` so
    it reproduces the compiled kernel bit for bit.
    """
    xs, rs = ZIG_X, ZIG_RATIO
    j = 0
    while True:
        u = 2.0 * to_uniform(w) - 1.0
        i = w & 0x7F
        if abs(u) < rs[i]:
            return u * xs[i]
        if i == 0:
            # tail beyond ZIG_R
            while True:
                a = math.log(to_uniform(derive(key, _retry_counter(k, j)))) / ZIG_R
                b = math.log(to_uniform(derive(key, _retry_counter(k, j + 1))))
                j += 2
                if -2.0 * b >= a * a:
                    break
            return a - ZIG_R if u < 0.0 else ZIG_R - a
        x = u * xs[i]
        f0 = math.exp(-0.5 * (xs[i] * xs[i] - x * x))
        f1 = math.exp(-0.5 * (xs[i + 1] * xs[i + 1] - x * x))
        v = to_uniform(derive(key, _retry_counter(k, j)))
        j += 1
        if f1 + v * (f0 - f1) < 1.0:
            return x
        w = derive(key, _retry_counter(k, j))
        j += 1


def step_normals(keys: np.ndarray, k: int) -> np.ndarray:
    """Standard normals for 1-based step ``k`` of each stream in ``keys``."""
    w = derive_np(keys, 2 * (k - 1))
    i = (w & np.uint64(0x7F)).astype(np.intp)
    u = 2.0 * uniform_np(w) - 1.0
    out = u * ZIG_X[i]
    slow = np.nonzero(~(np.abs(u) < ZIG_RATIO[i]))[0]
    for s in slow:
        out[s] = normal_from_word(int(keys[s]), k, int(w[s]))
    return out
