"""Chunked, thread-parallel driver for the path kernels.

Paths are split into fixed-size chunks of consecutive indices. Chunk
boundaries depend only on the path count and the chunk size, and results are
combined in chunk order. The thread count therefore never changes a result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

from . import backend

T = TypeVar("T")

CHUNK = 2048
MAX_TARGETS = 64


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def run_chunked(n: int, fn: Callable[[int, int], T], threads: int = 1, chunk: int = CHUNK) -> list[T]:
    """Call ``fn(start, count)`` for every chunk of ``range(n)``; results in chunk order."""
    starts = list(range(0, n, chunk))
    counts = [min(chunk, n - s) for s in starts]
    if threads <= 1 or len(starts) <= 1:
        return [fn(s, c) for s, c in zip(starts, counts)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, starts, counts))


def fsum_chunks(parts: list[np.ndarray]) -> np.ndarray:
    """Exactly rounded elementwise sum of per-chunk partial sums (order independent)."""
    stack = np.stack([np.asarray(p, dtype=float) for p in parts])
    flat = stack.reshape(stack.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(stack.shape[1:])


def steps_for(t: float, dt: float) -> int:
    """Grid index of time ``t``; raises if ``t`` is not a multiple of ``dt``."""
    k = t / dt
    n = int(round(k))
    if abs(k - n) > 1e-9 * max(1.0, k) or n < 0:
        raise ValueError(f"time {t} is not on the grid of step {dt}")
    return n


# ---------------------------------------------------------------- kernels


def line_params(model, dt: float) -> dict:
    """Kernel arguments describing a Brownian model at step ``dt``."""
    s_dt = model.scale * dt
    killing = model.kind == "brownian_killed"
    return {
        "sd": math.sqrt(s_dt),
        "s_dt": s_dt,
        "killing": killing,
        "klo": model.a if killing else -math.inf,
        "khi": model.b if killing else math.inf,
    }


def simulate(model, x0: float, dt: float, n_steps: int, seed: int, start: int, count: int,
             bridge: bool = False, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """States ``(count, n_steps + 1)`` of lifted Brownian paths and their kill steps."""
    p = line_params(model, dt)
    k = backend.kernels()

    def work(s, c):
        out = np.empty((c, n_steps + 1))
        kill = np.empty(c, dtype=np.int64)
        k.simulate_batch(float(x0), p["sd"], n_steps, seed, start + s, p["klo"], p["khi"],
                         p["killing"], bridge, p["s_dt"], out, kill)
        return out, kill

    parts = run_chunked(count, work, threads)
    return np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])


def exit_samples(model, x0: float, dt: float, n_steps: int, seed: int, count: int,
                 lo: float, hi: float, sample_steps, full: bool, bridge: bool = False,
                 threads: int = 1, start: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exit step from ``(lo, hi)``, kill step and states at ``sample_steps`` per path.

    Steps are ``-1`` when the event did not happen within ``n_steps``.
    """
    p = line_params(model, dt)
    k = backend.kernels()
    idx = np.ascontiguousarray(np.sort(np.asarray(sample_steps, dtype=np.int64)))
    if idx.size and (idx[0] < 0 or idx[-1] > n_steps):
        raise ValueError("sample steps outside the horizon")

    def work(s, c):
        samp = np.empty((c, idx.size))
        ex = np.empty(c, dtype=np.int64)
        kl = np.empty(c, dtype=np.int64)
        k.exit_batch(float(x0), p["sd"], n_steps, seed, start + s, float(lo), float(hi),
                     p["klo"], p["khi"], p["killing"], bridge, p["s_dt"], idx, full, samp, ex, kl)
        return samp, ex, kl

    parts = run_chunked(count, work, threads)
    return (np.concatenate([a for a, _, _ in parts]), np.concatenate([b for _, b, _ in parts]),
            np.concatenate([c for _, _, c in parts]))


def walk(neighbors: np.ndarray, degree: np.ndarray, v0: int, n_steps: int, seed: int,
         start: int, count: int, threads: int = 1) -> np.ndarray:
    """Vertex indices ``(count, n_steps + 1)`` of simple random walks."""
    k = backend.kernels()
    nb = np.ascontiguousarray(neighbors, dtype=np.int64)
    dg = np.ascontiguousarray(degree, dtype=np.int64)

    def work(s, c):
        out = np.empty((c, n_steps + 1), dtype=np.int64)
        k.walk_batch(int(v0), n_steps, seed, start + s, nb, dg, out)
        return out

    return np.concatenate(run_chunked(count, work, threads))
