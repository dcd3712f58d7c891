"""Time the compiled and numpy path kernels on the same workloads.

Usage::

    python3 benchmarks/bench_kernels.py [--paths 20000] [--repeat 3] [--csv out.csv]

Each workload runs once per backend and the outputs are compared
bit for bit before any timing is reported.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from dynkinlab import backend, dynkin_hunt, engine
from dynkinlab.process import ProcessModel
from dynkinlab.space import Gasket, OpenSetSpec

SEED = 12345


def _workloads(n: int):
    killed = ProcessModel("brownian_killed", a=-1.0, b=1.0)
    line = ProcessModel("brownian_line")
    g = Gasket(4)
    U = OpenSetSpec.interval(-1.0, 1.0)
    B = OpenSetSpec.interval(-0.5, 0.5, closed=True)
    return {
        "simulate (killed, 1000 steps)":
            lambda: engine.simulate(killed, 0.0, 1e-3, 1000, SEED, 0, n, True, 1),
        "exit (killed, 1000 steps)":
            lambda: engine.exit_samples(killed, 0.0, 1e-3, 1000, SEED, n, -0.5, 0.5, [500, 1000], True, True, 1),
        "multiple DH (line, t=0.5, m=4)":
            lambda: [(le.lhs.value, le.rhs) for le in dynkin_hunt.verify_multiple_dh(
                line, U, B, B, (0.5,), 0.0, max(n // 10, 1), SEED, 1e-3, m_inner=4)],
        "gasket walk (level 4, 1000 steps)":
            lambda: engine.walk(g.neighbors, g.degree, 0, 1000, SEED, 0, n, 1),
    }


def _same(a, b) -> bool:
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(_same(u, v) for u, v in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b, equal_nan=True)
    return a == b


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--csv", help="also write the table here")
    args = p.parse_args(argv)
    if "cython" not in backend.available():
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    ok = True
    for name, fn in _workloads(args.paths).items():
        res, best = {}, {}
        for which in ("cython", "python"):
            backend.set_backend(which)
            times = []
            for _ in range(args.repeat if which == "cython" else 1):
                t0 = time.perf_counter()
                res[which] = fn()
                times.append(time.perf_counter() - t0)
            best[which] = min(times)
        same = _same(res["cython"], res["python"])
        ok &= same
        rows.append([name, best["cython"], best["python"], best["python"] / best["cython"], same])
    backend.set_backend("cython")
    w = max(len(r[0]) for r in rows)
    print(f"{'workload':<{w}}  {'cython s':>9}  {'python s':>9}  {'speedup':>8}  identical")
    for r in rows:
        print(f"{r[0]:<{w}}  {r[1]:9.3f}  {r[2]:9.3f}  {r[3]:8.1f}  {r[4]}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(["workload", "cython_s", "python_s", "speedup", "identical"])
            cw.writerows(rows)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
