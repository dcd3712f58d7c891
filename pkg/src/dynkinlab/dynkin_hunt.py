"""Monte Carlo checks of the single and multiple Dynkin-Hunt decompositions.

For an open set ``U``, a set ``B`` with closure inside ``U`` and ``u = 1_A``
with ``A`` inside ``B``:

    P_t u(x) = P^U_t u(x) + sum_n E_x[1{sigma_n <= t} P^U_{t - sigma_n} u(X_{sigma_n})],

where ``tau_1`` is the exit time of ``U``, ``sigma_n`` the first entrance
into ``B`` after ``tau_n`` and ``tau_{n+1}`` the first exit from ``U`` after
``sigma_n``. The single formula replaces the series with
``E_x[1{tau_U <= t} P_{t - tau_U} u(X_{tau_U})]``.

Each outer path gives the left side and the zeroth term directly. Every
composite term is estimated by ``m`` inner restarts from ``X_{sigma_n}`` on
disjoint substreams. The identity is tested on the per-path difference, so
its standard error accounts for the correlation of the two sides.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend, engine, oracles
from .estimate import EstimateWithError
from .process import ProcessModel
from .space import ConfigError, OpenSetSpec

N_MAX = 32
M_INNER = 16
REMAINDER_TOL = 1e-4


@dataclass
class MdhLedger:
    x: float
    t: float
    lhs: EstimateWithError
    part: EstimateWithError
    terms: list[EstimateWithError]  # e_1 .. e_N actually summed
    p_sigma: list[float]  # P(sigma_n <= t), n = 1 .. n_max + 1
    n_used: int
    remainder: float
    rhs: float
    diff: EstimateWithError  # per-path lhs - (part + sum of used terms)
    passed: bool
    oracle: float | None = None
    oracle_ok: bool | None = None
    notes: dict = field(default_factory=dict)

    @property
    def combined_se(self) -> float:
        return self.diff.se

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "e_n", "se_n", "p_sigma_n_le_t"])
        w.writerow([0, repr(self.part.value), repr(self.part.se), repr(1.0)])
        for n, p in enumerate(self.p_sigma, start=1):
            if n <= len(self.terms):
                e = self.terms[n - 1]
                w.writerow([n, repr(e.value), repr(e.se), repr(p)])
            else:
                w.writerow([n, "", "", repr(p)])


def _line_model(model: ProcessModel) -> None:
    if model.kind not in ("brownian_line", "brownian_killed"):
        raise ConfigError("Dynkin-Hunt verification is implemented for brownian_line and brownian_killed")


def _bounds(model, S: OpenSetSpec) -> tuple[float, float]:
    if S.kind not in ("interval", "ball", "whole"):
        raise ConfigError(f"set kind {S.kind!r} is not supported on the line")
    return S.bounds(model.space)


def _run(model, x, times, U, B, A, n_paths, seed, dt, bridge, n_slots, m_inner, single, threads):
    targets = np.array([engine.steps_for(t, dt) for t in times], dtype=np.int64)
    if np.any(np.diff(targets) <= 0):
        raise ConfigError("times must be strictly increasing")
    if targets.size > engine.MAX_TARGETS:
        raise ConfigError(f"at most {engine.MAX_TARGETS} target times")
    p = engine.line_params(model, dt)
    ulo, uhi = _bounds(model, U)
    blo, bhi = _bounds(model, B) if B is not None else (0.0, 0.0)
    alo, ahi = _bounds(model, A)
    k = backend.kernels()
    nt = targets.size

    def work(s, c):
        lhs = np.empty((c, nt))
        part = np.empty((c, nt))
        terms = np.empty((c, n_slots, nt))
        tau = np.empty((c, n_slots), dtype=np.int64)
        sig = np.empty((c, n_slots), dtype=np.int64)
        xs = np.empty((c, n_slots))
        k.mdh_batch(float(x), p["sd"], seed, s, ulo, uhi, blo, bhi, bool(B is not None and B.closed),
                    alo, ahi, bool(A.closed), p["klo"], p["khi"], p["killing"], bridge, p["s_dt"],
                    targets, n_slots, m_inner, single, lhs, part, terms, tau, sig, xs)
        ii, nn = np.nonzero(sig >= 0)
        return lhs, part, ii + s, nn, terms[ii, nn, :], sig[ii, nn], tau

    parts = engine.run_chunked(n_paths, work, threads)
    lhs = np.concatenate([r[0] for r in parts])
    part = np.concatenate([r[1] for r in parts])
    ii = np.concatenate([r[2] for r in parts])
    nn = np.concatenate([r[3] for r in parts])
    vals = np.concatenate([r[4] for r in parts]).reshape(-1, nt)
    sig = np.concatenate([r[5] for r in parts])
    taus = np.concatenate([r[6] for r in parts])
    return targets, lhs, part, ii, nn, vals, sig, taus


def _ledgers(model, x, times, targets, lhs, part, ii, nn, vals, sig, n_paths, seed, n_max,
             remainder_tol, gaussian_A, single) -> list[MdhLedger]:
    out = []
    for q, t in enumerate(times):
        le = sig <= targets[q]
        n_slots = n_max if single else n_max + 1
        p_sigma = [float(np.sum(le & (nn == n)) / n_paths) for n in range(n_slots)]
        if single:
            n_used, remainder = 1, 0.0
        else:
            first_small = next((n for n in range(n_max) if p_sigma[n] < remainder_tol), None)
            if first_small is None:
                n_used, remainder = n_max, p_sigma[n_max]
            else:
                n_used, remainder = first_small, p_sigma[first_small]
        used = nn < n_used
        terms = []
        for n in range(n_used):
            col = np.zeros(n_paths)
            m = nn == n
            col[ii[m]] = vals[m, q]
            terms.append(EstimateWithError.from_samples(col, seed))
        total = np.zeros(n_paths)
        np.add.at(total, ii[used], vals[used, q])
        lhs_e = EstimateWithError.from_samples(lhs[:, q], seed)
        part_e = EstimateWithError.from_samples(part[:, q], seed)
        diff = EstimateWithError.from_samples(lhs[:, q] - part[:, q] - total, seed)
        se = diff.se if diff.se > 0 else 0.0
        passed = (-3.0 * se <= diff.value <= remainder + 3.0 * se)
        rhs = part_e.value + math.fsum(e.value for e in terms)
        led = MdhLedger(float(x), float(t), lhs_e, part_e, terms, p_sigma[: n_max + 1], n_used,
                        remainder, rhs, diff, passed)
        led.notes["unpaired_se"] = math.sqrt(lhs_e.se**2 + float(np.std(part[:, q] + total, ddof=1)) ** 2 / n_paths)
        if gaussian_A is not None:
            lo, hi = gaussian_A
            led.oracle = oracles.gaussian_interval_prob(float(x), float(t), lo, hi, model.scale)
            se = lhs_e.se
            if not se > 0:
                # no spread in the sample (e.g. zero hits): binomial SE under the oracle value
                se = math.sqrt(led.oracle * (1.0 - led.oracle) / n_paths)
                led.notes["oracle_se"] = "binomial_null"
            led.oracle_ok = abs(lhs_e.value - led.oracle) <= 3.0 * se
        out.append(led)
    return out


def verify_multiple_dh(model: ProcessModel, U: OpenSetSpec, B: OpenSetSpec, A: OpenSetSpec, times,
                       x: float, n_paths: int, seed: int, dt: float, bridge: bool = True,
                       n_max: int = N_MAX, m_inner: int = M_INNER,
                       remainder_tol: float = REMAINDER_TOL, threads: int = 1) -> list[MdhLedger]:
    """Check the multiple decomposition of ``P_t 1_A(x)`` at each time in ``times``.

    Returns one ledger per time. A ledger passes when the mean per-path
    difference between the two sides lies in
    ``[-3 se, remainder + 3 se]``. Here ``remainder`` bounds the omitted
    tail of the series.
    """
    _line_model(model)
    space = model.space
    if not B.closure_inside(space, U):
        raise ConfigError("closure of B must lie inside U")
    alo, ahi = _bounds(model, A)
    blo, bhi = _bounds(model, B)
    if alo < blo or ahi > bhi or (A.closed and not B.closed and (alo == blo or ahi == bhi)):
        raise ConfigError("u must vanish off B: A must lie inside B")
    if n_max < 1 or m_inner < 1:
        raise ConfigError("n_max and m_inner must be positive")
    times = list(times)
    targets, lhs, part, ii, nn, vals, sig, _ = _run(model, x, times, U, B, A, n_paths, seed, dt, bridge,
                                                   n_max + 1, m_inner, False, threads)
    gauss = (alo, ahi) if model.kind == "brownian_line" else None
    return _ledgers(model, x, times, targets, lhs, part, ii, nn, vals, sig, n_paths, seed, n_max,
                    remainder_tol, gauss, False)


def verify_single_dh(model: ProcessModel, U: OpenSetSpec, A: OpenSetSpec, times, x: float, n_paths: int,
                     seed: int, dt: float, bridge: bool = True, m_inner: int = M_INNER,
                     threads: int = 1) -> list[MdhLedger]:
    """Check ``P_t u = P^U_t u + E[1{tau_U <= t} P_{t - tau_U} u(X_{tau_U})]`` for ``u = 1_A``."""
    _line_model(model)
    alo, ahi = _bounds(model, A)
    times = list(times)
    targets, lhs, part, ii, nn, vals, sig, _ = _run(model, x, times, U, None, A, n_paths, seed, dt, bridge,
                                                   1, m_inner, True, threads)
    gauss = (alo, ahi) if model.kind == "brownian_line" else None
    return _ledgers(model, x, times, targets, lhs, part, ii, nn, vals, sig, n_paths, seed, 1, 0.0, gauss, True)


def sigma_steps(model: ProcessModel, U: OpenSetSpec, B: OpenSetSpec, x: float, t: float, n_paths: int,
                seed: int, dt: float, bridge: bool = True, n_slots: int = N_MAX, threads: int = 1):
    """Per-path ``tau_n`` and ``sigma_n`` grid steps (-1 when absent) from the outer kernel.

    This runs the same outer paths as :func:`verify_multiple_dh` with the
    same seed, which makes pathwise invariant checks possible.
    """
    _line_model(model)
    p = engine.line_params(model, dt)
    targets = np.array([engine.steps_for(t, dt)], dtype=np.int64)
    ulo, uhi = _bounds(model, U)
    blo, bhi = _bounds(model, B)
    k = backend.kernels()

    def work(s, c):
        lhs = np.empty((c, 1))
        part = np.empty((c, 1))
        terms = np.empty((c, n_slots, 1))
        tau = np.empty((c, n_slots), dtype=np.int64)
        sig = np.empty((c, n_slots), dtype=np.int64)
        xs = np.empty((c, n_slots))
        k.mdh_batch(float(x), p["sd"], seed, s, ulo, uhi, blo, bhi, bool(B.closed), blo, bhi, bool(B.closed),
                    p["klo"], p["khi"], p["killing"], bridge, p["s_dt"], targets, n_slots, 0, False,
                    lhs, part, terms, tau, sig, xs)
        return tau, sig, xs, lhs[:, 0], part[:, 0]

    parts = engine.run_chunked(n_paths, work, threads)
    return tuple(np.concatenate([r[i] for r in parts]) for i in range(5))
