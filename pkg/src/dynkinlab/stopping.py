"""Stopping times evaluated on sampled paths.

All times are grid times or ``inf`` (no event within the horizon). On
Brownian paths sampled with ``bridge=True``, interval exits are also
detected between grid states. This uses the path's own bridge uniforms, so
the result agrees with the compiled exit kernels. Entrances are always
detected at grid states.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .process import Path
from .space import ConfigError, Line, OpenSetSpec

INF = math.inf
BRIDGE_CUTOFF = 40.0


def _member(path: Path, B: OpenSetSpec) -> np.ndarray:
    return np.asarray(B.contains(path.model.space, path.states), dtype=bool)


def _bridge_exits(path: Path, B: OpenSetSpec) -> np.ndarray | None:
    """Boolean per step ``k >= 1``: the bridge between states ``k-1`` and ``k`` leaves ``B``."""
    if not path.bridge or not isinstance(path.model.space, Line) or B.kind not in ("interval", "ball", "whole"):
        return None
    if B.kind == "whole":
        return np.zeros(path.n_steps, dtype=bool)
    lo, hi = B.bounds(path.model.space)
    x, y = path.states[:-1], path.states[1:]
    s_dt = path.model.scale * path.dt
    with np.errstate(invalid="ignore", over="ignore"):
        alo = 2.0 * (x - lo) * (y - lo) / s_dt
        ahi = 2.0 * (x - hi) * (y - hi) / s_dt
    plo = np.where(alo < BRIDGE_CUTOFF, np.exp(-np.where(alo < BRIDGE_CUTOFF, alo, 0.0)), 0.0)
    phi = np.where(ahi < BRIDGE_CUTOFF, np.exp(-np.where(ahi < BRIDGE_CUTOFF, ahi, 0.0)), 0.0)
    p = plo + phi - plo * phi
    key = np.array([rng.path_key(*path.seed)], dtype=np.uint64)
    u = rng.bridge_uniforms(np.repeat(key, path.n_steps), np.arange(1, path.n_steps + 1))
    inside = (x > lo) & (x < hi) & (y > lo) & (y < hi)
    return inside & (p > 0.0) & (u < p)


def _time(path: Path, k: int | None) -> float:
    return INF if k is None else k * path.dt


def _step(path: Path, t: float) -> int | None:
    if math.isinf(t):
        return None
    k = int(round(t / path.dt))
    if abs(k * path.dt - t) > 1e-9 * max(1.0, t) or k < 0:
        raise ConfigError(f"{t} is not a grid time")
    return k


def exit_time_after(path: Path, U: OpenSetSpec, sigma: float = 0.0) -> float:
    """First grid time ``>= sigma`` at which the path is outside ``U`` or dead."""
    k0 = _step(path, sigma)
    if k0 is None or k0 > path.n_steps:
        return INF
    out = ~_member(path, U)
    out[:k0] = False
    bx = _bridge_exits(path, U)
    if bx is not None:
        # step k crosses between states k-1 and k, so only k > k0 counts
        cross = np.zeros(path.n_steps + 1, dtype=bool)
        cross[1:] = bx
        cross[: k0 + 1] = False
        out |= cross
    hit = np.flatnonzero(out)
    return _time(path, int(hit[0]) if hit.size else None)


def entrance_time_after(path: Path, B: OpenSetSpec, sigma: float = 0.0) -> float:
    """First grid time ``>= sigma`` at which the path is in ``B``."""
    k0 = _step(path, sigma)
    if k0 is None or k0 > path.n_steps:
        return INF
    inn = _member(path, B)
    inn[:k0] = False
    hit = np.flatnonzero(inn)
    return _time(path, int(hit[0]) if hit.size else None)


def exit_time(path: Path, B: OpenSetSpec) -> float:
    return exit_time_after(path, B, 0.0)


def entrance_time(path: Path, B: OpenSetSpec) -> float:
    return entrance_time_after(path, B, 0.0)


@dataclass
class MdhSequence:
    """Alternating exit/entrance times ``(tau_n, sigma_n)``, ``n = 1, 2, ...``.

    ``sigmas[n]`` is ``inf`` when ``B`` is not re-entered within the horizon;
    ``truncated_at`` is the number of complete pairs with ``sigma_n`` finite.
    """

    taus: list[float] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)

    @property
    def truncated_at(self) -> int:
        return sum(1 for s in self.sigmas if math.isfinite(s))

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.taus, self.sigmas))

    def interleaved(self) -> bool:
        seq = [t for pair in zip(self.taus, self.sigmas) for t in pair]
        if len(self.taus) > len(self.sigmas):
            seq.append(self.taus[-1])
        return all(a <= b for a, b in zip(seq, seq[1:]))


def mdh_sequence(path: Path, U: OpenSetSpec, B: OpenSetSpec, horizon: float | None = None) -> MdhSequence:
    """``tau_1 = tau_U``, ``sigma_n`` = entrance of B after ``tau_n``, ``tau_{n+1}`` = exit of U after ``sigma_n``."""
    space = path.model.space
    if not B.closure_inside(space, U):
        raise ConfigError("closure of B must lie inside U")
    h = path.horizon if horizon is None else min(horizon, path.horizon)
    seq = MdhSequence()
    tau = exit_time(path, U)
    while True:
        if tau > h:
            seq.taus.append(INF)
            break
        seq.taus.append(tau)
        sigma = entrance_time_after(path, B, tau)
        if sigma > h:
            seq.sigmas.append(INF)
            break
        seq.sigmas.append(sigma)
        tau = exit_time_after(path, U, sigma)
    return seq


# ---------------------------------------------------------------- records


@dataclass
class StoppingRecord:
    path_index: int
    times: dict[str, float] = field(default_factory=dict)


def write_records_csv(fh, records: list[StoppingRecord]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path_index", "name", "time"])
    for rec in records:
        for name, t in rec.times.items():
            w.writerow([rec.path_index, name, "INF" if math.isinf(t) else repr(float(t))])
