"""Monte Carlo estimators on shared path ensembles.

Every estimator is a deterministic function of ``(model, arguments, n_paths,
seed, dt, bridge)``. Two estimators called with the same seed see the same
paths. Inequalities between them, such as part transition <= full
transition, therefore hold path by path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import engine, rng
from .process import ProcessModel, n_steps_for
from .space import Circle, ConfigError, Gasket, OpenSetSpec

CENSOR_LIMIT = 1e-3


@dataclass
class EstimateWithError:
    value: float
    se: float
    n: int
    seed: int
    notes: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, x: np.ndarray, seed: int, **notes) -> EstimateWithError:
        x = np.asarray(x, dtype=float)
        n = x.size
        mean = float(np.mean(x)) if n else math.nan
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return cls(mean, se, n, seed, dict(notes))

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.se

    def row(self, name: str) -> list:
        return [name, repr(self.value), repr(self.se), self.n]


# ------------------------------------------------------------ path access


def _check_n(n_paths: int) -> None:
    if n_paths < 1:
        raise ConfigError("n_paths must be positive")


def _grid_dt(model: ProcessModel, dt: float | None) -> float:
    if model.kind == "gasket_walk":
        dt = model.step_time if dt is None else dt
    if dt is None:
        raise ConfigError("dt is required for Brownian models")
    model.check_dt(dt)
    return dt


def lifted_bounds(model: ProcessModel, U: OpenSetSpec, x: float) -> tuple[float, float]:
    """Interval on the line (or on the circle's universal cover, through ``x``) matching ``U``."""
    if U.kind == "whole":
        return -math.inf, math.inf
    if U.kind == "vertex_set":
        raise ConfigError("vertex sets need the gasket model")
    if isinstance(model.space, Circle):
        L = model.space.length
        if U.kind == "ball":
            if U.radius > L / 2.0:
                return -math.inf, math.inf
            d = ((x - U.center + L / 2.0) % L) - L / 2.0
            c = x - d
            return c - U.radius, c + U.radius
        width = U.hi - U.lo
        if width >= L:
            return -math.inf, math.inf
        off = (x - U.lo) % L
        return x - off, x - off + width
    return U.bounds(model.space)


def _gasket_states(model, x, n, n_paths, seed, threads):
    g = model.space
    return engine.walk(g.neighbors, g.degree, int(x), n, seed, 0, n_paths, threads)


def _gasket_exit_steps(model, states, U) -> np.ndarray:
    out = ~U.contains(model.space, states)
    first = np.where(out.any(axis=1), np.argmax(out, axis=1), -1)
    return first.astype(np.int64)


def end_states(model: ProcessModel, x, t: float, U: OpenSetSpec, n_paths: int, seed: int,
               dt: float | None = None, bridge: bool = False, threads: int = 1):
    """States at time ``t`` and exit steps from ``U`` on the shared ensemble.

    Returns ``(states, exit_steps, n_t)``. The states are wrapped for the
    circle. The cemetery is NaN, or -1 on the gasket. ``exit_steps`` is -1
    when ``U`` is not left within ``n_t`` steps.
    """
    _check_n(n_paths)
    dt = _grid_dt(model, dt)
    model.check_start(x)
    n = engine.steps_for(t, dt)
    if model.kind == "gasket_walk":
        st = _gasket_states(model, x, n, n_paths, seed, threads)
        return st[:, n], _gasket_exit_steps(model, st, U), n
    lo, hi = lifted_bounds(model, U, float(x))
    samp, ex, _ = engine.exit_samples(model, float(x), dt, n, seed, n_paths, lo, hi, [n], True, bridge, threads)
    y = samp[:, 0]
    if isinstance(model.space, Circle):
        y = np.mod(y, model.space.length)
    return y, ex, n


def exit_steps(model: ProcessModel, x, U: OpenSetSpec, n_steps: int, n_paths: int, seed: int,
               dt: float, bridge: bool = False, threads: int = 1) -> np.ndarray:
    """First exit step from ``U`` within ``n_steps`` (or -1), per path."""
    if model.kind == "gasket_walk":
        st = _gasket_states(model, x, n_steps, n_paths, seed, threads)
        return _gasket_exit_steps(model, st, U)
    lo, hi = lifted_bounds(model, U, float(x))
    _, ex, _ = engine.exit_samples(model, float(x), dt, n_steps, seed, n_paths, lo, hi, [], False, bridge, threads)
    return ex


# -------------------------------------------------------------- estimators


def transition_prob(model: ProcessModel, x, t: float, A: OpenSetSpec, n_paths: int, seed: int,
                    dt: float | None = None, bridge: bool = False, threads: int = 1) -> EstimateWithError:
    """Estimate ``P_x[X_t in A]``; the cemetery is never in ``A``."""
    y, _, _ = end_states(model, x, t, OpenSetSpec.whole(), n_paths, seed, dt, bridge, threads)
    return EstimateWithError.from_samples(A.contains(model.space, y), seed)


def part_transition_prob(model: ProcessModel, x, t: float, U: OpenSetSpec, A: OpenSetSpec, n_paths: int,
                         seed: int, dt: float | None = None, bridge: bool = False,
                         threads: int = 1) -> EstimateWithError:
    """Estimate ``P_x[X_t in A, t < tau_U]``."""
    return part_and_full(model, x, t, U, A, n_paths, seed, dt, bridge, threads)[0]


def part_and_full(model: ProcessModel, x, t: float, U: OpenSetSpec, A: OpenSetSpec, n_paths: int, seed: int,
                  dt: float | None = None, bridge: bool = False, threads: int = 1):
    """Part and full transition estimates on one ensemble, plus the per-path indicators."""
    y, ex, n = end_states(model, x, t, U, n_paths, seed, dt, bridge, threads)
    full = A.contains(model.space, y)
    part = full & (ex < 0)
    return (EstimateWithError.from_samples(part, seed), EstimateWithError.from_samples(full, seed),
            part, full)


def exit_prob(model: ProcessModel, x, r: float, t: float, n_paths: int, seed: int,
              dt: float | None = None, bridge: bool = False, threads: int = 1) -> EstimateWithError:
    """Estimate ``P_x[tau_B(x, r) <= t]``; paths still inside at ``t`` count as not exited."""
    if not r > 0:
        raise ConfigError("radius must be positive")
    _check_n(n_paths)
    dt = _grid_dt(model, dt)
    n = engine.steps_for(t, dt)
    ball = OpenSetSpec("ball", center=float(x), radius=r)
    ex = exit_steps(model, x, ball, n, n_paths, seed, dt, bridge, threads)
    return EstimateWithError.from_samples(ex >= 0, seed)


def exit_prob_grid(model: ProcessModel, x, radii, times, n_paths: int, seed: int, dt: float,
                   bridge: bool = False, threads: int = 1) -> dict[tuple[float, float], EstimateWithError]:
    """``exit_prob`` on a grid of radii and times; one ensemble per radius."""
    out = {}
    times = sorted(times)
    n_max = engine.steps_for(times[-1], dt)
    for r in radii:
        ball = OpenSetSpec("ball", center=float(x), radius=r)
        ex = exit_steps(model, x, ball, n_max, n_paths, seed, dt, bridge, threads)
        for t in times:
            n = engine.steps_for(t, dt)
            out[(r, t)] = EstimateWithError.from_samples((ex >= 0) & (ex <= n), seed)
    return out


def mean_exit_time(model: ProcessModel, x, r: float, cap: float | None, n_paths: int, seed: int,
                   dt: float | None = None, horizon: float | None = None, bridge: bool = False,
                   threads: int = 1) -> EstimateWithError:
    """Estimate ``E_x[tau ^ cap]`` (``cap`` given) or ``E_x[tau]`` for ``tau = tau_B(x, r)``.

    Without a cap the paths run to ``horizon`` (default ``10 r**2/scale``).
    Censored paths then enter as the horizon, so the estimate is a lower
    bound. The notes record the censored fraction, and ``flagged`` is set
    when that fraction exceeds 1e-3.
    """
    if not r > 0:
        raise ConfigError("radius must be positive")
    _check_n(n_paths)
    dt = _grid_dt(model, dt)
    if cap is not None:
        if cap < 0:
            raise ConfigError("cap must be nonnegative")
        if cap == 0:
            return EstimateWithError(0.0, 0.0, n_paths, seed, {"censored_fraction": 0.0, "flagged": False})
        H = cap
    else:
        H = horizon if horizon is not None else 10.0 * r * r / getattr(model, "scale", 1.0)
    n = n_steps_for(H, dt)
    if cap is not None:
        n = engine.steps_for(cap, dt)
    ball = OpenSetSpec("ball", center=float(x), radius=r)
    ex = exit_steps(model, x, ball, n, n_paths, seed, dt, bridge, threads)
    tau = np.where(ex >= 0, ex * dt, n * dt)
    cens = float(np.mean(ex < 0))
    flagged = cap is None and cens > CENSOR_LIMIT
    return EstimateWithError.from_samples(tau, seed, censored_fraction=cens, flagged=flagged, horizon=n * dt)


def laplace_exit(model: ProcessModel, x, r: float, lam: float, n_paths: int, seed: int,
                 dt: float | None = None, horizon: float | None = None, bridge: bool = False,
                 threads: int = 1) -> EstimateWithError:
    """Estimate ``E_x[exp(-lam tau_B(x, r))]``.

    Censored paths contribute 0 to the point estimate and at most
    ``exp(-lam H)`` each. ``notes["upper"]`` holds the resulting upper end.
    """
    if not lam > 0:
        raise ConfigError("lambda must be positive")
    _check_n(n_paths)
    dt = _grid_dt(model, dt)
    H = horizon if horizon is not None else max(40.0 / lam, 10.0 * r * r / getattr(model, "scale", 1.0))
    n = n_steps_for(H, dt)
    ball = OpenSetSpec("ball", center=float(x), radius=r)
    ex = exit_steps(model, x, ball, n, n_paths, seed, dt, bridge, threads)
    vals = np.where(ex >= 0, np.exp(-lam * ex * dt), 0.0)
    est = EstimateWithError.from_samples(vals, seed)
    cens = float(np.mean(ex < 0))
    est.notes.update(censored_fraction=cens, upper=est.value + cens * math.exp(-lam * n * dt))
    return est


def two_stage_transition(model: ProcessModel, x: float, t: float, s: float, A: OpenSetSpec,
                         n_paths: int, seed: int, dt: float, threads: int = 1) -> EstimateWithError:
    """Estimate ``P_t P_s 1_A(x)`` by running to ``t`` and restarting for ``s`` more.

    The restart uses a separate substream, so the two stages share no random
    numbers. Only the spatially homogeneous ``brownian_line`` model is
    supported. Its restart from ``X_t`` equals ``X_t`` plus a fresh path
    started at 0.
    """
    if model.kind != "brownian_line":
        raise ConfigError("two-stage restarts are implemented for brownian_line")
    y1, _, _ = end_states(model, x, t, OpenSetSpec.whole(), n_paths, seed, dt, False, threads)
    aux = rng.stream_key(seed, rng.TAG_AUX) & ((1 << 63) - 1)
    y2, _, _ = end_states(model, 0.0, s, OpenSetSpec.whole(), n_paths, aux, dt, False, threads)
    return EstimateWithError.from_samples(A.contains(model.space, y1 + y2), seed)


# -------------------------------------------------------- density extraction


@dataclass(frozen=True)
class PartitionHierarchy:
    """Dyadic bisections of the window ``(lo, hi)`` down to ``depth`` levels."""

    lo: float
    hi: float
    depth: int

    def __post_init__(self):
        if not self.lo < self.hi or not math.isfinite(self.hi - self.lo):
            raise ConfigError("window must be a bounded interval")
        if not 0 <= self.depth <= 16:
            raise ConfigError("depth must lie in [0, 16]")

    def edges(self, level: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * np.arange(2**level + 1) / 2**level

    def widths(self, level: int) -> np.ndarray:
        e = self.edges(level)
        return np.diff(e)

    def position(self, y: np.ndarray) -> np.ndarray:
        """Relative position in ``[0, 1)`` (NaN outside the window)."""
        y = np.asarray(y, dtype=float)
        z = (y - self.lo) / (self.hi - self.lo)
        return np.where((y > self.lo) & (y < self.hi), z, np.nan)

    def cell_index(self, z: np.ndarray, level: int) -> np.ndarray:
        ok = np.isfinite(z)
        idx = np.floor(np.where(ok, z, 0.0) * 2**level).astype(np.int64)
        idx = np.minimum(idx, 2**level - 1)
        return np.where(ok, idx, -1)

    def cell_of(self, y: float, level: int | None = None) -> int:
        level = self.depth if level is None else level
        return int(self.cell_index(self.position(np.array([y])), level)[0])


@dataclass
class KernelEstimate:
    """Cell-averaged part-process density from one shared ensemble."""

    x: float
    t: float
    U: OpenSetSpec
    hierarchy: PartitionHierarchy
    positions: np.ndarray  # relative positions of surviving end states in the window
    n: int
    seed: int

    def counts(self, level: int | None = None) -> np.ndarray:
        level = self.hierarchy.depth if level is None else level
        idx = self.hierarchy.cell_index(self.positions, level)
        return np.bincount(idx[idx >= 0], minlength=2**level)

    def masses(self, level: int | None = None) -> np.ndarray:
        return self.counts(level) / self.n

    def density(self, level: int | None = None) -> np.ndarray:
        level = self.hierarchy.depth if level is None else level
        w = self.hierarchy.widths(level)
        return np.where(w > 0, self.masses(level) / np.where(w > 0, w, 1.0), 0.0)

    def se(self, level: int | None = None) -> np.ndarray:
        level = self.hierarchy.depth if level is None else level
        p = self.masses(level)
        return np.sqrt(p * (1.0 - p) / max(self.n - 1, 1)) / self.hierarchy.widths(level)

    def density_at(self, y: float) -> tuple[float, float, int]:
        j = self.hierarchy.cell_of(y)
        return float(self.density()[j]), float(self.se()[j]), j

    def total_mass(self) -> float:
        return float(np.sum(np.isfinite(self.positions)) / self.n)

    def telescoping_exact(self) -> bool:
        """Each cell's count equals the sum over its two children, at every level."""
        for level in range(self.hierarchy.depth):
            parent = self.counts(level)
            kids = self.counts(level + 1)
            if not np.array_equal(parent, kids[0::2] + kids[1::2]):
                return False
        return True

    def write_csv(self, fh, level: int | None = None) -> None:
        level = self.hierarchy.depth if level is None else level
        e = self.hierarchy.edges(level)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_left", "cell_right", "density", "se"])
        for a, b, d, s in zip(e[:-1], e[1:], self.density(level), self.se(level)):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(d)), repr(float(s))])


def density_extract(model: ProcessModel, x: float, t: float, U: OpenSetSpec, window: tuple[float, float],
                    depth: int, n_paths: int, seed: int, dt: float, bridge: bool = False,
                    threads: int = 1) -> KernelEstimate:
    """Dyadic cell averages of the part-process density ``y -> p^U_t(x, y)`` over ``window``.

    Each cell value is the estimated part transition probability of the cell,
    divided by its length. All cells use the same ensemble.
    """
    if isinstance(model.space, Gasket):
        raise ConfigError("density extraction is implemented for one-dimensional models")
    hier = PartitionHierarchy(float(window[0]), float(window[1]), depth)
    W = OpenSetSpec.interval(hier.lo, hier.hi)
    if isinstance(model.space, Circle):
        if hier.hi - hier.lo > model.space.length:
            raise ConfigError("window longer than the circle")
    elif U.kind != "whole":
        lo, hi = U.bounds(model.space)
        if hier.lo < lo or hier.hi > hi:
            raise ConfigError("window must lie inside U")
    y, ex, _ = end_states(model, x, t, U, n_paths, seed, dt, bridge, threads)
    alive = (ex < 0) & W.contains(model.space, y)
    pos = hier.position(np.where(alive, y, np.nan))
    return KernelEstimate(float(x), t, U, hier, pos, n_paths, seed)
