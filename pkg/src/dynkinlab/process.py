"""Path sampling for the built-in diffusion models.

Models:

* ``brownian_line``: Brownian motion on the real line with variance ``scale`` per unit time.
* ``brownian_killed``: the same motion, sent to the cemetery on leaving ``(a, b)``.
* ``brownian_circle``: Brownian motion wrapped onto a circle of circumference ``circumference``.
* ``gasket_walk``: the simple random walk on the level-``L`` gasket graph, one step
  every ``5**-L`` time units.

The cemetery is ``NaN`` for continuous models and ``-1`` for the gasket walk.
A path is addressed by ``(base seed, path index)`` and is a pure function of
that address, the model and the time grid.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import engine
from .space import Circle, ConfigError, Gasket, Line

MODEL_KINDS = ("brownian_line", "brownian_killed", "brownian_circle", "gasket_walk")
MODEL_IDS = {k: i + 1 for i, k in enumerate(MODEL_KINDS)}
GASKET_CEMETERY = -1


@dataclass(frozen=True)
class ProcessModel:
    kind: str
    scale: float = 1.0
    a: float = -1.0
    b: float = 1.0
    circumference: float = 1.0
    level: int = 3

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if not self.scale > 0:
            raise ConfigError("diffusion scale must be positive")
        if self.kind == "brownian_killed" and not self.a < self.b:
            raise ConfigError("killing interval needs a < b")
        if self.kind == "brownian_circle" and not self.circumference > 0:
            raise ConfigError("circumference must be positive")
        if self.kind == "gasket_walk" and not 0 <= self.level <= 8:
            raise ConfigError("gasket level must be in [0, 8]")

    @cached_property
    def space(self):
        if self.kind == "brownian_line":
            return Line()
        if self.kind == "brownian_killed":
            return Line(self.a, self.b)
        if self.kind == "brownian_circle":
            return Circle(self.circumference)
        return Gasket(self.level)

    @property
    def conservative(self) -> bool:
        return self.kind != "brownian_killed"

    @property
    def continuous(self) -> bool:
        return self.kind != "gasket_walk"

    @property
    def step_time(self) -> float | None:
        return 5.0 ** (-self.level) if self.kind == "gasket_walk" else None

    @property
    def cemetery(self):
        return GASKET_CEMETERY if self.kind == "gasket_walk" else math.nan

    def check_start(self, x0) -> None:
        if self.kind == "brownian_killed" and not self.a < x0 < self.b:
            raise ConfigError(f"start {x0} lies outside the killing interval ({self.a}, {self.b})")
        if self.kind == "gasket_walk" and not 0 <= int(x0) < self.space.n_vertices:
            raise ConfigError(f"start vertex {x0} does not exist at level {self.level}")
        if self.kind != "gasket_walk" and not math.isfinite(float(x0)):
            raise ConfigError("start point must be finite")

    def check_dt(self, dt: float) -> None:
        if not dt > 0:
            raise ConfigError("dt must be positive")
        if self.kind == "gasket_walk" and abs(dt - self.step_time) > 1e-12 * self.step_time:
            raise ConfigError(f"gasket walk needs dt = 5**-{self.level} = {self.step_time}")


@dataclass
class Path:
    """One trajectory on the grid ``0, dt, 2 dt, ...``.

    ``zeta`` is the life time (a grid time, or ``inf`` if the path was not
    killed within the horizon).
    """

    model: ProcessModel
    dt: float
    states: np.ndarray
    zeta: float
    seed: tuple[int, int]
    bridge: bool = False
    origin_step: int = field(default=0)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def alive(self) -> np.ndarray:
        if self.model.kind == "gasket_walk":
            return self.states >= 0
        return np.isfinite(self.states)


@dataclass
class PathBatch:
    """Consecutive path indices ``start .. start + count - 1`` as a state matrix."""

    model: ProcessModel
    dt: float
    states: np.ndarray  # (count, n_steps + 1)
    kill_steps: np.ndarray  # -1 when alive through the horizon
    base_seed: int
    start: int
    bridge: bool = False

    def __len__(self) -> int:
        return self.states.shape[0]

    def path(self, i: int) -> Path:
        k = int(self.kill_steps[i])
        zeta = math.inf if k < 0 else k * self.dt
        return Path(self.model, self.dt, self.states[i], zeta, (self.base_seed, self.start + i), self.bridge)


def n_steps_for(horizon: float, dt: float) -> int:
    if not horizon > 0 or not 0 < dt <= horizon * (1 + 1e-12):
        raise ConfigError("need horizon > 0 and 0 < dt <= horizon")
    return int(math.ceil(horizon / dt - 1e-9))


def sample_paths(model: ProcessModel, x0, horizon: float, dt: float, base_seed: int,
                 start: int = 0, count: int = 1, bridge: bool = False, threads: int = 1) -> PathBatch:
    """Sample paths ``start .. start + count - 1`` of the given seed.

    ``bridge`` enables the Brownian-bridge crossing test for killing, so a
    killed path may die between two grid states that are both inside ``(a, b)``.
    """
    model.check_dt(dt)
    model.check_start(x0)
    n = n_steps_for(horizon, dt)
    if model.kind == "gasket_walk":
        g = model.space
        states = engine.walk(g.neighbors, g.degree, int(x0), n, base_seed, start, count, threads)
        kill = np.full(count, -1, dtype=np.int64)
    else:
        states, kill = engine.simulate(model, float(x0), dt, n, base_seed, start, count, bridge, threads)
        if model.kind == "brownian_circle":
            states = np.mod(states, model.circumference)
    return PathBatch(model, dt, states, kill, base_seed, start, bridge)


def sample_path(model: ProcessModel, x0, horizon: float, dt: float, seed: tuple[int, int],
                bridge: bool = False) -> Path:
    """The single path addressed by ``seed = (base, index)``."""
    base, index = seed
    return sample_paths(model, x0, horizon, dt, base, index, 1, bridge).path(0)


def restart_path(model: ProcessModel, path: Path, s: float, horizon: float,
                 seed: tuple[int, int]) -> Path:
    """Fresh path of length ``horizon`` started from the state of ``path`` at time ``s``."""
    k = engine.steps_for(s, path.dt)
    if k > path.n_steps:
        raise ConfigError("restart time beyond the path horizon")
    x = path.states[k]
    if not path.alive()[k]:
        raise ConfigError("cannot restart from the cemetery")
    out = sample_path(model, x.item(), horizon, path.dt, seed, path.bridge)
    return out


# ------------------------------------------------------------- path dumps

_MAGIC = b"DHKP"
_VERSION = 1
_HEADER = struct.Struct("<4sIIdQQ")


def write_paths(path: str, batch: PathBatch) -> None:
    """Binary dump of a path batch.

    The layout is little-endian. The header holds the magic bytes ``DHKP``, then
    ``u32`` version, ``u32`` model id, ``f64`` dt, ``u64`` n_steps and ``u64`` n_paths.
    A row-major ``f64`` state matrix follows, with ``NaN`` marking the cemetery.
    Gasket vertex indices are stored as floats.
    """
    states = np.asarray(batch.states, dtype=float)
    if batch.model.kind == "gasket_walk":
        states = np.where(batch.states < 0, np.nan, states)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, MODEL_IDS[batch.model.kind], batch.dt,
                              states.shape[1] - 1, states.shape[0]))
        fh.write(np.ascontiguousarray(states, dtype="<f8").tobytes())


def read_paths(path: str) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, model_id, dt, n_steps, n_paths = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError("not a path dump")
        data = np.frombuffer(fh.read(), dtype="<f8")
    kinds = {v: k for k, v in MODEL_IDS.items()}
    meta = {"version": version, "model": kinds[model_id], "dt": dt, "n_steps": n_steps, "n_paths": n_paths}
    return meta, data.reshape(n_paths, n_steps + 1).copy()
