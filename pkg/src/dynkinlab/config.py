"""JSON run configuration: parsing and validation.

Validation collects every problem before failing. Each message starts with
the dotted path of the offending field, e.g. ``estimator.dt: required``.
The schema is documented in the README.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .process import MODEL_KINDS, ProcessModel
from .scale import ScaleFunction
from .space import SET_KINDS, ConfigError, OpenSetSpec

SUBCOMMANDS = ("phi", "simulate", "estimate", "verify-mdh", "verify-dh", "exit-prob", "verify-chain",
               "verify-du", "verify-p", "bound-profile", "acceptance")
MAX_DEPTH = 16

# estimator fields each subcommand needs (x may be given as xs)
_NEEDS = {
    "phi": (),
    "simulate": ("x", "horizon", "n_paths", "dt"),
    "estimate": ("x", "times", "n_paths", "dt"),
    "verify-mdh": ("x", "times", "n_paths", "dt"),
    "verify-dh": ("x", "times", "n_paths", "dt"),
    "exit-prob": ("x", "radii", "times", "n_paths", "dt"),
    "verify-chain": ("radii", "times", "n_paths", "dt"),
    "verify-du": ("samples", "depth", "n_paths", "dt"),
    "verify-p": ("samples", "times", "n_paths", "dt"),
    "bound-profile": ("x", "times", "ys"),
    "acceptance": (),
}
_SETS = {
    "estimate": ("U", "A"), "verify-mdh": ("U", "B"), "verify-dh": ("U", "A"),
    "verify-du": ("U",), "verify-p": ("U",), "bound-profile": ("U",),
}
_CONSTS = {
    "verify-du": ("R",), "verify-p": ("R", "c", "gamma"), "bound-profile": ("R", "c", "gamma", "eps"),
}


class ConfigValidationError(ConfigError):
    """Raised with the full list of problems, one ``path: message`` string each."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class Estimator:
    xs: list = field(default_factory=list)
    times: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    n_paths: int = 0
    dt: float | None = None
    horizon: float | None = None
    n_max: int = 32
    m_inner: int = 16
    depth: int = 10
    bridge: bool = True


@dataclass
class RunConfig:
    subcommand: str
    seed: int
    out: str | None
    model: ProcessModel | None
    scale_function: ScaleFunction | None
    sets: dict
    window: tuple | None
    estimator: Estimator
    constants: dict
    bound_function: dict | None
    phi: dict | None
    acceptance: dict
    raw: dict


def load(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigValidationError([f"config: cannot read {path}: {exc.strerror}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigValidationError([f"config: invalid JSON at line {exc.lineno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ConfigValidationError(["config: top level must be an object"])
    return data


class _Errors:
    def __init__(self):
        self.items: list[str] = []

    def add(self, path: str, msg: str) -> None:
        self.items.append(f"{path}: {msg}")


def _num(err, d: dict, key: str, path: str, required=False, positive=False, integer=False, default=None):
    if key not in d or d[key] is None:
        if required:
            err.add(f"{path}.{key}", "required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        err.add(f"{path}.{key}", "must be a number")
        return default
    if integer and (not float(v).is_integer()):
        err.add(f"{path}.{key}", "must be an integer")
        return default
    if not math.isfinite(v) and not (key == "R" and v == math.inf):
        err.add(f"{path}.{key}", "must be finite")
        return default
    if positive and not v > 0:
        err.add(f"{path}.{key}", "must be positive")
        return default
    return int(v) if integer else float(v)


def _num_list(err, d: dict, key: str, path: str, required=False, positive=False):
    if key not in d:
        if required:
            err.add(f"{path}.{key}", "required")
        return []
    v = d[key]
    if not isinstance(v, list) or not v:
        err.add(f"{path}.{key}", "must be a non-empty list")
        return []
    out = []
    for i, a in enumerate(v):
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not math.isfinite(a):
            err.add(f"{path}.{key}[{i}]", "must be a finite number")
        elif positive and not a > 0:
            err.add(f"{path}.{key}[{i}]", "must be positive")
        else:
            out.append(float(a))
    return out


def _set(err, d, path: str) -> OpenSetSpec | None:
    if not isinstance(d, dict):
        err.add(path, "must be an object")
        return None
    kind = d.get("kind")
    if kind not in SET_KINDS:
        err.add(f"{path}.kind", f"must be one of {list(SET_KINDS)}")
        return None
    closed = bool(d.get("closed", False))
    n0 = len(err.items)
    if kind == "interval":
        lo = _num(err, d, "lo", path, required=True)
        hi = _num(err, d, "hi", path, required=True)
        if lo is not None and hi is not None and not lo < hi:
            err.add(path, "needs lo < hi")
        if len(err.items) > n0:
            return None
        return OpenSetSpec.interval(lo, hi, closed)
    if kind == "ball":
        c = _num(err, d, "center", path, required=True)
        r = _num(err, d, "radius", path, required=True, positive=True)
        if len(err.items) > n0:
            return None
        return OpenSetSpec("ball", center=c, radius=r, closed=closed)
    if kind == "vertex_set":
        v = d.get("vertices")
        if not isinstance(v, list) or not all(isinstance(a, int) and a >= 0 for a in v):
            err.add(f"{path}.vertices", "must be a list of vertex indices")
            return None
        return OpenSetSpec.vertex_set(v)
    return OpenSetSpec.whole()


def _model(err, d) -> ProcessModel | None:
    if d is None:
        err.add("model", "required")
        return None
    if not isinstance(d, dict):
        err.add("model", "must be an object")
        return None
    kind = d.get("kind")
    if kind not in MODEL_KINDS:
        err.add("model.kind", f"must be one of {list(MODEL_KINDS)}")
        return None
    kw = {"kind": kind}
    for key in ("scale", "a", "b", "circumference"):
        v = _num(err, d, key, "model")
        if v is not None:
            kw[key] = v
    lvl = _num(err, d, "level", "model", integer=True)
    if lvl is not None:
        kw["level"] = lvl
    try:
        return ProcessModel(**kw)
    except ConfigError as exc:
        err.add("model", str(exc))
        return None


def _scale(err, d) -> ScaleFunction | None:
    if not isinstance(d, dict):
        err.add("scale_function", "must be an object")
        return None
    kind = d.get("kind")
    try:
        if kind == "power":
            b = _num(err, d, "beta", "scale_function", required=True)
            return None if b is None else ScaleFunction.power(b)
        if kind == "piecewise":
            bp = _num_list(err, d, "breakpoints", "scale_function", required=True, positive=True)
            ex = _num_list(err, d, "exponents", "scale_function", required=True)
            return ScaleFunction.piecewise(tuple(bp), tuple(ex)) if bp and ex else None
        if kind == "tabulated":
            r = _num_list(err, d, "r", "scale_function", required=True, positive=True)
            p = _num_list(err, d, "psi", "scale_function", required=True, positive=True)
            b1 = _num(err, d, "beta1", "scale_function", required=True)
            b2 = _num(err, d, "beta2", "scale_function", required=True)
            c = _num(err, d, "c_psi", "scale_function", default=1.0)
            if None in (b1, b2) or not r:
                return None
            return ScaleFunction.tabulated(r, p, b1, b2, c)
    except ConfigError as exc:
        err.add("scale_function", str(exc))
        return None
    err.add("scale_function.kind", "must be one of ['power', 'piecewise', 'tabulated']")
    return None


def _on_grid(t: float, dt: float) -> bool:
    k = t / dt
    return abs(k - round(k)) <= 1e-9 * max(1.0, k)


def validate(raw: dict, subcommand: str, seed_override: int | None = None,
             out_override: str | None = None) -> RunConfig:
    """Check ``raw`` for ``subcommand``; raise :class:`ConfigValidationError` listing all problems."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigValidationError([f"subcommand: unknown {subcommand!r}"])
    err = _Errors()
    seed = seed_override
    if seed is None:
        seed = _num(err, raw, "seed", "config", integer=True, default=0)
        if "seed" not in raw and subcommand != "acceptance":
            err.add("seed", "required (or pass --seed)")
    if seed is not None and not 0 <= seed < 2**64:
        err.add("seed", "must be an unsigned 64-bit integer")
    out = out_override if out_override is not None else raw.get("out")

    needs_model = subcommand not in ("phi", "bound-profile", "acceptance")
    model = _model(err, raw.get("model")) if (needs_model or "model" in raw) else None
    sf = None
    if "scale_function" in raw:
        sf = _scale(err, raw["scale_function"])
    elif subcommand in ("verify-chain", "verify-du", "verify-p", "bound-profile"):
        err.add("scale_function", "required")

    geo = raw.get("geometry", {})
    sets = {}
    if not isinstance(geo, dict):
        err.add("geometry", "must be an object")
        geo = {}
    for name in ("U", "B", "A"):
        if name in geo:
            s = _set(err, geo[name], f"geometry.{name}")
            if s is not None:
                sets[name] = s
        elif name in _SETS.get(subcommand, ()):
            err.add(f"geometry.{name}", "required")
    window = None
    if "window" in geo:
        w = _num_list(err, geo, "window", "geometry")
        if len(w) != 2 or not w[0] < w[1]:
            err.add("geometry.window", "must be [lo, hi] with lo < hi")
        else:
            window = (w[0], w[1])

    e = raw.get("estimator", {})
    if not isinstance(e, dict):
        err.add("estimator", "must be an object")
        e = {}
    need = _NEEDS[subcommand]
    est = Estimator()
    if "xs" in e:
        est.xs = _num_list(err, e, "xs", "estimator")
    elif "x" in e:
        x = _num(err, e, "x", "estimator")
        est.xs = [] if x is None else [x]
    elif "x" in need:
        err.add("estimator.x", "required")
    est.times = _num_list(err, e, "times", "estimator", required="times" in need, positive=True)
    est.radii = _num_list(err, e, "radii", "estimator", required="radii" in need, positive=True)
    est.ys = _num_list(err, e, "ys", "estimator", required="ys" in need)
    if "samples" in e:
        s = e["samples"]
        if not isinstance(s, list) or not s or not all(
                isinstance(p, list) and len(p) == 2 and all(isinstance(a, (int, float)) for a in p) for p in s):
            err.add("estimator.samples", "must be a non-empty list of [a, b] pairs")
        else:
            est.samples = [(float(a), float(b)) for a, b in s]
    elif "samples" in need:
        err.add("estimator.samples", "required")
    n = _num(err, e, "n_paths", "estimator", required="n_paths" in need, positive=True, integer=True)
    est.n_paths = n or 0
    gasket = model is not None and model.kind == "gasket_walk"
    est.dt = _num(err, e, "dt", "estimator", required=("dt" in need and not gasket), positive=True)
    if gasket and est.dt is None:
        est.dt = model.step_time
    est.horizon = _num(err, e, "horizon", "estimator", required="horizon" in need, positive=True)
    est.n_max = _num(err, e, "n_max", "estimator", positive=True, integer=True, default=32)
    est.m_inner = _num(err, e, "m_inner", "estimator", positive=True, integer=True, default=16)
    est.depth = _num(err, e, "depth", "estimator", required="depth" in need, integer=True, default=10)
    if est.depth is not None and not 0 <= est.depth <= MAX_DEPTH:
        err.add("estimator.depth", f"must lie in [0, {MAX_DEPTH}]")
    est.bridge = bool(e.get("bridge", True))

    # cross references
    if est.dt is not None:
        for i, t in enumerate(est.times):
            if not _on_grid(t, est.dt):
                err.add(f"estimator.times[{i}]", f"{t} is not a multiple of dt = {est.dt}")
        if est.horizon is not None and est.horizon < est.dt:
            err.add("estimator.horizon", "must be at least dt")
        if subcommand in ("verify-du",):
            for i, (t, _) in enumerate(est.samples):
                if not _on_grid(t, est.dt):
                    err.add(f"estimator.samples[{i}]", f"time {t} is not a multiple of dt")
    if est.times and sorted(est.times) != est.times:
        err.add("estimator.times", "must be increasing")
    if subcommand == "verify-mdh" and model is not None and "U" in sets and "B" in sets:
        try:
            if not sets["B"].closure_inside(model.space, sets["U"]):
                err.add("geometry.B", "closure must lie inside geometry.U")
        except ConfigError as exc:
            err.add("geometry.B", str(exc))

    consts = raw.get("constants", {})
    if consts == "derive":
        consts = {"mode": "chain"}
    if not isinstance(consts, dict):
        err.add("constants", "must be an object or \"derive\"")
        consts = {}
    cvals = {}
    for key in ("c", "gamma", "eps", "delta", "c_E", "R"):
        v = _num(err, consts, key, "constants", required=key in _CONSTS.get(subcommand, ()), positive=True)
        if v is not None:
            cvals[key] = v
    if "eps" in cvals and not (cvals["eps"] < 1 or subcommand == "verify-chain"):
        err.add("constants.eps", "must lie in (0, 1)")
    cvals["mode"] = consts.get("mode", "chain")
    if cvals["mode"] not in ("chain", "displayed"):
        err.add("constants.mode", "must be 'chain' or 'displayed'")
    ov = consts.get("overrides", {})
    if not isinstance(ov, dict):
        err.add("constants.overrides", "must be an object")
        ov = {}
    cvals["overrides"] = ov

    bf = raw.get("bound_function")
    if bf is None and subcommand in ("verify-du", "bound-profile"):
        err.add("bound_function", "required")
    elif bf is not None:
        if not isinstance(bf, dict) or bf.get("kind") not in ("power", "volume"):
            err.add("bound_function.kind", "must be 'power' or 'volume'")
        elif bf["kind"] == "power":
            _num(err, bf, "c3", "bound_function", required=True, positive=True)
            _num(err, bf, "alpha1", "bound_function", required=True, positive=True)
        else:
            _num(err, bf, "c4", "bound_function", required=True, positive=True)
            _num(err, bf, "c_vd", "bound_function", required=True, positive=True)

    phi = raw.get("phi")
    if subcommand == "phi":
        if not isinstance(phi, dict):
            err.add("phi", "required")
        else:
            for key in ("R", "t"):
                g = _num_list(err, phi, key, "phi", required=True, positive=True)
                if g and (len(g) != 3 or not g[0] < g[1] or not float(g[2]).is_integer() or g[2] < 1):
                    err.add(f"phi.{key}", "must be [lo, hi, n] with 0 < lo < hi and integer n >= 1")
            if "betas" in phi:
                b = _num_list(err, phi, "betas", "phi")
                if any(v <= 1 for v in b):
                    err.add("phi.betas", "every beta must exceed 1")
            elif sf is None:
                err.add("phi.betas", "required unless scale_function is given")

    acc = raw.get("acceptance", {})
    if not isinstance(acc, dict):
        err.add("acceptance", "must be an object")
        acc = {}

    if err.items:
        raise ConfigValidationError(err.items)
    return RunConfig(subcommand, int(seed), out, model, sf, sets, window, est, cvals, bf, phi, acc, raw)
