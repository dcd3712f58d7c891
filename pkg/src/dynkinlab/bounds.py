"""Upper-bound functions, constant bookkeeping and empirical condition checks.

Two families of on-diagonal bound functions are provided:

* ``power``: ``F_t = c3 t**-a1 log(2 + 1/t)**a2 log(2 + t)**a3``;
* ``volume``: ``F_t(x, y) = c4 nu(B(x, Psi^-1(t)))**-1/2 nu(B(y, Psi^-1(t)))**-1/2``,
  with ``nu`` the reference measure of the model space.

:class:`ConstantLedger` tracks each constant of the localized and global
off-diagonal bounds and records where its value came from. A constant is
either a printed formula (``displayed``), derived here by bounding an
inequality chain at its worst case (``chain``), or supplied by the user
(``override``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import estimate as est
from .process import ProcessModel
from .scale import ScaleFunction, phi_eval, psi_eval, psi_inverse
from .space import Circle, ConfigError, Gasket, Line, OpenSetSpec

_DB_RTOL = 1e-12
INF_GRID_LEVEL = 10
PROV_DISPLAYED = "displayed"
PROV_CHAIN = "chain"
PROV_OVERRIDE = "override"


# ------------------------------------------------------------ bound functions


@dataclass(frozen=True)
class BoundFunction:
    """On-diagonal bound ``F_t(x, y)`` with declared doubling constants ``(c_F, alpha_F)``.

    Build instances with :meth:`power` or :meth:`volume`. The volume kind
    carries its space and scale function, because ``nu`` and ``Psi^-1``
    enter its values. ``t_max`` caps the time domain (``Psi(R)`` for the
    volume kind), and ``None`` means unbounded.
    """

    kind: str
    c_F: float
    alpha_F: float
    c3: float = 1.0
    alpha1: float = 0.5
    alpha2: float = 0.0
    alpha3: float = 0.0
    c4: float = 1.0
    space: object = None
    sf: ScaleFunction | None = None
    t_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("power", "volume"):
            raise ConfigError(f"unknown bound kind {self.kind!r}")
        if not (self.c_F > 0 and self.alpha_F > 0):
            raise ConfigError("c_F and alpha_F must be positive")
        if self.kind == "power" and not (self.c3 > 0 and self.alpha1 > 0):
            raise ConfigError("power bound needs c3 > 0 and alpha1 > 0")
        if self.kind == "volume" and (self.space is None or self.sf is None or not self.c4 > 0):
            raise ConfigError("volume bound needs a space, a scale function and c4 > 0")

    @classmethod
    def power(cls, c3: float, alpha1: float, alpha2: float = 0.0, alpha3: float = 0.0,
              c_F: float | None = None, alpha_F: float | None = None) -> BoundFunction:
        """Power-log family. Without log factors, ``c_F = 1`` and ``alpha_F = alpha1`` are exact."""
        if c_F is None or alpha_F is None:
            if alpha2 != 0 or alpha3 != 0:
                raise ConfigError("declare c_F and alpha_F when log factors are present")
            c_F, alpha_F = 1.0, alpha1
        return cls("power", c_F, alpha_F, c3=c3, alpha1=alpha1, alpha2=alpha2, alpha3=alpha3)

    @classmethod
    def volume(cls, c4: float, space, sf: ScaleFunction, c_vd: float | None = None,
               c_F: float | None = None, alpha_F: float | None = None,
               R: float | None = None) -> BoundFunction:
        """Volume family. ``(c_F, alpha_F)`` default to :func:`volume_db_constants` of ``c_vd``."""
        if c_F is None or alpha_F is None:
            if c_vd is None:
                raise ConfigError("give c_vd or explicit (c_F, alpha_F)")
            c_F, alpha_F = volume_db_constants(c_vd, sf)
        t_max = None if R is None or math.isinf(R) else float(psi_eval(sf, R))
        return cls("volume", c_F, alpha_F, c4=c4, space=space, sf=sf, t_max=t_max)

    def __call__(self, t, x=0.0, y=0.0):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0) or (self.t_max is not None and np.any(t > self.t_max * (1 + 1e-12))):
            raise ValueError("t outside the domain of F")
        if self.kind == "power":
            out = (self.c3 * t ** (-self.alpha1) * np.log(2.0 + 1.0 / t) ** self.alpha2
                   * np.log(2.0 + t) ** self.alpha3)
            out = np.broadcast_to(out, np.broadcast(t, np.asarray(x), np.asarray(y)).shape).copy()
        else:
            rho = psi_inverse(self.sf, t)
            vx = self.space.ball_measure(x, rho)
            vy = self.space.ball_measure(y, rho)
            out = self.c4 / np.sqrt(vx * vy)
        return float(out) if np.ndim(out) == 0 else out


def volume_db_constants(c_vd: float, sf: ScaleFunction) -> tuple[float, float]:
    """``(c_F, alpha_F)`` for the volume family from a doubling constant ``c_vd``.

    Covering ``B(x, Psi^-1(t))`` by ``B(z, 2 Psi^-1(T))`` and doubling
    ``log2`` times gives ``c_F = c_vd**2 c_psi**a`` with ``a = log2(c_vd)/beta1``,
    and ``alpha_F = a``.
    """
    if not c_vd >= 1:
        raise ConfigError("doubling constant must be >= 1")
    a = math.log2(c_vd) / sf.beta1
    return c_vd**2 * sf.c_psi**a, a


def _dist(space, x, y):
    return np.asarray(space.dist(x, y), dtype=float) if space is not None else np.abs(np.asarray(x) - np.asarray(y))


@dataclass
class DbReport:
    worst_ratio: float  # max over the grid of lhs / declared bound
    worst_at: tuple
    n_checked: int
    passed: bool

    def summary(self) -> str:
        return f"db_psi: worst ratio {self.worst_ratio:.6g} over {self.n_checked} pairs -> {'pass' if self.passed else 'fail'}"


def db_psi_verify(F: BoundFunction, sf: ScaleFunction, times, points, space=None) -> DbReport:
    """Check ``F_s(z,w)/F_t(x,y) <= c_F ((t v Psi(d(x,z)) v Psi(d(y,w)))/s)**alpha_F``.

    Every ``s <= t`` from ``times`` is paired with every quadruple
    ``(x, y, z, w)`` from ``points``. The report gives the largest ratio of
    left side to right side; the check passes when that ratio is at most
    ``1 + 1e-12``.
    """
    space = F.space if space is None else space
    T = np.asarray(sorted(set(float(v) for v in times)))
    P = np.asarray(points)
    ii, jj = np.nonzero(T[None, :] <= T[:, None])  # t = T[i], s = T[j]
    t, s = T[ii], T[jj]
    n = P.size
    ix, iy, iz, iw = (a.ravel() for a in np.meshgrid(*(np.arange(n),) * 4, indexing="ij"))
    x, y, z, w = P[ix], P[iy], P[iz], P[iw]
    Ft = F(t[:, None], x[None, :], y[None, :])
    Fs = F(s[:, None], z[None, :], w[None, :])
    dxz = psi_eval(sf, _dist(space, x, z))
    dyw = psi_eval(sf, _dist(space, y, w))
    top = np.maximum(np.maximum(t[:, None], dxz[None, :]), dyw[None, :])
    ratio = (Fs / Ft) / (F.c_F * (top / s[:, None]) ** F.alpha_F)
    k = int(np.argmax(ratio))
    a, b = np.unravel_index(k, ratio.shape)
    worst = float(ratio[a, b])
    at = (float(t[a]), float(s[a]), float(x[b]), float(y[b]), float(z[b]), float(w[b]))
    return DbReport(worst, at, int(ratio.size), worst <= 1.0 + _DB_RTOL)


def h_bound_eval(F: BoundFunction, sf: ScaleFunction, c1: float, c2: float, t, x, y, space=None):
    """``H_t(x, y) = F_t(x, y) exp(-c1 Phi(c2 d(x, y), t))``."""
    space = F.space if space is None else space
    d = _dist(space, x, y)
    val = F(t, x, y)
    if c1 == 0:
        return val
    out = val * np.exp(-c1 * phi_eval(sf, c2 * d, t))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- U x U infima


def _grid_points(space, U: OpenSetSpec) -> np.ndarray:
    if isinstance(space, Gasket):
        v = np.arange(space.n_vertices)
        return v[U.contains(space, v)]
    if U.kind == "whole":
        if isinstance(space, Circle):
            lo, hi = 0.0, space.length
        else:
            lo, hi = space.lo, space.hi
    else:
        lo, hi = U.bounds(space)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("U must be bounded")
    if isinstance(space, Line):
        lo, hi = max(lo, space.lo), min(hi, space.hi)
    return np.linspace(lo, hi, 2**INF_GRID_LEVEL + 1)


def inf_F(F: BoundFunction, space, U: OpenSetSpec, t: float) -> float:
    """``inf_{U x U} F_t`` by minimization over a grid of spacing ``2**-10 diam U``.

    The power kind does not depend on the points, so its value is exact.
    For the volume kind the minimum sits where ``nu(B(., Psi^-1(t)))`` is
    largest, and ball volumes are monotone between grid points.
    """
    if F.kind == "power":
        return float(F(t))
    g = _grid_points(space, U)
    vals = F(t, g[:, None], g[None, :])
    return float(np.min(vals))


# -------------------------------------------------------------- constant ledger

_NAMES = {
    "gamma_eps": "gamma_eps = eps gamma / 5",
    "c_eps_0": "large-time factor exp(Phi upper bound) on the near-diagonal region",
    "c_eps_1": "lower constant in the Phi estimate along shrinking radii",
    "c_eps_2": "2^{5 aF(b2-1)} (aF(b2-1)/(e c_eps_1))^{3 aF(b2-1)}",
    "cp_eps_displayed": "c^2 c_F c_eps_2 / (2^{aF/2} - 1)",
    "cp_eps": "max(cp_eps_displayed, c_eps_0)",
    "c_eps_3": "sup_{u>=1} u^aF exp(-A min_k (k3 u)^{1/(b_k-1)})",
    "c_eps_4": "lower constant in Phi(gamma_eps R, t/(n-1)) growth",
    "c_eps_5": "(3(b2-1)/(e c_eps_4))^{3(b2-1)}",
    "cpp_eps": "c cp_eps c_F c_eps_3 (2 c_eps_5 + 1)",
    "c_eps": "((cp_eps + cpp_eps) c_F 2^aF) v (cpp_eps c_F^2 2^{2 aF})",
    "gamma_p_delta": "delta gamma / 40",
    "K_global": "sup_{u>=1} u^aF exp(-A min_k (kK u)^{1/(b_k-1)})",
    "cpp_global": "cpp_{1/4} c_F c_psi^aF K_global",
    "c_global": "cpp_global v (c_{1/4} c_F c_psi^aF)",
}
_CHAIN_ONLY = ("c_eps_0", "c_eps_1", "c_eps_3", "c_eps_4", "K_global")
_INPUTS = ("c_psi", "beta1", "beta2", "c_F", "alpha_F", "c", "gamma")


@dataclass
class ConstantLedger:
    """Named constants with one provenance tag each."""

    inputs: dict
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        v = self.values.get(name)
        if v is None:
            raise KeyError(f"constant {name} is not available")
        return v

    def has(self, name: str) -> bool:
        v = self.values.get(name)
        return v is not None and math.isfinite(v)

    @property
    def complete(self) -> bool:
        return "eps" in self.inputs and self.has("c_eps") and self.has("gamma_eps") and not self.flags

    @property
    def global_complete(self) -> bool:
        return "delta" in self.inputs and self.has("c_global") and not self.flags

    def rows(self) -> list[list]:
        out = [[k, repr(float(v)), "input"] for k, v in self.inputs.items()]
        for k, v in self.values.items():
            out.append([k, "" if v is None else repr(float(v)), self.provenance.get(k, "")])
        return out

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "value", "provenance"])
        w.writerows(self.rows())


def _poly_exp_sup(alpha: float, A: float, kappa: float, q1: float, q2: float) -> float:
    """``sup_{u >= 1} u**alpha exp(-A min((kappa u)**q1, (kappa u)**q2))`` with ``q1 >= q2``.

    The minimum uses ``q1`` below ``kappa u = 1`` and ``q2`` above. Each
    branch is unimodal in ``log u``, so the supremum is found among the
    branch stationary points and the break points. A log grid is scanned
    as a cross-check.
    """
    def f(u):
        v = kappa * np.asarray(u, dtype=float)
        m = np.where(v < 1.0, v**q1, v**q2)
        return np.exp(alpha * np.log(u) - A * m)

    cands = [1.0, max(1.0, 1.0 / kappa)]
    for q, lo, hi in ((q1, 1.0, 1.0 / kappa), (q2, max(1.0, 1.0 / kappa), math.inf)):
        u_star = (alpha / (A * q)) ** (1.0 / q) / kappa
        if lo <= u_star <= hi:
            cands.append(u_star)
    best = float(np.max(f(np.asarray(cands))))
    grid = np.exp(np.linspace(0.0, math.log(max(1e3 * max(cands), 10.0)), 4001))
    return max(best, float(np.max(f(grid))))


def _check_inputs(inputs: dict) -> dict:
    missing = [k for k in _INPUTS if k not in inputs]
    if missing:
        raise ConfigError(f"constant inputs missing: {', '.join(missing)}")
    v = {k: float(inputs[k]) for k in inputs}
    bad = [k for k in _INPUTS if not (math.isfinite(v[k]) and v[k] > 0)]
    if bad:
        raise ConfigError(f"constant inputs must be positive and finite: {', '.join(bad)}")
    if not 1 < v["beta1"] <= v["beta2"]:
        raise ConfigError("need 1 < beta1 <= beta2")
    if v["c_psi"] < 1:
        raise ConfigError("c_psi must be >= 1")
    if "eps" in v and not 0 < v["eps"] < 1:
        raise ConfigError("eps must lie in (0, 1)")
    if "delta" in v and not 0 < v["delta"] <= 1:
        raise ConfigError("delta must lie in (0, 1]")
    return v


def derive_constants(inputs: dict, mode: str | dict = "chain", overrides: dict | None = None) -> ConstantLedger:
    """Fill a :class:`ConstantLedger` from ``c_psi, beta1, beta2, c_F, alpha_F, c, gamma``.

    Parameters
    ----------
    inputs
        The seven inputs above, plus ``eps`` in (0, 1) for the localized
        bound and/or ``delta`` in (0, 1] for the global one.
    mode
        ``"chain"`` derives the constants with no printed formula.
        ``"displayed"`` leaves them empty unless overridden, so the ledger
        stays incomplete. A dict is read as ``"displayed"`` plus that
        override map.
    overrides
        ``name -> value``. Every later constant is computed from the
        overridden value.
    """
    if isinstance(mode, dict):
        overrides = {**mode, **(overrides or {})}
        mode = "displayed"
    if mode not in ("chain", "displayed"):
        raise ConfigError("mode must be 'chain' or 'displayed'")
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(_NAMES)
    if unknown:
        raise ConfigError(f"unknown constants in overrides: {sorted(unknown)}")
    v = _check_inputs(inputs)
    led = ConstantLedger(inputs=dict(v))
    if "eps" in v:
        _fill_local(led, v, v["eps"], mode, overrides)
    if "delta" in v:
        sub = ConstantLedger(inputs={**v, "eps": 0.25})
        _fill_local(sub, {**v, "eps": 0.25}, 0.25, mode, {})
        for k in ("c_eps", "cpp_eps"):
            led.values[f"{k}@1/4"] = sub.values.get(k)
            led.provenance[f"{k}@1/4"] = sub.provenance.get(k, "")
        led.flags.extend(f"{f} (eps=1/4)" for f in sub.flags)
        _fill_global(led, v, mode, overrides)
    return led


def _setter(led: ConstantLedger, mode: str, overrides: dict):
    def put(name, prov, fn):
        if name in overrides:
            val, prov = float(overrides[name]), PROV_OVERRIDE
        elif prov == PROV_CHAIN and mode != "chain":
            val = None
        else:
            try:
                val = fn()
            except (TypeError, KeyError):
                val = None  # an upstream constant is missing
            except (OverflowError, ZeroDivisionError, ValueError):
                val = math.inf
        if val is not None and not math.isfinite(val):
            led.flags.append(f"{name} is not finite")
        led.values[name] = val
        led.provenance[name] = prov if val is not None else "missing"
        return val

    return put


def _fill_local(led, v, eps, mode, overrides):
    cps, b1, b2 = v["c_psi"], v["beta1"], v["beta2"]
    cF, aF, c, g = v["c_F"], v["alpha_F"], v["c"], v["gamma"]
    q1, q2 = 1.0 / (b1 - 1.0), 1.0 / (b2 - 1.0)
    A = (cps * 2.0**b1) ** (-q1)
    put = _setter(led, mode, overrides)
    val = led.values.get

    ge = put("gamma_eps", PROV_DISPLAYED, lambda: eps * g / 5.0)

    def c0():
        rho = g / (2.0 + 4.0 / eps)
        top = cps * max(rho**b1, rho**b2)
        return math.exp(cps**q1 * max(top**q1, top**q2))

    def c1():
        rho0 = g * (1.0 - 2.0 ** (-1.0 / (2.0 * b2))) / (2.0 + 4.0 / eps)
        kappa = min(1.0, rho0**b2) / cps
        return A * kappa**q1

    put("c_eps_0", PROV_CHAIN, c0)
    put("c_eps_1", PROV_CHAIN, c1)
    e2 = aF * (b2 - 1.0)
    put("c_eps_2", PROV_DISPLAYED, lambda: 2.0 ** (5 * e2) * (e2 / (math.e * val("c_eps_1"))) ** (3 * e2))
    put("cp_eps_displayed", PROV_DISPLAYED,
        lambda: c * c * cF * val("c_eps_2") / (2.0 ** (aF / 2.0) - 1.0))
    put("cp_eps", PROV_CHAIN, lambda: max(val("cp_eps_displayed"), val("c_eps_0")))
    put("c_eps_3", PROV_CHAIN,
        lambda: _poly_exp_sup(aF, A, min(1.0, (eps * ge / 2.0) ** b2) / cps, q1, q2))
    put("c_eps_4", PROV_CHAIN, lambda: A * (min(1.0, ge**b2) / cps) ** q1)
    put("c_eps_5", PROV_DISPLAYED,
        lambda: (3.0 * (b2 - 1.0) / (math.e * val("c_eps_4"))) ** (3.0 * (b2 - 1.0)))
    put("cpp_eps", PROV_DISPLAYED,
        lambda: c * val("cp_eps") * cF * val("c_eps_3") * (2.0 * val("c_eps_5") + 1.0))
    put("c_eps", PROV_DISPLAYED,
        lambda: max((val("cp_eps") + val("cpp_eps")) * cF * 2.0**aF,
                    val("cpp_eps") * cF**2 * 2.0 ** (2 * aF)))


def _fill_global(led, v, mode, overrides):
    cps, b1, b2 = v["c_psi"], v["beta1"], v["beta2"]
    cF, aF, g, d = v["c_F"], v["alpha_F"], v["gamma"], v["delta"]
    q1, q2 = 1.0 / (b1 - 1.0), 1.0 / (b2 - 1.0)
    A = (cps * 2.0**b1) ** (-q1)
    put = _setter(led, mode, overrides)
    val = led.values.get
    put("gamma_p_delta", PROV_DISPLAYED, lambda: d * g / 40.0)
    put("K_global", PROV_CHAIN, lambda: _poly_exp_sup(aF, A, min(1.0, (g / 40.0) ** b2) / cps, q1, q2))
    put("cpp_global", PROV_CHAIN, lambda: val("cpp_eps@1/4") * cF * cps**aF * val("K_global"))
    put("c_global", PROV_DISPLAYED,
        lambda: max(val("cpp_global"), val("c_eps@1/4") * cF * cps**aF))


# ------------------------------------------------------------- bound profiles


def _space_dist(space, x, y) -> float:
    return float(np.asarray(space.dist(x, y)))


def theorem52_rhs(ledger: ConstantLedger, F: BoundFunction, sf: ScaleFunction, R: float,
                  U: OpenSetSpec, space, t: float, x, y) -> float:
    """Localized off-diagonal bound at ``(t, x, y)`` for ``y`` in the ``eps R`` interior of ``U``.

    * ``t < Psi(R)`` and ``x`` in ``U``: ``c_eps F_t(x,y) exp(-Phi(gamma_eps d(x,y), t))``;
    * ``t < Psi(R)`` and ``x`` outside ``U``: ``c_eps inf F_{(2t) ^ Psi(R)} exp(-Phi(gamma_eps R, t))``;
    * ``t >= Psi(R)``: ``c_eps inf F_{Psi(R)}``.

    Infima over ``U x U`` come from :func:`inf_F`.
    """
    if not ledger.complete:
        raise ConfigError("ledger is incomplete: " + (", ".join(ledger.flags) or "c_eps missing"))
    eps = ledger.inputs["eps"]
    if not t > 0:
        raise ConfigError("t must be positive")
    if not float(np.asarray(U.dist_to_complement(space, np.asarray(y)))) > eps * R:
        raise ConfigError("y must lie in the eps R interior of U")
    c_eps, g_eps = ledger["c_eps"], ledger["gamma_eps"]
    psi_R = float(psi_eval(sf, R))
    if t >= psi_R:
        return c_eps * inf_F(F, space, U, psi_R)
    if bool(U.contains(space, np.asarray(x))):
        d = _space_dist(space, x, y)
        return c_eps * float(F(t, x, y)) * math.exp(-float(phi_eval(sf, g_eps * d, t)))
    return c_eps * inf_F(F, space, U, min(2.0 * t, psi_R)) * math.exp(-float(phi_eval(sf, g_eps * R, t)))


def theorem54_rhs(ledger: ConstantLedger, F: BoundFunction, sf: ScaleFunction, R: float,
                  space, t: float, x, y) -> float:
    """Global bound ``c' delta**(-beta2 alpha_F) F_t(x,y) exp(-Phi(gamma'_delta d, t))``.

    For ``t >= Psi(R)`` the factor becomes ``inf_{M x M} F_{Psi(R)}``.
    """
    if not ledger.global_complete:
        raise ConfigError("ledger has no complete global constants")
    d_ = ledger.inputs["delta"]
    pre = ledger["c_global"] * d_ ** (-ledger.inputs["beta2"] * ledger.inputs["alpha_F"])
    psi_R = math.inf if math.isinf(R) else float(psi_eval(sf, R))
    if t >= psi_R:
        return pre * inf_F(F, space, OpenSetSpec.whole(), psi_R)
    d = _space_dist(space, x, y)
    return pre * float(F(t, x, y)) * math.exp(-float(phi_eval(sf, ledger["gamma_p_delta"] * d, t)))


# ----------------------------------------------------------- exit-time chain

CHAIN_STEPS = ("2->3", "3->4", "4->5", "5->6", "6->7", "7->2", "1'->2")


def _need(inputs: dict, names: str) -> list[float]:
    out = []
    for n in names.split():
        if n not in inputs:
            raise ConfigError(f"missing input {n!r}")
        out.append(float(inputs[n]))
    return out


def _require(ok: bool, msg: str) -> None:
    if not ok:
        raise ConfigError(msg)


def exit_chain_constants(direction: str, inputs: dict) -> dict:
    """Constants of the implied exit-time condition for one implication step.

    Recognised ``direction`` values are listed in :data:`CHAIN_STEPS`.
    Inputs and outputs use the keys ``eps, delta, c, gamma, c_psi, beta1,
    beta2``. Every step checks the ranges of its inputs and names the
    violated range in the error.
    """
    if direction not in CHAIN_STEPS:
        raise ConfigError(f"unknown chain step {direction!r}; expected one of {CHAIN_STEPS}")
    if direction == "2->3":
        eps, delta = _need(inputs, "eps delta")
        _require(0 < eps < 1, "(2) needs eps in (0, 1)")
        _require(delta > 0, "(2) needs delta in (0, inf)")
        return {"eps": (1.0 - eps) * min(delta, 1.0)}
    if direction == "3->4":
        (eps,) = _need(inputs, "eps")
        delta = float(inputs.get("delta", 1.0))
        _require(eps > 0, "(3) needs eps in (0, inf)")
        _require(delta > 0, "(3)->(4) needs delta in (0, inf)")
        out = 1.0 - (eps / delta) * math.exp(-1.0 / delta)
        _require(0 < out < 1, "(3)->(4) result must lie in (0, 1); eps/delta exp(-1/delta) must be < 1")
        return {"eps": out, "delta": delta}
    if direction == "4->5":
        eps, delta, cps, b1 = _need(inputs, "eps delta c_psi beta1")
        _require(0 < eps < 1, "(4) needs eps in (0, 1)")
        _require(delta > 0, "(4) needs delta in (0, inf)")
        _require(cps >= 1 and b1 > 1, "scale constants need c_psi >= 1 and beta1 > 1")
        eta = min((delta / cps) ** (1.0 / b1), 1.0)
        gamma = eta * math.log(1.0 / eps)
        return {"eta": eta, "gamma": gamma, "c": max(1.0 / eps, math.exp(gamma / eta))}
    if direction == "5->6":
        c, gamma = _need(inputs, "c gamma")
        _require(c > 0 and gamma > 0, "(5) needs c, gamma in (0, inf)")
        return {"c": c, "gamma": gamma}
    if direction == "6->7":
        c, gamma, cps, b1, b2 = _need(inputs, "c gamma c_psi beta1 beta2")
        _require(c > 0 and gamma > 0, "(6) needs c, gamma in (0, inf)")
        _require(cps >= 1 and 1 < b1 <= b2, "scale constants need c_psi >= 1 and 1 < beta1 <= beta2")
        A = (cps * 2.0**b1) ** (-1.0 / (b1 - 1.0))
        g7 = A * (min(gamma**b2, 1.0) / cps) ** (1.0 / (b2 - 1.0))
        return {"c": max(c, math.exp(A)), "gamma": g7}
    if direction == "7->2":
        c, gamma, b2, eps = _need(inputs, "c gamma beta2 eps")
        _require(c > 0 and gamma > 0, "(7) needs c, gamma in (0, inf)")
        _require(0 < eps < min(c, 0.5), "(7)->(2) needs eps in (0, c ^ 1/2)")
        return {"eps": eps, "delta": (gamma / math.log(c / eps)) ** (b2 - 1.0)}
    # (1') -> (2), conservative processes only
    eps, delta, cps, b2 = _need(inputs, "eps delta c_psi beta2")
    _require(bool(inputs.get("conservative", False)), "(1')->(2) needs a conservative model")
    _require(0 < eps < 0.5, "(1') needs eps in (0, 1/2)")
    _require(delta > 0, "(1') needs delta in (0, inf)")
    return {"eps": 2.0 * eps, "delta": delta * 2.0 ** (-b2) / cps}


def compose_chain(steps, inputs: dict) -> list[dict]:
    """Apply chain steps in order. Each step's outputs are merged into the running inputs."""
    cur = dict(inputs)
    out = []
    for s in steps:
        res = exit_chain_constants(s, cur)
        cur.update(res)
        out.append({"step": s, **res})
    return out


def exit_bound(sf: ScaleFunction, c: float, gamma: float, r, t):
    """``c exp(-Phi(gamma r, t))``, the condition (6) bound."""
    out = c * np.exp(-phi_eval(sf, gamma * np.asarray(r, dtype=float), t))
    return float(out) if np.ndim(out) == 0 else out


def mean_exit_criterion(c_E: float, c_psi: float, beta2: float, sf: ScaleFunction, r: float,
                        witness: tuple[float, float] | None = None) -> tuple[float, float]:
    """Return ``(0.5 Psi(r)/c_E, 1 - 1/(c_E**2 c_psi 2**(beta2 + 1)))``.

    ``c_E`` must be at least 1, since the upper and lower mean-exit bounds
    contradict each other below 1. ``c_E = 1`` is allowed and corresponds to
    exact equality ``E[tau] = Psi(r)``. A ``witness = (mean, se)``, if
    given, must satisfy ``Psi(r)/c_E <= mean <= c_E Psi(r)`` within 3 SE.
    """
    if min(c_E, c_psi, beta2, r) <= 0:
        raise ConfigError("c_E, c_psi, beta2 and r must be positive")
    if c_E < 1:
        raise ConfigError("c_E must be >= 1: the two mean-exit bounds are incompatible below 1")
    psi_r = float(psi_eval(sf, r))
    if witness is not None:
        m, se = witness
        if not (psi_r / c_E - 3 * se <= m <= c_E * psi_r + 3 * se):
            raise ConfigError(f"mean exit witness {m} outside [{psi_r / c_E}, {c_E * psi_r}] +- 3 SE")
    return 0.5 * psi_r / c_E, 1.0 - 1.0 / (c_E**2 * c_psi * 2.0 ** (beta2 + 1.0))


# ----------------------------------------------------------- empirical checks


@dataclass
class ConditionReport:
    """Rows of one empirical condition check; ``passed`` when no row violates."""

    header: list
    rows: list = field(default_factory=list)
    passed: bool = True
    worst_slack: float = math.inf  # min over rows of bound + 3 se - estimate

    def add(self, row: list, slack: float) -> None:
        self.rows.append(row)
        self.worst_slack = min(self.worst_slack, slack)
        if slack < 0:
            self.passed = False

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _cell_integrals(F: BoundFunction, t: float, x: float, edges: np.ndarray) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(8)
    a, b = edges[:-1, None], edges[1:, None]
    y = 0.5 * (b - a) * nodes[None, :] + 0.5 * (a + b)
    vals = np.asarray(F(t, x, y)) * np.ones_like(y)
    return 0.5 * (b - a)[:, 0] * (vals @ weights)


def verify_du_condition(F: BoundFunction, model: ProcessModel, U: OpenSetSpec, R: float, sf: ScaleFunction,
                        samples, depth: int, n_paths: int, seed: int, dt: float,
                        bridge: bool = True, threads: int = 1) -> ConditionReport:
    """Compare ``P^U_t(x, A)`` with ``int_A F_t(x, y) dy`` over the finest dyadic cells of ``U``.

    ``samples`` holds ``(t, x)`` pairs, which need ``t < Psi(R)`` and ``x``
    in ``U``. Cell integrals use 8-point Gauss-Legendre quadrature. A cell
    violates the bound when its estimate exceeds the integral by more
    than 3 SE.
    """
    psi_R = float(psi_eval(sf, R))
    lo, hi = U.bounds(model.space)
    if isinstance(model.space, Line):
        lo, hi = max(lo, model.space.lo), min(hi, model.space.hi)
    rep = ConditionReport(["t", "x", "cell_left", "cell_right", "estimate", "se", "bound", "slack"])
    for t, x in samples:
        if not t < psi_R:
            raise ConfigError(f"t = {t} must be below Psi(R) = {psi_R}")
        if not bool(U.contains(model.space, np.asarray(x))):
            raise ConfigError(f"x = {x} must lie in U")
    for t, x in samples:
        ke = est.density_extract(model, x, t, U, (lo, hi), depth, n_paths, seed, dt, bridge, threads)
        edges = ke.hierarchy.edges(depth)
        m = ke.masses(depth)
        se = np.sqrt(m * (1.0 - m) / max(n_paths - 1, 1))
        bound = _cell_integrals(F, t, x, edges)
        slack = bound + 3.0 * se - m
        for j in range(m.size):
            rep.add([float(t), float(x), float(edges[j]), float(edges[j + 1]), float(m[j]), float(se[j]),
                     float(bound[j]), float(slack[j])], float(slack[j]))
    return rep


def verify_p_condition(model: ProcessModel, U: OpenSetSpec, R: float, sf: ScaleFunction, c: float,
                       gamma: float, samples, times, n_paths: int, seed: int, dt: float,
                       bridge: bool = True, threads: int = 1) -> ConditionReport:
    """Check ``P_x[tau_B(x,r) <= t] <= c exp(-Phi(gamma r, t))`` within 3 SE.

    ``samples`` holds ``(x, r)`` pairs with ``r < R`` and ``B(x, r)``
    inside ``U``. Every time in ``times`` is checked for each pair.
    """
    space = model.space
    for x, r in samples:
        if not 0 < r < R:
            raise ConfigError(f"radius {r} must lie in (0, R = {R})")
        gap = float(np.asarray(U.dist_to_complement(space, np.asarray(x))))
        if not gap >= r:
            raise ConfigError(f"B({x}, {r}) is not inside U")
    rep = ConditionReport(["x", "r", "t", "estimate", "se", "bound", "slack"])
    by_x: dict[float, list] = {}
    for x, r in samples:
        by_x.setdefault(x, []).append(r)
    for x, radii in by_x.items():
        grid = est.exit_prob_grid(model, x, radii, times, n_paths, seed, dt, bridge, threads)
        for r in radii:
            for t in sorted(times):
                e = grid[(r, t)]
                b = exit_bound(sf, c, gamma, r, t)
                slack = b + 3.0 * e.se - e.value
                rep.add([float(x), float(r), float(t), e.value, e.se, float(b), float(slack)], float(slack))
    return rep
