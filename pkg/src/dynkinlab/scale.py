"""Space-time scale functions and the transform ``Phi(R, t) = sup_r {R/r - t/Psi(r)}``.

A :class:`ScaleFunction` is a homeomorphism ``Psi`` of ``[0, inf)`` with
declared constants ``(c_psi, beta1, beta2)``, ``1 < beta1 <= beta2``, such that

    c_psi**-1 (R/r)**beta1 <= Psi(R)/Psi(r) <= c_psi (R/r)**beta2,   r <= R.

Construction verifies the declaration on a log grid and rejects functions
that fail it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .space import ConfigError

KINDS = ("power", "piecewise", "tabulated")

_GRID_POINTS = 256
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_CLAMP = 1e-15
_REL_TOL = 1e-12


@dataclass(frozen=True)
class ScaleFunction:
    """Scale function ``Psi`` with its doubling constants.

    Parameters
    ----------
    kind
        ``"power"`` (``Psi(r) = r**beta``), ``"piecewise"`` (continuous, with
        local exponent ``exponents[i]`` between consecutive ``breakpoints``)
        or ``"tabulated"`` (monotone cubic interpolation of ``log Psi``
        against ``log r``, power-law extrapolation with ``beta1`` below and
        ``beta2`` above the table).
    c_psi, beta1, beta2
        Declared constants; defaults are inferred for power and piecewise
        kinds.
    """

    kind: str
    beta: float = 2.0
    breakpoints: tuple[float, ...] = ()
    exponents: tuple[float, ...] = ()
    table_r: tuple[float, ...] = ()
    table_psi: tuple[float, ...] = ()
    c_psi: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    validate: bool = True
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scale kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "power":
            if not self.beta > 1:
                raise ConfigError("power scale needs beta > 1")
            b1, b2 = self.beta, self.beta
        elif self.kind == "piecewise":
            if len(self.exponents) != len(self.breakpoints) + 1:
                raise ConfigError("piecewise scale needs len(exponents) == len(breakpoints) + 1")
            if any(b <= 0 for b in self.breakpoints) or list(self.breakpoints) != sorted(self.breakpoints):
                raise ConfigError("breakpoints must be positive and increasing")
            if min(self.exponents) <= 1:
                raise ConfigError("piecewise exponents must exceed 1")
            b1, b2 = min(self.exponents), max(self.exponents)
        else:
            r = np.asarray(self.table_r, dtype=float)
            p = np.asarray(self.table_psi, dtype=float)
            if r.size < 2 or r.shape != p.shape:
                raise ConfigError("tabulated scale needs matching tables of length >= 2")
            if np.any(r <= 0) or np.any(np.diff(r) <= 0) or np.any(p <= 0) or np.any(np.diff(p) <= 0):
                raise ConfigError("tabulated scale must be positive and strictly increasing")
            if self.beta1 is None or self.beta2 is None:
                raise ConfigError("tabulated scale needs declared beta1 and beta2")
            b1, b2 = self.beta1, self.beta2
            object.__setattr__(self, "_interp", PchipInterpolator(np.log(r), np.log(p)))
        object.__setattr__(self, "beta1", float(b1 if self.beta1 is None else self.beta1))
        object.__setattr__(self, "beta2", float(b2 if self.beta2 is None else self.beta2))
        object.__setattr__(self, "c_psi", float(1.0 if self.c_psi is None else self.c_psi))
        if not (1 < self.beta1 <= self.beta2) or self.c_psi < 1:
            raise ConfigError("declared constants need 1 < beta1 <= beta2 and c_psi >= 1")
        if self.validate:
            report = psi_doubling_verify(self, default_pairs(self))
            if not report.passed:
                raise ConfigError(
                    f"declared (c_psi, beta1, beta2) do not bound Psi: {report.summary()}"
                )

    # ---------------------------------------------------------- factories

    @classmethod
    def power(cls, beta: float, **kw) -> ScaleFunction:
        return cls("power", beta=float(beta), **kw)

    @classmethod
    def piecewise(cls, breakpoints, exponents, **kw) -> ScaleFunction:
        return cls(
            "piecewise",
            breakpoints=tuple(float(b) for b in breakpoints),
            exponents=tuple(float(e) for e in exponents),
            **kw,
        )

    @classmethod
    def tabulated(cls, r, psi, beta1: float, beta2: float, c_psi: float = 1.0, **kw) -> ScaleFunction:
        return cls(
            "tabulated",
            table_r=tuple(float(v) for v in r),
            table_psi=tuple(float(v) for v in psi),
            beta1=beta1,
            beta2=beta2,
            c_psi=c_psi,
            **kw,
        )

    # ---------------------------------------------------------- evaluation

    def _log_psi(self, s: np.ndarray) -> np.ndarray:
        """``log Psi(exp(s))`` for finite ``s``."""
        if self.kind == "power":
            return self.beta * s
        if self.kind == "piecewise":
            out = self.exponents[0] * s
            lb_prev = None
            acc = 0.0
            for b, e_left, e_right in zip(self.breakpoints, self.exponents[:-1], self.exponents[1:]):
                lb = math.log(b)
                acc = e_left * lb if lb_prev is None else acc + e_left * (lb - lb_prev)
                out = np.where(s > lb, acc + e_right * (s - lb), out)
                lb_prev = lb
            return out
        lr = np.log(np.asarray(self.table_r))
        lp = np.log(np.asarray(self.table_psi))
        mid = self._interp(np.clip(s, lr[0], lr[-1]))
        below = lp[0] + self.beta1 * (s - lr[0])
        above = lp[-1] + self.beta2 * (s - lr[-1])
        return np.where(s < lr[0], below, np.where(s > lr[-1], above, mid))

    def __call__(self, r):
        return psi_eval(self, r)

    def inverse(self, t):
        return psi_inverse(self, t)


def psi_eval(sf: ScaleFunction, r):
    """``Psi(r)``, vectorized; ``Psi(0) = 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("Psi is defined for r >= 0 only")
    if sf.kind == "power":
        out = r**sf.beta
    else:
        with np.errstate(divide="ignore"):
            s = np.log(np.where(r > 0, r, 1.0))
        out = np.where(r > 0, np.exp(sf._log_psi(s)), 0.0)
        out = np.where(np.isinf(r), math.inf, out)
    return float(out) if out.ndim == 0 else out


def psi_inverse(sf: ScaleFunction, t):
    """``Psi^{-1}(t)``, vectorized."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("Psi^{-1} is defined for t >= 0 only")
    if sf.kind == "power":
        out = t ** (1.0 / sf.beta)
    elif sf.kind == "piecewise":
        out = np.zeros_like(t)
        pos = t > 0
        lt = np.log(np.where(pos, t, 1.0))
        s = lt / sf.exponents[0]
        lb_prev = None
        acc = 0.0
        for b, e_left, e_right in zip(sf.breakpoints, sf.exponents[:-1], sf.exponents[1:]):
            lb = math.log(b)
            acc = e_left * lb if lb_prev is None else acc + e_left * (lb - lb_prev)
            s = np.where(lt > acc, lb + (lt - acc) / e_right, s)
            lb_prev = lb
        out = np.where(pos, np.exp(s), 0.0)
    else:
        flat = t.ravel()
        res = np.zeros_like(flat)
        lr = np.log(np.asarray(sf.table_r))
        for i, v in enumerate(flat):
            if v == 0:
                continue
            lv = math.log(v)
            lo, hi = lr[0], lr[-1]
            while sf._log_psi(np.array(lo)) > lv:
                lo -= 10.0
            while sf._log_psi(np.array(hi)) < lv:
                hi += 10.0
            s = brentq(lambda u: float(sf._log_psi(np.array(u))) - lv, lo, hi, xtol=1e-300, rtol=1e-15)
            res[i] = math.exp(s)
        out = res.reshape(t.shape)
    out = np.where(np.isinf(t), math.inf, out)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------ doubling check


@dataclass
class DoublingCheck:
    passed: bool
    min_lower_ratio: float  # min of (Psi(R)/Psi(r)) / (R/r)**beta1; must be >= 1/c_psi
    max_upper_ratio: float  # max of (Psi(R)/Psi(r)) / (R/r)**beta2; must be <= c_psi
    worst_ratio: float  # max(c_psi * ... ) style worst normalized ratio
    n_violations: int

    def summary(self) -> str:
        return (
            f"min lower ratio {self.min_lower_ratio:.6g}, max upper ratio "
            f"{self.max_upper_ratio:.6g}, {self.n_violations} violations"
        )


def default_pairs(sf: ScaleFunction, n: int = 40) -> np.ndarray:
    pts = np.logspace(-4, 4, n)
    if sf.kind == "piecewise":
        pts = np.union1d(pts, np.asarray(sf.breakpoints))
    if sf.kind == "tabulated":
        pts = np.union1d(pts, np.asarray(sf.table_r))
    r, R = np.meshgrid(pts, pts, indexing="ij")
    keep = r <= R
    return np.column_stack([r[keep], R[keep]])


def psi_doubling_verify(sf: ScaleFunction, pairs) -> DoublingCheck:
    """Check ``c^-1 (R/r)^b1 <= Psi(R)/Psi(r) <= c (R/r)^b2`` on ``pairs`` of ``(r, R)``."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    r, R = pairs[:, 0], pairs[:, 1]
    if np.any(r <= 0) or np.any(r > R):
        raise ValueError("pairs must satisfy 0 < r <= R")
    # work in logs to stay finite over wide grids
    with np.errstate(divide="ignore"):
        lr, lR = np.log(r), np.log(R)
    lratio = sf._log_psi(lR) - sf._log_psi(lr)
    lower = lratio - sf.beta1 * (lR - lr)
    upper = lratio - sf.beta2 * (lR - lr)
    lc = math.log(sf.c_psi)
    tol = 1e-12 * np.maximum(1.0, np.abs(lratio))
    bad = (lower < -lc - tol) | (upper > lc + tol)
    return DoublingCheck(
        passed=not bad.any(),
        min_lower_ratio=float(np.exp(lower.min())),
        max_upper_ratio=float(np.exp(upper.max())),
        worst_ratio=float(np.exp(max(-lower.min(), upper.max()))),
        n_violations=int(bad.sum()),
    )


# ------------------------------------------------------------------ Phi


def phi_power_closed_form(beta: float, R, t):
    """``beta**(-beta/(beta-1)) (beta-1) (R**beta/t)**(1/(beta-1))``."""
    if not beta > 1:
        raise ValueError("closed form needs beta > 1")
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    out = beta ** (-beta / (beta - 1.0)) * (beta - 1.0) * (R**beta / t) ** (1.0 / (beta - 1.0))
    return float(out) if out.ndim == 0 else out


def _objective(sf: ScaleFunction, R, t, s):
    # R e^{-s} - t / Psi(e^s), evaluated in logs for range safety
    return R * np.exp(-s) - t * np.exp(-sf._log_psi(s))


def phi_eval(sf: ScaleFunction, R, t):
    """``Phi(R, t) = sup_{r > 0} {R/r - t/Psi(r)}`` computed numerically.

    The supremum is taken over ``s = log r``. A 256-point grid is laid over
    ``[Psi^{-1}(t)/1e3, 1e3 max(R, Psi^{-1}(t))]``. If the best grid point
    sits on an edge, the window is slid in that direction until the best
    point is interior. Each of the three best grid points is then refined by
    golden-section search on its neighbouring bracket. Values below 1e-15
    are returned as 0.
    """
    R_arr, t_arr = np.broadcast_arrays(np.asarray(R, dtype=float), np.asarray(t, dtype=float))
    if np.any(t_arr <= 0) or np.any(~np.isfinite(t_arr)):
        raise ValueError("t must be positive and finite")
    if np.any(R_arr < 0):
        raise ValueError("R must be nonnegative")
    shape = R_arr.shape
    Rf = R_arr.ravel().copy()
    tf = t_arr.ravel().copy()
    out = np.zeros_like(Rf)
    act = np.nonzero(Rf > 0)[0]
    if act.size:
        out[act] = _phi_positive(sf, Rf[act], tf[act])
    out[out < _CLAMP] = 0.0
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def _phi_positive(sf: ScaleFunction, R: np.ndarray, t: np.ndarray) -> np.ndarray:
    m = _GRID_POINTS
    rt = np.asarray(psi_inverse(sf, t), dtype=float).reshape(R.shape)
    s_lo = np.log(rt / 1e3)
    s_hi = np.log(1e3 * np.maximum(R, rt))
    u = np.linspace(0.0, 1.0, m)
    s = s_lo[:, None] + (s_hi - s_lo)[:, None] * u[None, :]
    Rc, tc = R[:, None], t[:, None]
    g = _objective(sf, Rc, tc, s)
    best = np.argmax(g, axis=1)
    # slide the window when the maximum lies on its edge
    for _ in range(200):
        edge = np.nonzero((best == 0) | (best == m - 1))[0]
        if edge.size == 0:
            break
        width = (s[edge, -1] - s[edge, 0])[:, None]
        shift = np.where(best[edge] == 0, -0.9, 0.9)[:, None] * width
        s_new = s[edge] + shift
        g_new = _objective(sf, Rc[edge], tc[edge], s_new)
        b_new = np.argmax(g_new, axis=1)
        improved = g_new[np.arange(edge.size), b_new] > g[edge, best[edge]]
        stuck = ~improved & ((b_new == 0) | (b_new == m - 1))
        s[edge] = np.where(improved[:, None], s_new, s[edge])
        g[edge] = np.where(improved[:, None], g_new, g[edge])
        best[edge] = np.where(improved, b_new, best[edge])
        # a non-improving slide means the edge value is the best available
        best[edge[stuck]] = np.clip(best[edge[stuck]], 1, m - 2)
    n = R.size
    k = 3
    order = np.argsort(-g, axis=1)[:, :k]
    idx = np.clip(order, 1, m - 2)
    rows = np.arange(n)[:, None]
    a = s[rows, idx - 1]
    b = s[rows, idx + 1]
    Rk = np.broadcast_to(Rc, a.shape)
    tk = np.broadcast_to(tc, a.shape)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _objective(sf, Rk, tk, c)
    fd = _objective(sf, Rk, tk, d)
    for _ in range(80):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        probe = np.where(left, c_new, d_new)
        fp = _objective(sf, Rk, tk, probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_new, d_new
        if np.all(b - a < 1e-12 * np.maximum(1.0, np.abs(a))):
            break
    refined = np.maximum(np.maximum(fc, fd), _objective(sf, Rk, tk, 0.5 * (a + b)))
    return np.maximum(refined.max(axis=1), g.max(axis=1))


# --------------------------------------------------------- sandwich check


@dataclass
class SandwichReport:
    passed: bool
    n_points: int
    lower_violations: int
    upper_violations: int
    homogeneity_violations: int
    min_lower_slack: float  # min of Phi / lower bound
    min_upper_slack: float  # min of upper bound / Phi
    min_homogeneity_slack: float  # min of Phi(aR, t) / (a Phi(R, t))

    def summary(self) -> str:
        return (
            f"{self.n_points} points: lower {self.lower_violations}, upper "
            f"{self.upper_violations}, homogeneity {self.homogeneity_violations} violations"
        )


def phi_sandwich_bounds(sf: ScaleFunction, R, t) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds of Phi in terms of ``Psi(R)/t``."""
    b1, b2, c = sf.beta1, sf.beta2, sf.c_psi
    x = np.asarray(psi_eval(sf, R), dtype=float) / np.asarray(t, dtype=float)
    p1 = x ** (1.0 / (b1 - 1.0))
    p2 = x ** (1.0 / (b2 - 1.0))
    A = (c * 2.0**b1) ** (-1.0 / (b1 - 1.0))
    lower = A * np.minimum(p1, p2)
    upper = c ** (1.0 / (b1 - 1.0)) * np.maximum(p1, p2)
    return lower, upper


def phi_sandwich_check(sf: ScaleFunction, R, t, scales=(1.0, 2.0, 5.0, 10.0), rtol: float = _REL_TOL) -> SandwichReport:
    """Check the two-sided bound and ``a Phi(R, t) <= Phi(aR, t)`` on the grid ``R x t``.

    Inequalities are tested with relative tolerance ``rtol`` because the
    lower bound is attained exactly for quadratic ``Psi``.
    """
    Rg, tg = np.meshgrid(np.asarray(R, dtype=float), np.asarray(t, dtype=float), indexing="ij")
    phi = np.asarray(phi_eval(sf, Rg, tg))
    lower, upper = phi_sandwich_bounds(sf, Rg, tg)
    lo_bad = phi < lower * (1.0 - rtol)
    up_bad = phi > upper * (1.0 + rtol)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo_slack = np.where(lower > 0, phi / lower, np.inf)
        up_slack = np.where(phi > 0, upper / phi, np.inf)
    hom_bad = 0
    hom_slack = math.inf
    for a in scales:
        if a < 1:
            raise ValueError("homogeneity holds for a >= 1")
        phia = np.asarray(phi_eval(sf, a * Rg, tg))
        hom_bad += int(np.sum(a * phi > phia * (1.0 + rtol)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(phi > 0, phia / (a * phi), np.inf)
        hom_slack = min(hom_slack, float(ratio.min()))
    return SandwichReport(
        passed=not (lo_bad.any() or up_bad.any() or hom_bad),
        n_points=int(phi.size),
        lower_violations=int(lo_bad.sum()),
        upper_violations=int(up_bad.sum()),
        homogeneity_violations=hom_bad,
        min_lower_slack=float(lo_slack.min()),
        min_upper_slack=float(up_slack.min()),
        min_homogeneity_slack=hom_slack,
    )
