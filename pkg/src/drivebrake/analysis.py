"""Equilibria, thresholds and spreading-speed formulas.

Thresholds that have no closed form (b_bar1 here, the invariant-region
thresholds in ``regions``) are certified on sample grids. They are grid
dependent values, not mathematical infima.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import (
    FrequencyPair,
    Params,
    drive_only_rhs,
    gametes,
    growth,
    make_params,
    mean_fitness,
    reaction,
    theta_of,
    triangle_grid,
)

FD_STEP = 1e-6


class EquilibriumKind(str, enum.Enum):
    CORNER00 = "Corner00"
    CORNER10 = "Corner10"
    CORNER01 = "Corner01"
    THETA = "ThetaNode"
    INTERIOR = "Interior"


class Stability(str, enum.Enum):
    STABLE_NODE = "StableNode"
    SADDLE = "Saddle"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_SPIRAL = "UnstableSpiral"
    STABLE_SPIRAL = "StableSpiral"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Equilibrium:
    location: FrequencyPair
    kind: EquilibriumKind
    stability: Stability
    eigenvalues: Optional[tuple] = None


# -- bistable drive-only reaction ------------------------------------------


def bistable_integral(a: float, method: str = "closed") -> float:
    """Integral over [0, 1] of the drive-only reaction; its sign decides
    whether the drive invades (positive) or retreats (negative)."""
    if not 0.5 < a <= 1.0:
        raise ValueError(f"bistable integral needs 1/2 < a <= 1, got {a}")
    if method == "closed":
        if a == 1.0:
            return -0.5
        return math.sqrt(1 - a) / a**1.5 * math.atan(math.sqrt(a / (1 - a))) - 0.5 - (1 - a) / a
    if method == "quad":
        if a == 1.0:
            return quad(lambda u: -u, 0.0, 1.0)[0]
        p = make_params(a, 0.0)
        val, _ = quad(lambda u: drive_only_rhs(p, u), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
        return val
    raise ValueError(f"unknown method {method!r}")


def find_a0(tol: float = 1e-12) -> float:
    """Unique root of the bistable integral in (1/2, 1)."""
    return brentq(bistable_integral, 0.5 + 1e-9, 1.0, xtol=tol)


# -- stationary states ---------------------------------------------------


def jacobian(p: Params, s, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference Jacobian of (du, dv)."""
    u, v = float(s[0]), float(s[1])
    J = np.empty((2, 2))
    for j, (du, dv) in enumerate(((step, 0.0), (0.0, step))):
        fp = reaction(p, u + du, v + dv)
        fm = reaction(p, u - du, v - dv)
        J[0, j] = (fp.du - fm.du) / (2 * step)
        J[1, j] = (fp.dv - fm.dv) / (2 * step)
    return J


def classify_stability(J: np.ndarray, tol: float = 1e-9) -> Stability:
    tr, det = np.trace(J), np.linalg.det(J)
    disc = tr * tr - 4 * det
    if disc < 0:
        if tr > tol:
            return Stability.UNSTABLE_SPIRAL
        if tr < -tol:
            return Stability.STABLE_SPIRAL
        return Stability.UNDETERMINED
    lam = np.linalg.eigvals(J).real
    if np.all(lam < -tol):
        return Stability.STABLE_NODE
    if np.all(lam > tol):
        return Stability.UNSTABLE_NODE
    if lam.min() < -tol and lam.max() > tol:
        return Stability.SADDLE
    return Stability.UNDETERMINED


def theta_growth_rates(p: Params):
    """(d_u f1, f2) at (theta, 0): the two eigenvalue signs of the theta node."""
    th = theta_of(p.a)
    f1p = growth(p, th + FD_STEP, 0.0)[0]
    f1m = growth(p, th - FD_STEP, 0.0)[0]
    return (f1p - f1m) / (2 * FD_STEP), float(growth(p, th, 0.0)[1])


def boundary_equilibria(p: Params) -> List[Equilibrium]:
    out = [
        Equilibrium(
            FrequencyPair(0.0, 0.0),
            EquilibriumKind.CORNER00,
            Stability.STABLE_NODE if p.a > 0.5 else Stability.SADDLE,
        ),
        Equilibrium(FrequencyPair(1.0, 0.0), EquilibriumKind.CORNER10, Stability.SADDLE),
        Equilibrium(FrequencyPair(0.0, 1.0), EquilibriumKind.CORNER01, Stability.SADDLE),
    ]
    if p.a > 0.5:
        d1, f2 = theta_growth_rates(p)
        # unstable node whenever the brake can invade the drive-only threshold;
        # for large b the transverse rate turns negative and it is a saddle
        if d1 > 0 and f2 > 0:
            st = Stability.UNSTABLE_NODE
        elif d1 > 0 and f2 < 0:
            st = Stability.SADDLE
        else:
            st = Stability.UNDETERMINED
        out.append(Equilibrium(FrequencyPair(theta_of(p.a), 0.0), EquilibriumKind.THETA, st, (d1, f2)))
    return out


def theta_transverse_rate(a: float, b: float, h: float) -> float:
    """Closed form of f2(theta, 0) = (2(1-b)(2a-1) - h b (1-a)) / (1-a)."""
    return (2 * (1 - b) * (2 * a - 1) - h * b * (1 - a)) / (1 - a)


def _interior_residual(p, u, v):
    g1, g2 = gametes(p, u, v)
    return np.array([g1 - g2, g1 - mean_fitness(p, u, v)])


def _polish(p, u, v, iters=8):
    for _ in range(iters):
        r = _interior_residual(p, u, v)
        if np.max(np.abs(r)) < 1e-15:
            break
        J = np.empty((2, 2))
        for j, (du, dv) in enumerate(((FD_STEP, 0.0), (0.0, FD_STEP))):
            J[:, j] = (_interior_residual(p, u + du, v + dv) - _interior_residual(p, u - du, v - dv)) / (2 * FD_STEP)
        try:
            du, dv = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        u, v = u + du, v + dv
    return u, v


def interior_equilibria(p: Params, edge_tol: float = 1e-9) -> List[Equilibrium]:
    """Coexistence states: the line g1 = g2 intersected with the conic g1 = w."""
    # g1 - g2 is affine: recover its coefficients from three evaluations
    def lin(u, v):
        g1, g2 = gametes(p, u, v)
        return g1 - g2

    c0 = lin(0.0, 0.0)
    c1 = lin(1.0, 0.0) - c0
    c2 = lin(0.0, 1.0) - c0
    if abs(c1) < 1e-14 and abs(c2) < 1e-14:
        return []
    if abs(c2) >= abs(c1):
        point = lambda t: (t, -(c0 + c1 * t) / c2)  # noqa: E731
    else:
        point = lambda t: (-(c0 + c2 * t) / c1, t)  # noqa: E731

    def q(t):
        u, v = point(t)
        return gametes(p, u, v)[0] - mean_fitness(p, u, v)

    ts = np.array([0.0, 0.5, 1.0])
    coef = np.polyfit(ts, [q(t) for t in ts], 2)
    coef[np.abs(coef) < 1e-15] = 0.0
    if not np.any(coef):
        return []
    out = []
    for t in np.roots(coef):
        if abs(t.imag) > 1e-9:
            continue
        u, v = _polish(p, *point(t.real))
        if u > edge_tol and v > edge_tol and u + v < 1 - edge_tol:
            J = jacobian(p, (u, v))
            lam = tuple(complex(x) for x in np.linalg.eigvals(J))
            out.append(Equilibrium(FrequencyPair(float(u), float(v)), EquilibriumKind.INTERIOR, classify_stability(J), lam))
    return out


def equilibria(p: Params) -> List[Equilibrium]:
    return boundary_equilibria(p) + interior_equilibria(p)


def w_critical_point(p: Params) -> Optional[FrequencyPair]:
    """Critical point of the mean fitness, or None when a = b and h = 1."""
    a, b, h = p.a, p.b, p.h
    det = a * (a - b) + (1 - h) ** 2 * b**2
    if det == 0.0:
        return None
    pt = FrequencyPair(b * (1 - h) * (a - h * b) / det, a * (a - b) / det)
    if a >= b and pt.u > 0 and pt.v > 0 and pt.u + pt.v < 1:
        raise RuntimeError(f"critical point of w {pt} is interior although a >= b")
    return pt


# -- predator-prey structure ---------------------------------------------


class PredatorPreyMargin(NamedTuple):
    max_dv_f1: float  # must be < 0
    min_du_f2: float  # must be > 0
    b0_bounds_hold: Optional[bool]  # closed-form bounds, checked only when b = 0

    @property
    def holds(self) -> bool:
        return self.max_dv_f1 < 0 and self.min_du_f2 > 0


def dv_f01_closed_form(a, u, v):
    w0 = 1 + a * u * u - 2 * a * u + 2 * a * u * v
    return 2 / w0**2 * (-2 * a * (2 * a - 1) * u * u - (1 - a))


def pp_bound_constant(a: float) -> float:
    return min(1 - a, 4 * a * a - 3 * a + 1)


def predator_prey_margin(p: Params, grid_n: int = 60) -> PredatorPreyMargin:
    """Extremes over a lattice of T of d_v f1 and d_u f2 (central differences)."""
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    u, v = triangle_grid(grid_n)
    e = FD_STEP
    dv_f1 = (growth(p, u, v + e)[0] - growth(p, u, v - e)[0]) / (2 * e)
    du_f2 = (growth(p, u + e, v)[1] - growth(p, u - e, v)[1]) / (2 * e)
    b0 = None
    if p.b == 0.0:
        slack = 1e-6  # finite-difference error
        b0 = bool(
            np.all(dv_f1 <= -2 * pp_bound_constant(p.a) + slack)
            and np.all(du_f2 >= (1 - p.a) - slack)
        )
    return PredatorPreyMargin(float(dv_f1.max()), float(du_f2.min()), b0)


def estimate_b_bar1(a: float, h: float, tol: float = 1e-4, grid_n: int = 60) -> float:
    """Largest b in (0, 1] (to ``tol``) where both predator-prey signs hold on the grid."""

    def ok(b):
        return predator_prey_margin(make_params(a, b, h), grid_n).holds

    hi = 1.0 - 1e-9
    if ok(hi):
        return 1.0
    lo = 0.0
    if not ok(lo):
        raise RuntimeError(f"predator-prey signs fail already at b=0 for a={a}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


# -- spreading speeds ----------------------------------------------------


def c_brake_into_drive(a: float, b: float) -> float:
    """Linear speed of the brake invading the drive state (1, 0); nan if it cannot."""
    x = (1 + a - 2 * b) / (1 - a)
    return 2 * math.sqrt(x) if x > 0 else math.nan


def kpp_speed(a: float) -> float:
    if not 0 < a <= 0.25:
        return math.nan
    return 2 * math.sqrt(1 - 2 * a)


def alpha_double_root(a: float) -> float:
    return (1 - math.sqrt(a)) / (2 * math.sqrt(a))


def c_drive_upper(a: float) -> float:
    """Upper bound 2 sqrt(alpha) on the drive invasion speed."""
    if not 0 < a < 0.5:
        return math.nan
    return math.sqrt(2 * (1 - math.sqrt(a)) / math.sqrt(a))


def evasion_threshold(b: float, equal_cost: bool = False) -> float:
    """Drive cost a in (0, 1/2) at which the brake and the drive bound travel
    equally fast. With ``equal_cost`` the brake cost is tied to b = a."""
    lo, hi = 1e-6, 0.5 - 1e-6

    def gap(a):
        bb = a if equal_cost else b
        return c_brake_into_drive(a, bb) - c_drive_upper(a)

    glo, ghi = gap(lo), gap(hi)
    if not (np.isfinite(glo) and np.isfinite(ghi)) or glo * ghi > 0:
        return math.nan
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = gap(mid)
        if gm == 0 or hi - lo < 1e-15:
            return mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cooperative_boundary(a: float, u):
    """Curve splitting the a = b, h = 1 system into a cooperative part
    (below) and a predator-prey part (above)."""
    th = theta_of(a)
    u = np.asarray(u, dtype=float)
    disc = (2 - u) ** 2 + 4 * (u - th)
    if np.any(disc < 0):
        raise ValueError("cooperative boundary undefined: negative discriminant")
    out = 0.5 * (2 - u - np.sqrt(disc))
    return float(out) if out.ndim == 0 else out


# -- report ----------------------------------------------------------------


class A0Side(str, enum.Enum):
    BELOW = "Below"
    AT_ROOT = "AtRoot"
    ABOVE = "Above"


@dataclass
class RegimeReport:
    a: float
    b: float
    h: float
    theta: Optional[float]
    kpp_flag: bool
    bistable_integral: Optional[float]
    a0_side: A0Side
    c_drive_kpp: Optional[float]
    alpha: Optional[float]
    c_drive_upper: Optional[float]
    c_brake_into_drive: Optional[float]
    a1b: Optional[float]
    predator_prey_b_bar1: Optional[float]
    lemma_b_bar2: Optional[float]
    lemma_b_bar3: Optional[float]
    eta_bar: Optional[float]

    @staticmethod
    def _fmt(x) -> str:
        if x is None or (isinstance(x, float) and math.isnan(x)):
            return "undefined"
        if isinstance(x, enum.Enum):
            return x.value
        if isinstance(x, bool):
            return "true" if x else "false"
        if isinstance(x, float):
            return repr(x)
        return str(x)

    def items(self):
        return [(f.name, self._fmt(getattr(self, f.name))) for f in fields(self)]

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items())

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    def to_csv_row(self) -> str:
        return ",".join(v for _, v in self.items())


def _none_if_nan(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def speed_report(p: Params) -> dict:
    a, b = p.a, p.b
    return {
        "kpp_flag": a <= 0.25,
        "c_drive_kpp": _none_if_nan(kpp_speed(a)),
        "alpha": alpha_double_root(a) if 0.25 < a < 0.5 else None,
        "c_drive_upper": _none_if_nan(c_drive_upper(a)) if 0.25 < a < 0.5 else None,
        "c_brake_into_drive": _none_if_nan(c_brake_into_drive(a, b)),
        "a1b": _none_if_nan(evasion_threshold(b)),
    }


def regime_report(p: Params, certify: bool = True, grid_n: int = 60) -> RegimeReport:
    """Everything the analysis layer knows about one parameter triple.

    With ``certify`` the grid-certified thresholds are computed as well
    (this takes a few seconds).
    """
    from . import regions

    a0 = find_a0()
    th = p.theta
    if th is None:
        side = A0Side.BELOW
        integral = None
    else:
        integral = bistable_integral(p.a)
        side = A0Side.AT_ROOT if abs(p.a - a0) < 1e-9 else (A0Side.BELOW if p.a < a0 else A0Side.ABOVE)
    rep = RegimeReport(
        a=p.a, b=p.b, h=p.h, theta=th, bistable_integral=integral, a0_side=side,
        predator_prey_b_bar1=None, lemma_b_bar2=None, lemma_b_bar3=None, eta_bar=None,
        **speed_report(p),
    )
    if certify:
        rep.predator_prey_b_bar1 = estimate_b_bar1(p.a, p.h, grid_n=grid_n)
        if th is not None:
            rep.lemma_b_bar2 = regions.lemma1_sup_and_b_bar2(p.a, p.h).b_bar2
            rep.lemma_b_bar3 = regions.lemma2_b_bar3(p.a, p.h)
            rep.eta_bar = regions.lemma4_eta_bar(p)
    return rep
