"""Invariant convex regions of the reaction flow and the thresholds on b
and eta that make them invariant.

Each threshold is certified by dense sampling plus local refinement: the
returned value is the largest one for which the sampled inequality holds,
so it depends on the sample grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .model import (
    FrequencyPair,
    Params,
    Variant,
    decomposition_terms,
    make_params,
    nagylaki_growth_kernel,
    reaction,
    tanaka_growth_kernel,
    tanaka_kernel,
    theta_of,
)

MU_INF = 1e3  # stand-in for the vertical line mu = infinity


@dataclass(frozen=True)
class ConvexRegion:
    """Counterclockwise convex polygon inside T."""

    vertices: Tuple[FrequencyPair, ...]
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        verts = tuple(FrequencyPair(float(u), float(v)) for u, v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError("a region needs at least three vertices")
        if self.labels is not None and len(self.labels) != len(verts):
            raise ValueError("one label per edge")
        for u, v in verts:
            if u < -1e-12 or v < -1e-12 or u + v > 1 + 1e-12:
                raise ValueError(f"vertex ({u}, {v}) lies outside T")
        pts = np.array(verts)
        d1 = np.roll(pts, -1, axis=0) - pts
        d2 = np.roll(d1, -1, axis=0)
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(cross < -1e-12):
            raise ValueError("vertices must form a convex counterclockwise polygon")

    def edges(self):
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def contains(self, s, tol: float = 1e-12) -> bool:
        for (u0, v0), (u1, v1) in self.edges():
            if (u1 - u0) * (s[1] - v0) - (v1 - v0) * (s[0] - u0) < -tol:
                return False
        return True


def triangle_region() -> ConvexRegion:
    return ConvexRegion(((0, 0), (1, 0), (0, 1)), ("v=0", "u+v=1", "u=0"))


def clip_halfplane(poly, nx, ny, c, eps=1e-14):
    """Keep the part of a convex polygon where nx*u + ny*v >= c."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp = nx * p[0] + ny * p[1] - c
        fq = nx * q[0] + ny * q[1] - c
        if fp >= -eps:
            out.append(p)
        if (fp > eps and fq < -eps) or (fp < -eps and fq > eps):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    dedup = []
    for pt in out:
        if not dedup or math.dist(pt, dedup[-1]) > 1e-13:
            dedup.append(pt)
    if len(dedup) > 1 and math.dist(dedup[0], dedup[-1]) <= 1e-13:
        dedup.pop()
    return dedup


def c_mu_region(theta: float, mu: float, eta: float) -> ConvexRegion:
    """T cut by v >= mu (u - theta) and v >= min(1, mu/2) (u - theta + eta)."""
    m = min(1.0, mu / 2)
    poly = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    poly = clip_halfplane(poly, -mu, 1.0, -mu * theta)
    poly = clip_halfplane(poly, -m, 1.0, -m * (theta - eta))
    return ConvexRegion(tuple(poly))


def lemma4_intersection(theta: float, mu: float, eta: float) -> float:
    """u-coordinate where the two cutting lines of C_mu meet."""
    return theta + eta if mu <= 2 else theta + eta / (mu - 1)


def weinberger_flux_check(region: ConvexRegion, p: Params, samples_per_edge: int = 200) -> float:
    """Largest outward unit-normal component of the reaction on the boundary."""
    worst = -math.inf
    t = np.linspace(0.0, 1.0, samples_per_edge)
    for (u0, v0), (u1, v1) in region.edges():
        du, dv = u1 - u0, v1 - v0
        length = math.hypot(du, dv)
        if length == 0:
            continue
        nx, ny = dv / length, -du / length
        u = u0 + t * du
        v = v0 + t * dv
        # snap samples on the faces of T so that the vanishing factor is exact
        if u0 == 0.0 and u1 == 0.0:
            u = np.zeros_like(u)
        if v0 == 0.0 and v1 == 0.0:
            v = np.zeros_like(v)
        if u0 + v0 == 1.0 and u1 + v1 == 1.0:
            # on u + v = 1 the normal component is -(d/dt)(1 - u - v) / sqrt 2,
            # written with its vanishing wild-type factor
            v = 1.0 - u
            flux = -(1.0 - u - v) * _wild_type_rate(p, u, v) / math.sqrt(2.0)
        else:
            r = reaction(p, u, v)
            flux = nx * r.du + ny * r.dv
        worst = max(worst, float(np.max(flux)))
    return worst


def _wild_type_rate(p: Params, u, v):
    if p.variant is Variant.NAGYLAKI:
        return nagylaki_growth_kernel(p.a, p.b, p.h, p.w_oo, u, v)[2]
    return tanaka_growth_kernel(p.a, p.b, p.h, u, v)[2]


# -- threshold on b from the region u >= theta -----------------------------


class Lemma1Result(NamedTuple):
    sup: float
    b_bar2: float
    argmax: Tuple[float, float]  # (mu, u)


def lemma1_ratio(a: float, h: float, mu, u):
    """(mu r1 - r2) / (u (1 + a + 2 a mu)) on the line v = mu (u - theta)."""
    th = theta_of(a)
    v = mu * (u - th)
    _, _, (r1, r2) = decomposition_terms(make_params(a, 0.0, h), u, v)
    return (mu * r1 - r2) / (u * (1 + a + 2 * a * mu))


def _mu_of(th, u, s):
    # s in [0, 1] sweeps the admissible slopes, reaching mu -> infinity at u = theta
    phi_max = np.arctan2(1 - u, u - th)
    phi = np.minimum(s * phi_max, np.pi / 2 - 1e-9)
    return np.tan(phi)


def lemma1_sup_and_b_bar2(a: float, h: float, n: int = 100, refine: int = 5) -> Lemma1Result:
    th = theta_of(a)
    uu, ss = np.meshgrid(np.linspace(th, 1.0, n), np.linspace(0.0, 1.0, n), indexing="ij")
    q = lemma1_ratio(a, h, _mu_of(th, uu, ss), uu)
    flat = np.argsort(q, axis=None)[::-1][:refine]

    def neg(x):
        return -float(lemma1_ratio(a, h, _mu_of(th, x[0], x[1]), x[0]))

    best_val, best_x = float(q.max()), (float(uu.flat[flat[0]]), float(ss.flat[flat[0]]))
    for k in flat:
        res = minimize(neg, [uu.flat[k], ss.flat[k]], method="L-BFGS-B", bounds=[(th, 1.0), (0.0, 1.0)])
        if -res.fun > best_val:
            best_val, best_x = -res.fun, tuple(res.x)
    if not math.isfinite(best_val):
        raise ArithmeticError(f"non-finite supremum for a={a}, h={h}")
    mu = float(_mu_of(th, best_x[0], best_x[1]))
    return Lemma1Result(best_val, min(1.0, 1.0 / best_val), (mu, float(best_x[0])))


def lemma1_violation(p: Params, samples: int = 10_000, seed: int = 0) -> float:
    """Max over sampled (mu, u) of the contraction dot product, which must be <= 0."""
    th = theta_of(p.a)
    rng = np.random.default_rng(seed)
    u = th + (1 - th) * rng.random(samples)
    mu = _mu_of(th, u, rng.random(samples))
    v = np.minimum(mu * (u - th), 1 - u)
    r = reaction(p, u, v)
    return float(np.max(mu * r.du - r.dv))


# -- threshold on b along the segment u = theta ----------------------------


def lemma2_b_bar3(a: float, h: float, samples: int = 10_000, tol: float = 1e-10) -> float:
    """Largest b keeping du <= 0 along {theta} x [0, 1 - theta] (bisection)."""
    th = theta_of(a)
    v = np.linspace(0.0, 1 - th, samples + 1)[1:]

    def ok(b):
        du, _ = tanaka_kernel(a, b, h, th, v)
        return bool(np.all(du <= 0.0))

    hi = 1.0 - 1e-12
    if ok(hi):
        return 1.0
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def b_bar3_closed_form(a: float, h: float) -> float:
    th = theta_of(a)
    return min(1.0, 2 * a / max(2 * th + 2 * h * (1 - th), 1 + th))


# -- the region u < theta above a steep line -------------------------------


def lemma3_check(p: Params, samples: int = 10_000, seed: int = 0) -> float:
    """Minimum sampled dot product for slopes mu <= -(1 + a) / (2a); must be >= 0."""
    th = theta_of(p.a)
    mu0 = (1 + p.a) / (2 * p.a)
    rng = np.random.default_rng(seed)
    u = th * rng.random(samples)
    u[:2] = (0.0, th)
    lo = np.arctan(mu0)
    hi = np.arctan2(1 - u, th - u)
    phi = np.minimum(lo + (hi - lo) * rng.random(samples), np.pi / 2 - 1e-9)
    mu = -np.tan(phi)
    v = np.minimum(mu * (u - th), 1 - u)
    r = reaction(p, u, v)
    return float(np.min(mu * r.du - r.dv))


# -- neighbourhood of (theta, 0) -------------------------------------------


def lemma4_violation(p: Params, eta: float, n_u: int = 201, n_mu: int = 60) -> float:
    """Max over u in [theta-eta, theta+eta] and mu on a log grid of the
    dot product along v = m (u - theta + eta), m = min(1, mu/2)."""
    th = theta_of(p.a)
    m = np.minimum(1.0, np.logspace(-6, 3, n_mu) / 2)[:, None]
    u = np.linspace(th - eta, th + eta, n_u)[None, :]
    v = m * (u - th + eta)
    r = reaction(p, u, v)
    return float(np.max(m * r.du - r.dv))


def lemma4_eta_bar(p: Params, tol: float = 1e-7) -> float:
    th = theta_of(p.a)
    cap = (1 - th) / 4

    def ok(eta):
        return lemma4_violation(p, eta) <= 0.0

    hi = cap * (1 - 1e-6)
    if ok(hi):
        return hi
    lo = 0.0
    while hi - lo > tol * cap:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    if lo == 0.0:
        raise RuntimeError(f"no admissible eta found for {p}")
    return lo


def c_mu_family_flux(p: Params, eta: float, mus: Sequence[float] = (0.5, 1.0, 2.0, MU_INF), samples_per_edge: int = 400):
    """Flux check of every C_mu in ``mus``; returns {mu: max outward flux}."""
    th = theta_of(p.a)
    return {mu: weinberger_flux_check(c_mu_region(th, mu, eta), p, samples_per_edge) for mu in mus}
