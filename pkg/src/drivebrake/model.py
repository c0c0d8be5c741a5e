"""Reaction terms of the drive/brake allele-frequency system.

Every function here is a pure evaluation on the closed triangle
``T = {u >= 0, v >= 0, u + v <= 1}`` and accepts either Python floats or
numpy arrays (broadcast together). Inputs are never clamped to ``T``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


class Variant(str, enum.Enum):
    TANAKA = "Tanaka"
    NAGYLAKI = "Nagylaki"


class ParameterWarning(UserWarning):
    """Parameters outside the biologically motivated range (b > a)."""


@dataclass(frozen=True)
class Params:
    """Fitness costs of drive (``a``) and brake (``b``), brake dominance ``h``.

    ``w_oo`` is the constant wild-type fitness, only used by the Nagylaki
    variant. ``b > a`` is accepted but flagged by ``brake_costlier``.
    """

    a: float
    b: float
    h: float = 0.5
    variant: Variant = Variant.TANAKA
    w_oo: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if not 0.0 <= self.b < 1.0:
            raise ValueError(f"b must lie in [0, 1), got {self.b}")
        if not 0.0 <= self.h <= 1.0:
            raise ValueError(f"h must lie in [0, 1], got {self.h}")
        if self.variant is Variant.NAGYLAKI:
            if self.w_oo is None or not self.w_oo > 0.0:
                raise ValueError("Nagylaki variant requires a positive w_oo")
        if self.b > self.a:
            warnings.warn(
                f"brake cost b={self.b} exceeds drive cost a={self.a}",
                ParameterWarning,
                stacklevel=3,
            )

    @property
    def brake_costlier(self) -> bool:
        return self.b > self.a

    @property
    def bistable(self) -> bool:
        return self.a > 0.5

    @property
    def theta(self) -> Optional[float]:
        """Unstable drive-only state (2a-1)/a; None in the monostable regime."""
        if self.a <= 0.5:
            return None
        return (2.0 * self.a - 1.0) / self.a

    def with_b(self, b: float) -> "Params":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ParameterWarning)
            return Params(self.a, b, self.h, self.variant, self.w_oo)


def make_params(a: float, b: float, h: float = 0.5, **kw) -> Params:
    """Build Params without emitting the b > a warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParameterWarning)
        return Params(a, b, h, **kw)


class FrequencyPair(NamedTuple):
    u: float
    v: float


class ReactionValue(NamedTuple):
    du: object
    dv: object
    dn: object  # per-capita growth factor of n; zero for the Tanaka variant


class Decomposition(NamedTuple):
    w0: object
    f0: tuple
    r: tuple


def in_triangle(s, tol: float = 0.0) -> bool:
    u, v = s
    return bool(u >= -tol and v >= -tol and u + v <= 1.0 + tol)


# -- scalar kernels (plain arithmetic so numba can compile them) ----------


def fitness_kernel(a, b, h, u, v):
    return 1.0 - (a * u * u + b * v * v + 2.0 * b * u * v) - 2.0 * (1.0 - u - v) * (a * u + h * b * v)


def tanaka_kernel(a, b, h, u, v):
    o = 1.0 - u - v
    w = 1.0 - (a * u * u + b * v * v + 2.0 * b * u * v) - 2.0 * o * (a * u + h * b * v)
    g1 = (1.0 - a) * u + 2.0 * (1.0 - a) * o
    g2 = (1.0 - b) * v + 2.0 * (1.0 - b) * u + (1.0 - h * b) * o
    return u * (g1 / w - 1.0), v * (g2 / w - 1.0)


def tanaka_growth_kernel(a, b, h, u, v):
    """Per-capita rates g_i / w - 1 of drive, brake and wild type.

    The wild-type gamete output is 1 - u - h b v, so each face of T is
    invariant for the third rate as well.
    """
    o = 1.0 - u - v
    w = 1.0 - (a * u * u + b * v * v + 2.0 * b * u * v) - 2.0 * o * (a * u + h * b * v)
    g1 = (1.0 - a) * u + 2.0 * (1.0 - a) * o
    g2 = (1.0 - b) * v + 2.0 * (1.0 - b) * u + (1.0 - h * b) * o
    g3 = 1.0 - u - h * b * v
    return g1 / w - 1.0, g2 / w - 1.0, g3 / w - 1.0


def nagylaki_growth_kernel(a, b, h, w_oo, u, v):
    o = 1.0 - u - v
    w = 1.0 - (a * u * u + b * v * v + 2.0 * b * u * v) - 2.0 * o * (a * u + h * b * v)
    g1 = (1.0 - a) * u + 2.0 * (1.0 - a) * o
    g2 = (1.0 - b) * v + 2.0 * (1.0 - b) * u + (1.0 - h * b) * o
    g3 = 1.0 - u - h * b * v
    return w_oo * (g1 - w), w_oo * (g2 - w), w_oo * (g3 - w)


def nagylaki_kernel(a, b, h, w_oo, u, v):
    o = 1.0 - u - v
    w = 1.0 - (a * u * u + b * v * v + 2.0 * b * u * v) - 2.0 * o * (a * u + h * b * v)
    g1 = (1.0 - a) * u + 2.0 * (1.0 - a) * o
    g2 = (1.0 - b) * v + 2.0 * (1.0 - b) * u + (1.0 - h * b) * o
    return w_oo * u * (g1 - w), w_oo * v * (g2 - w)


# -- public evaluation API -------------------------------------------------


def mean_fitness(p: Params, u, v):
    """Mean fitness w(u, v); lies in [1 - a, 1] on T."""
    return fitness_kernel(p.a, p.b, p.h, u, v)


def gametes(p: Params, u, v):
    o = 1.0 - u - v
    g1 = (1.0 - p.a) * u + 2.0 * (1.0 - p.a) * o
    g2 = (1.0 - p.b) * v + 2.0 * (1.0 - p.b) * u + (1.0 - p.h * p.b) * o
    return g1, g2


def growth(p: Params, u, v):
    """Per-capita growth (f1, f2) = g / w - 1 of the Tanaka system."""
    w = mean_fitness(p, u, v)
    g1, g2 = gametes(p, u, v)
    return g1 / w - 1.0, g2 / w - 1.0


def reaction(p: Params, u, v) -> ReactionValue:
    if p.variant is Variant.NAGYLAKI:
        du, dv = nagylaki_kernel(p.a, p.b, p.h, p.w_oo, u, v)
        dn = p.w_oo * mean_fitness(p, u, v) - 1.0
        return ReactionValue(du, dv, dn)
    du, dv = tanaka_kernel(p.a, p.b, p.h, u, v)
    return ReactionValue(du, dv, 0.0 * du)


def drive_only_rhs(p: Params, u):
    """Reaction on the v = 0 edge in factored form a u (1-u)(u-theta) / w."""
    a = p.a
    return a * u * (1.0 - u) * (u - (2.0 * a - 1.0) / a) / (1.0 - a + a * (1.0 - u) ** 2)


def brake_only_rhs(p: Params, v):
    b, h = p.b, p.h
    return -b * v * (1.0 - v) * (h * (1.0 - v) + v * (1.0 - h)) / (1.0 - b * v * v - 2.0 * h * b * v * (1.0 - v))


def edge_rhs(p: Params, u):
    """Drive equation on the hypotenuse u + v = 1."""
    a, b = p.a, p.b
    return -u * (1.0 - u) * (1.0 - b + (a - b) * u) / (1.0 - b - (a - b) * u * u)


def decomposition_terms(p: Params, u, v) -> Decomposition:
    """Split the reaction into its b = 0 part and the brake-cost correction.

    Satisfies ``(u, v) * f_b = (w0 / w_b) * [(u, v) * f0 + (b v / w0) * r]``.
    """
    a, h = p.a, p.h
    w0 = 1.0 + a * u * u - 2.0 * a * u + 2.0 * a * u * v
    f0_1 = (-(2.0 * a - 1.0) + (3.0 * a - 1.0) * u - a * u * u - 2.0 * v * (1.0 - a + a * u)) / w0
    f0_2 = u * (1.0 + 2.0 * a - a * u - 2.0 * a * v) / w0
    r1 = u * (v + 2.0 * u + 2.0 * h * (1.0 - u - v))
    r2 = -(1.0 - v) * ((1.0 - 2.0 * h) * v + h) - u * (2.0 * (1.0 - h) * (1.0 - v) + h)
    return Decomposition(w0, (f0_1, f0_2), (r1, r2))


def reconstruct_reaction(p: Params, u, v):
    """Reassemble (du, dv) from decomposition_terms."""
    w0, (f0_1, f0_2), (r1, r2) = decomposition_terms(p, u, v)
    scale = w0 / mean_fitness(p, u, v)
    corr = p.b * v / w0
    return scale * (u * f0_1 + corr * r1), scale * (v * f0_2 + corr * r2)


def kpp_threshold(variant: Variant = Variant.TANAKA) -> float:
    """Largest drive cost for which the drive-only reaction is KPP."""
    return 1.0 / 3.0 if Variant(variant) is Variant.NAGYLAKI else 0.25


def triangle_grid(n: int, interior: bool = False):
    """Points (u, v) of a regular n x n lattice on [0, 1]^2 that lie in T."""
    if interior:
        t = (np.arange(n) + 0.5) / n
    else:
        t = np.linspace(0.0, 1.0, n)
    uu, vv = np.meshgrid(t, t, indexing="ij")
    keep = uu + vv <= 1.0 + 1e-15 if not interior else uu + vv < 1.0
    return uu[keep], vv[keep]


def theta_of(a: float) -> float:
    if a <= 0.5:
        raise ValueError(f"theta is undefined for a={a} <= 1/2 (monostable regime)")
    return (2.0 * a - 1.0) / a


__all__ = [
    "Variant",
    "Params",
    "ParameterWarning",
    "make_params",
    "FrequencyPair",
    "ReactionValue",
    "Decomposition",
    "in_triangle",
    "mean_fitness",
    "gametes",
    "growth",
    "reaction",
    "drive_only_rhs",
    "brake_only_rhs",
    "edge_rhs",
    "decomposition_terms",
    "reconstruct_reaction",
    "kpp_threshold",
    "triangle_grid",
    "theta_of",
    "fitness_kernel",
    "tanaka_kernel",
    "nagylaki_kernel",
    "tanaka_growth_kernel",
    "nagylaki_growth_kernel",
]
