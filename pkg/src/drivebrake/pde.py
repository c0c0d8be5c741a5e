"""Semi-implicit finite differences for the 1-D drive/brake system.

Diffusion is implicit through ``B = I - (dt/dx^2) A`` where ``A`` is the
(1, -2, 1) stencil with the Neumann correction on its first and last
diagonal entries. Reaction (and the optional gene-flow drift) is explicit:

    u+ = B^-1 (u + dt * (u f1(u, v) + drift_u))
    v+ = B^-1 (v + dt * (v f2(u, v) + drift_v))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import Params, Variant, reaction, triangle_grid
from .tridiag import TridiagonalSolver


class NumericalAbort(RuntimeError):
    """A run produced a non-finite or inadmissible value."""

    def __init__(self, message: str, node: Optional[int] = None, t: Optional[float] = None):
        super().__init__(message)
        self.node = node
        self.t = t


@dataclass(frozen=True)
class Grid1D:
    L: float = 1280.0
    N: int = 3200
    T_end: float = 300.0
    M: int = 30000

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not (self.L > 0 and self.T_end > 0):
            raise ValueError("L and T_end must be positive")

    @classmethod
    def desk(cls, **overrides) -> "Grid1D":
        return cls(**{**dict(L=1280.0, N=3200, T_end=300.0, M=30000), **overrides})

    @classmethod
    def full_res(cls, **overrides) -> "Grid1D":
        return cls(**{**dict(L=1280.0, N=16000, T_end=300.0, M=160000), **overrides})

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dt(self) -> float:
        return self.T_end / self.M

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dx

    @property
    def nodes(self) -> int:
        return self.N + 1

    def stiffness_advisory(self, p: Params) -> bool:
        """True when dt times the largest reaction slope exceeds 0.5.

        Only an accuracy hint for the explicit reaction; diffusion is implicit.
        """
        return self.dt * reaction_slope_bound(p) > 0.5


def reaction_slope_bound(p: Params, n: int = 41, step: float = 1e-6) -> float:
    """Largest row sum of |Jacobian| of the reaction over a lattice of T."""
    u, v = triangle_grid(n)
    du_u = (np.asarray(reaction(p, u + step, v)[:2]) - np.asarray(reaction(p, u - step, v)[:2])) / (2 * step)
    du_v = (np.asarray(reaction(p, u, v + step)[:2]) - np.asarray(reaction(p, u, v - step)[:2])) / (2 * step)
    rows = np.abs(du_u) + np.abs(du_v)
    return float(rows.max())


@dataclass
class FieldState:
    u: np.ndarray
    v: np.ndarray
    n: Optional[np.ndarray] = None
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(
            self.u.copy(), self.v.copy(), None if self.n is None else self.n.copy(), self.t
        )

    def overshoot(self) -> float:
        return triangle_overshoot(self.u, self.v)


def triangle_overshoot(u, v) -> float:
    """Largest violation of u >= 0, v >= 0, u + v <= 1 (0 when inside T)."""
    return float(max(0.0, -u.min(), -v.min(), (u + v).max() - 1.0))


@dataclass(frozen=True)
class Block:
    """Set ``field`` to at least ``level`` on nodes with lo < x <= hi."""

    field: str
    lo: float
    hi: float
    level: float
    release_time: float = 0.0

    def __post_init__(self):
        if self.field not in ("u", "v"):
            raise ValueError(f"block field must be 'u' or 'v', got {self.field!r}")
        if not 0.0 <= self.level <= 1.0:
            raise ValueError(f"block level must lie in [0, 1], got {self.level}")
        if self.hi < self.lo:
            raise ValueError("block interval has hi < lo")
        if self.release_time < 0:
            raise ValueError("release_time must be >= 0")

    def mask(self, grid: Grid1D) -> np.ndarray:
        i = np.arange(grid.nodes)
        eps = 1e-9
        return (i > self.lo / grid.dx + eps) & (i <= self.hi / grid.dx + eps)


@dataclass(frozen=True)
class InitialCondition:
    blocks: Tuple[Block, ...] = ()

    @classmethod
    def appendix(cls, L: float = 1280.0, brake_release: float = 0.0) -> "InitialCondition":
        """Drive at 0.99 on (0.40 L, 0.55 L], brake at 0.001 on (0.45 L, 0.50 L]."""
        return cls(
            (
                Block("u", 0.40 * L, 0.55 * L, 0.99, 0.0),
                Block("v", 0.45 * L, 0.50 * L, 0.001, brake_release),
            )
        )

    def release_times(self) -> List[float]:
        return sorted({b.release_time for b in self.blocks})


def apply_block(u: np.ndarray, v: np.ndarray, block: Block, grid: Grid1D) -> None:
    """Write a block in place: pointwise max, then v reduced to fit u + v <= 1."""
    m = block.mask(grid)
    target = u if block.field == "u" else v
    target[m] = np.maximum(target[m], block.level)
    np.minimum(v, 1.0 - u, out=v, where=m)


def laplacian_bands(nodes: int):
    """(lower, diag, upper) of the Neumann-corrected second-difference stencil."""
    lower = np.ones(nodes)
    upper = np.ones(nodes)
    diag = -2.0 * np.ones(nodes)
    diag[0] += 1.0
    diag[-1] += 1.0
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper


def build_diffusion_operator(grid: Grid1D) -> TridiagonalSolver:
    """Pre-factored ``I - (dt/dx^2) A``."""
    lower, diag, upper = laplacian_bands(grid.nodes)
    r = grid.dt / grid.dx**2
    return TridiagonalSolver(-r * lower, 1.0 - r * diag, -r * upper)


# -- gene-flow drift ---------------------------------------------------------


def drift_velocity(n: np.ndarray, dx: float) -> np.ndarray:
    """2 d(log n)/dx by centred differences; zero on the Neumann ends."""
    if np.any(~np.isfinite(n)) or np.any(n <= 0):
        bad = int(np.flatnonzero(~(np.isfinite(n) & (n > 0)))[0])
        raise NumericalAbort(f"population field must be positive and finite (node {bad})", node=bad)
    logn = np.log(n)
    beta = np.zeros_like(logn)
    beta[1:-1] = (logn[2:] - logn[:-2]) / dx
    return beta


def drift_term(beta: np.ndarray, f: np.ndarray, dx: float) -> np.ndarray:
    """beta * df/dx with the difference taken on the upwind side."""
    fwd = np.zeros_like(f)
    bwd = np.zeros_like(f)
    fwd[:-1] = (f[1:] - f[:-1]) / dx
    bwd[1:] = (f[1:] - f[:-1]) / dx
    return beta * np.where(beta > 0, fwd, bwd)


@dataclass(frozen=True)
class DriftSpec:
    """Prescribed population profile n(x) for the transport term.

    ``profile`` is one of ``none``, ``tanh`` (smooth step from ``n_left`` to
    ``n_right`` centred at ``center`` with width ``width``) or ``exp``
    (``n = exp(slope * x)``, a constant drift).
    """

    profile: str = "none"
    n_left: float = 1.0
    n_right: float = 1.0
    center: float = 640.0
    width: float = 50.0
    slope: float = 0.0

    def __post_init__(self):
        if self.profile not in ("none", "tanh", "exp"):
            raise ValueError(f"unknown drift profile {self.profile!r}")
        if self.profile == "tanh":
            if not (self.n_left > 0 and self.n_right > 0 and self.width > 0):
                raise ValueError("tanh profile needs positive n_left, n_right, width")

    def field(self, grid: Grid1D) -> Optional[np.ndarray]:
        x = grid.x
        if self.profile == "none":
            return None
        if self.profile == "tanh":
            s = 0.5 * (1.0 + np.tanh((x - self.center) / self.width))
            return self.n_left + (self.n_right - self.n_left) * s
        return np.exp(self.slope * (x - x[0]))


# -- stepping ------------------------------------------------------------------


def _check_finite(arr: np.ndarray, name: str, t: float) -> None:
    if not np.all(np.isfinite(arr)):
        node = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise NumericalAbort(f"non-finite {name} at node {node}, t={t:g}", node=node, t=t)


def _advance(u, v, n, t, p, grid, op, beta, react=True):
    dt = grid.dt
    if react:
        du, dv, dn = reaction(p, u, v)
    else:
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        dn = np.zeros_like(u)
    rhs_u = u + dt * du
    rhs_v = v + dt * dv
    if beta is not None:
        rhs_u += dt * drift_term(beta, u, grid.dx)
        rhs_v += dt * drift_term(beta, v, grid.dx)
    u_new = op.solve(rhs_u)
    v_new = op.solve(rhs_v)
    t_new = t + dt
    _check_finite(u_new, "u", t_new)
    _check_finite(v_new, "v", t_new)
    n_new = None
    if n is not None:
        n_new = op.solve(n + dt * dn * n) if p.variant is Variant.NAGYLAKI else n
        _check_finite(n_new, "n", t_new)
        if np.any(n_new <= 0):
            node = int(np.flatnonzero(n_new <= 0)[0])
            raise NumericalAbort(f"n <= 0 at node {node}, t={t_new:g}", node=node, t=t_new)
    return u_new, v_new, n_new, t_new


def step(
    state: FieldState,
    p: Params,
    grid: Grid1D,
    drift: Optional[np.ndarray] = None,
    op: Optional[TridiagonalSolver] = None,
    react: bool = True,
) -> FieldState:
    """One semi-implicit step.

    ``drift`` is a prescribed population field n(x); with the Nagylaki variant
    the evolving ``state.n`` is used instead. ``react=False`` zeroes the
    reaction (pure diffusion), which conserves the spatial sum.
    """
    if op is None:
        op = build_diffusion_operator(grid)
    n_field = state.n if state.n is not None else drift
    beta = None if n_field is None else drift_velocity(n_field, grid.dx)
    if beta is not None and not np.any(beta):
        beta = None
    u, v, n, t = _advance(state.u, state.v, state.n, state.t, p, grid, op, beta, react)
    return FieldState(u, v, n, t)


# -- full runs -------------------------------------------------------------------


@dataclass
class Raster:
    """Space-time record of the fields at evenly spaced times."""

    times: np.ndarray
    x: np.ndarray
    u: np.ndarray  # shape (len(times), len(x))
    v: np.ndarray
    n: Optional[np.ndarray] = None

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])


@dataclass
class RunResult:
    params: Params
    grid: Grid1D
    final: FieldState
    snapshots: Dict[float, FieldState]
    raster: Raster
    max_overshoot: float
    runtime_s: float = 0.0
    released: List[Block] = field(default_factory=list)


def run(
    p: Params,
    grid: Grid1D,
    ic: InitialCondition,
    drift: Optional[DriftSpec] = None,
    snapshot_times: Sequence[float] = (),
    raster_dt: float = 1.0,
    n0: Optional[np.ndarray] = None,
    react: bool = True,
) -> RunResult:
    """Integrate from zero fields, releasing the blocks at their times.

    Snapshots are taken at the first step whose time reaches each requested
    time. The raster keeps every ``raster_dt`` time units at full spatial
    resolution.
    """
    import time as _time

    t_start = _time.perf_counter()
    op = build_diffusion_operator(grid)
    u = np.zeros(grid.nodes)
    v = np.zeros(grid.nodes)
    n = None
    if p.variant is Variant.NAGYLAKI:
        n = np.ones(grid.nodes) if n0 is None else np.array(n0, dtype=float)
        if n.shape != (grid.nodes,):
            raise ValueError(f"n0 must have {grid.nodes} entries")
        if np.any(~np.isfinite(n)) or np.any(n <= 0):
            raise NumericalAbort("n0 must be positive and finite")
    prescribed = None if drift is None else drift.field(grid)
    beta_fixed = None
    if n is None and prescribed is not None:
        beta_fixed = drift_velocity(prescribed, grid.dx)
        if not np.any(beta_fixed):
            beta_fixed = None

    dt = grid.dt
    pending = sorted(ic.blocks, key=lambda b: b.release_time)
    release_steps = [max(0, math.ceil(b.release_time / dt - 1e-9)) for b in pending]
    snaps_left = sorted(set(float(s) for s in snapshot_times))
    snap_steps = [max(0, math.ceil(s / dt - 1e-9)) for s in snaps_left]
    raster_every = max(1, int(round(raster_dt / dt)))

    times: List[float] = []
    ru: List[np.ndarray] = []
    rv: List[np.ndarray] = []
    rn: List[np.ndarray] = []
    snapshots: Dict[float, FieldState] = {}
    released: List[Block] = []
    overshoot = 0.0
    t = 0.0

    for k in range(grid.M + 1):
        t = k * dt
        while pending and release_steps[0] <= k:
            block = pending.pop(0)
            release_steps.pop(0)
            apply_block(u, v, block, grid)
            released.append(block)
        overshoot = max(overshoot, triangle_overshoot(u, v))
        while snaps_left and snap_steps[0] <= k:
            snapshots[snaps_left.pop(0)] = FieldState(u.copy(), v.copy(), None if n is None else n.copy(), t)
            snap_steps.pop(0)
        if k % raster_every == 0 or k == grid.M:
            times.append(t)
            ru.append(u.copy())
            rv.append(v.copy())
            if n is not None:
                rn.append(n.copy())
        if k == grid.M:
            break
        beta = beta_fixed if n is None else drift_velocity(n, grid.dx)
        u, v, n, _ = _advance(u, v, n, t, p, grid, op, beta, react)

    raster = Raster(
        np.array(times), grid.x, np.array(ru), np.array(rv), np.array(rn) if rn else None
    )
    final = FieldState(u, v, n, t)
    return RunResult(
        p, grid, final, snapshots, raster, overshoot, _time.perf_counter() - t_start, released
    )


def run_nagylaki(
    p: Params,
    grid: Grid1D,
    ic: InitialCondition,
    n0: np.ndarray,
    snapshot_times: Sequence[float] = (),
    raster_dt: float = 1.0,
) -> RunResult:
    """Three-field run: (u, v) as in ``run`` plus the evolving density n."""
    if p.variant is not Variant.NAGYLAKI:
        raise ValueError("run_nagylaki needs Params with variant=Nagylaki")
    return run(p, grid, ic, None, snapshot_times, raster_dt, n0=n0)


# -- fronts ------------------------------------------------------------------------


@dataclass
class Fronts:
    times: np.ndarray
    x_u: np.ndarray  # nan where the level is never attained
    x_v: np.ndarray
    u_speed: Optional[float]
    v_speed: Optional[float]
    window: Tuple[float, float]


def front_position(x: np.ndarray, f: np.ndarray, level: float) -> float:
    """Rightmost crossing of ``f >= level``, linearly interpolated; nan if none."""
    above = np.flatnonzero(f >= level)
    if above.size == 0:
        return math.nan
    i = int(above[-1])
    if i == len(f) - 1:
        return float(x[i])
    drop = f[i] - f[i + 1]
    frac = (f[i] - level) / drop if drop > 0 else 0.0
    return float(x[i] + frac * (x[i + 1] - x[i]))


def fit_speed(times: np.ndarray, pos: np.ndarray, window: Tuple[float, float]) -> Optional[float]:
    sel = (times >= window[0]) & (times <= window[1]) & np.isfinite(pos)
    if sel.sum() < 2:
        return None
    slope, _ = np.polyfit(times[sel], pos[sel], 1)
    return float(slope)


def track_fronts(
    raster: Raster,
    level_u: float = 0.5,
    level_v: float = 0.1,
    window: Optional[Tuple[float, float]] = None,
) -> Fronts:
    """Rightmost u and v fronts per saved time and least-squares speeds.

    The default fit window is the second half of the recorded times.
    """
    if raster.times.size == 0:
        raise ValueError("empty raster")
    xu = np.array([front_position(raster.x, row, level_u) for row in raster.u])
    xv = np.array([front_position(raster.x, row, level_v) for row in raster.v])
    if window is None:
        t0, t1 = float(raster.times[0]), float(raster.times[-1])
        window = (0.5 * (t0 + t1), t1)
    return Fronts(
        raster.times, xu, xv, fit_speed(raster.times, xu, window), fit_speed(raster.times, xv, window), window
    )
