"""Diffusionless (well-mixed) dynamics: integration and trajectory labels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numba import njit

from .model import FrequencyPair, Params, Variant, nagylaki_growth_kernel, tanaka_growth_kernel

_tanaka = njit(cache=True)(tanaka_growth_kernel)
_nagylaki = njit(cache=True)(nagylaki_growth_kernel)

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

OK, UNDERFLOW, MAX_STEPS = 0, 1, 2


# The system is integrated in the logs of all three frequencies (drive,
# brake, wild type), renormalised to sum one after every step. Since
# ds_i/dt = s_i f_i this is the same flow on the interior; it keeps tiny
# frequencies accurate to relative precision near the saddle corners, and
# log 0 = -inf leaves every face exactly invariant.


@njit(cache=True)
def _rhs(a, b, h, w_oo, nag, z, out):
    u, v = math.exp(z[0]), math.exp(z[1])
    if nag:
        f = _nagylaki(a, b, h, w_oo, u, v)
    else:
        f = _tanaka(a, b, h, u, v)
    out[0], out[1], out[2] = f[0], f[1], f[2]


@njit(cache=True)
def _overshoot(u, v):
    return max(0.0, -u, -v, u + v - 1.0)


@njit(cache=True)
def _renormalise(z):
    m = max(z[0], z[1], z[2])
    s = math.exp(z[0] - m) + math.exp(z[1] - m) + math.exp(z[2] - m)
    shift = m + math.log(s)
    for i in range(3):
        z[i] -= shift


@njit(cache=True)
def _dopri(a, b, h, w_oo, nag, z0, t_end, dt_max, rtol, atol, max_steps):
    ts = np.empty(max_steps + 1)
    zs = np.empty((max_steps + 1, 3))
    ts[0] = 0.0
    zs[0] = z0
    n = 0
    t = 0.0
    z = z0.copy()
    zn = np.empty(3)
    tmp = np.empty(3)
    k = np.empty((7, 3))
    dt = min(dt_max, 1e-3)
    _rhs(a, b, h, w_oo, nag, z, k[0])
    while t < t_end:
        if n >= max_steps:
            return ts[: n + 1], zs[: n + 1], MAX_STEPS, t
        dt = min(dt, dt_max, t_end - t)
        if dt < 1e-14 * max(1.0, t):
            return ts[: n + 1], zs[: n + 1], UNDERFLOW, t
        for i in range(3):
            tmp[i] = z[i] + dt * _A21 * k[0, i]
        _rhs(a, b, h, w_oo, nag, tmp, k[1])
        for i in range(3):
            tmp[i] = z[i] + dt * (_A31 * k[0, i] + _A32 * k[1, i])
        _rhs(a, b, h, w_oo, nag, tmp, k[2])
        for i in range(3):
            tmp[i] = z[i] + dt * (_A41 * k[0, i] + _A42 * k[1, i] + _A43 * k[2, i])
        _rhs(a, b, h, w_oo, nag, tmp, k[3])
        for i in range(3):
            tmp[i] = z[i] + dt * (_A51 * k[0, i] + _A52 * k[1, i] + _A53 * k[2, i] + _A54 * k[3, i])
        _rhs(a, b, h, w_oo, nag, tmp, k[4])
        for i in range(3):
            tmp[i] = z[i] + dt * (
                _A61 * k[0, i] + _A62 * k[1, i] + _A63 * k[2, i] + _A64 * k[3, i] + _A65 * k[4, i]
            )
        _rhs(a, b, h, w_oo, nag, tmp, k[5])
        for i in range(3):
            zn[i] = z[i] + dt * (
                _B1 * k[0, i] + _B3 * k[2, i] + _B4 * k[3, i] + _B5 * k[4, i] + _B6 * k[5, i]
            )
        _rhs(a, b, h, w_oo, nag, zn, k[6])
        acc = 0.0
        for i in range(3):
            e = dt * (
                _E1 * k[0, i] + _E3 * k[2, i] + _E4 * k[3, i]
                + _E5 * k[4, i] + _E6 * k[5, i] + _E7 * k[6, i]
            )
            sc = atol + rtol * max(abs(z[i]), abs(zn[i]))
            if sc != math.inf:
                acc += (e / sc) ** 2
        err = math.sqrt(acc / 3.0)
        if not (err <= 1.0):
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            dt *= fac
            continue
        _renormalise(zn)
        t += dt
        z[:] = zn
        _rhs(a, b, h, w_oo, nag, z, k[0])
        n += 1
        ts[n] = t
        zs[n] = z
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        dt *= fac
    return ts[: n + 1], zs[: n + 1], OK, t


class IntegrationError(RuntimeError):
    def __init__(self, message, t, state):
        super().__init__(f"{message} at t={t:.6g}, state=({state[0]:.6g}, {state[1]:.6g})")
        self.t = t
        self.state = state


class Label(str, enum.Enum):
    CONVERGES = "ConvergesTo"
    SUSTAINED = "SustainedOscillation"
    CORNER = "CornerExtinction"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class Classification:
    label: Label
    point: Optional[FrequencyPair] = None
    kind: Optional[str] = None  # equilibrium kind for ConvergesTo

    def __str__(self):
        if self.label is Label.CONVERGES:
            return f"ConvergesTo({self.kind}: {self.point.u:.6g}, {self.point.v:.6g})"
        return self.label.value


@dataclass
class Trajectory:
    """Accepted integrator steps. ``log_u``, ``log_v`` and ``log_o`` (wild
    type, 1 - u - v) keep exact values when a frequency underflows to zero
    near a corner."""

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    params: Optional[Params] = None
    seed: Optional[int] = None
    classification: Optional[Classification] = None
    log_u: Optional[np.ndarray] = None
    log_v: Optional[np.ndarray] = None
    log_o: Optional[np.ndarray] = None

    def __post_init__(self):
        with np.errstate(divide="ignore"):
            if self.log_u is None:
                self.log_u = np.log(np.maximum(self.u, 0.0))
            if self.log_v is None:
                self.log_v = np.log(np.maximum(self.v, 0.0))
            if self.log_o is None:
                self.log_o = np.log(np.maximum(1.0 - self.u - self.v, 0.0))

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.u, self.v])

    def max_overshoot(self) -> float:
        return float(max(0.0, -self.u.min(), -self.v.min(), (self.u + self.v).max() - 1.0))


def integrate_ode(
    p: Params,
    s0,
    t_end: float,
    dt_max: float = 0.01,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    triangle_tol: float = 1e-9,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """Adaptive Dormand-Prince integration of the reaction system.

    Error control acts on the log frequencies, so ``atol`` is effectively a
    relative tolerance on each of them. The start must lie in T up to
    ``triangle_tol``; every accepted state is renormalised onto T.
    """
    u0, v0 = float(s0[0]), float(s0[1])
    if _overshoot(u0, v0) > triangle_tol:
        raise ValueError(f"initial state ({u0}, {v0}) is outside the triangle")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if max_steps is None:
        max_steps = int(4 * t_end / dt_max) + 10000
    nag = p.variant is Variant.NAGYLAKI
    w_oo = p.w_oo if nag else 1.0
    o0 = max(0.0, 1.0 - u0 - v0)
    with np.errstate(divide="ignore"):
        z0 = np.log(np.array([max(u0, 0.0), max(v0, 0.0), o0]))
    _renormalise(z0)
    ts, zs, status, t = _dopri(
        p.a, p.b, p.h, w_oo, nag, z0, float(t_end), float(dt_max),
        rtol, atol, max_steps,
    )
    if status != OK:
        state = (math.exp(zs[-1, 0]), math.exp(zs[-1, 1]))
        if status == UNDERFLOW:
            raise IntegrationError("step size underflow", t, state)
        raise IntegrationError(f"exceeded {max_steps} steps", t, state)
    return Trajectory(ts, np.exp(zs[:, 0]), np.exp(zs[:, 1]), p, log_u=zs[:, 0], log_v=zs[:, 1], log_o=zs[:, 2])


def random_interior_points(n: int, seed: int, margin: float = 1e-3) -> np.ndarray:
    """Uniform samples in T kept at least ``margin`` away from its edges."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        u, v = rng.random(2)
        if u + v < 1.0 - margin and u > margin and v > margin:
            pts.append((u, v))
    return np.array(pts)


def _local_maxima(x: np.ndarray) -> int:
    d = np.diff(x)
    d = d[d != 0]
    return int(np.sum((d[:-1] > 0) & (d[1:] < 0)))


def _log_deviation(lin, logs, q):
    if q == 0.0:
        return logs
    with np.errstate(divide="ignore"):
        return np.log(np.abs(lin - q))


def _departing(traj, sel, q, edge=0.1) -> bool:
    """True if some frequency's distance from ``q`` grew across the tail.

    Compares the envelope (max) of log|s_i - q_i| over the last and first
    ``edge`` fraction of the tail, for drive, brake and wild type; a saddle
    passage grows there while a node or damped spiral shrinks.
    """
    idx = np.flatnonzero(sel)
    k = max(1, int(edge * idx.size))
    head, last = idx[:k], idx[-k:]
    o = 1.0 - traj.u - traj.v
    qo = 1.0 - q[0] - q[1]
    for lin, logs, qc in ((traj.u, traj.log_u, q[0]), (traj.v, traj.log_v, q[1]), (o, traj.log_o, qo)):
        d = _log_deviation(lin, logs, qc)
        if np.max(d[last]) > np.max(d[head]) + 1e-9:
            return True
    return False


def classify_trajectory(
    traj: Trajectory,
    equilibria: Sequence = (),
    tail_fraction: float = 0.2,
    conv_tol: float = 1e-3,
    osc_diameter: float = 1e-2,
    min_tail: int = 100,
    hug_tol: float = 1e-3,
    center=(1.0 / 3.0, 1.0 / 3.0),
) -> Classification:
    """Label the long-run behaviour from the tail window of a trajectory.

    ``equilibria`` holds objects with ``location`` and ``kind`` attributes
    (see ``analysis.Equilibrium``) or plain (u, v) pairs.

    A tail inside ``conv_tol`` of a point only counts as convergence if the
    trajectory is not moving away from it, so a long stay near the saddle at
    the origin is not read as extinction. Oscillations are either recurrent
    swings of diameter above ``osc_diameter``, or a non-converging tail that
    stays within ``hug_tol`` of the boundary of T after at least one full
    turn around ``center`` (approach to the cycle of boundary saddles, whose
    loops lengthen geometrically so a tail rarely holds two of them).
    """
    t = traj.times
    t_cut = t[-1] - tail_fraction * (t[-1] - t[0])
    sel = t >= t_cut
    if sel.sum() < min_tail:
        raise ValueError(f"tail has {int(sel.sum())} samples, need {min_tail}")
    tu, tv = traj.u[sel], traj.v[sel]
    if np.max(np.hypot(tu, tv)) < conv_tol and not _departing(traj, sel, (0.0, 0.0)):
        return Classification(Label.CORNER, FrequencyPair(0.0, 0.0), "Corner00")
    for eq in equilibria:
        loc = getattr(eq, "location", eq)
        kind = getattr(eq, "kind", None)
        kind = getattr(kind, "value", kind)
        if np.max(np.hypot(tu - loc[0], tv - loc[1])) < conv_tol and not _departing(traj, sel, loc):
            return Classification(Label.CONVERGES, FrequencyPair(float(loc[0]), float(loc[1])), kind)
    diameter = math.hypot(float(np.ptp(tu)), float(np.ptp(tv)))
    if diameter > osc_diameter and min(_local_maxima(tu), _local_maxima(tv)) >= 2:
        return Classification(Label.SUSTAINED)
    if (
        np.max(np.minimum(np.minimum(tu, tv), 1.0 - tu - tv)) < hug_tol
        and abs(winding_angle(traj, center)) >= 2 * math.pi
    ):
        return Classification(Label.SUSTAINED)
    return Classification(Label.UNDECIDED)


def winding_angle(traj: Trajectory, center) -> float:
    """Accumulated signed angle (radians) of the trajectory around ``center``."""
    ang = np.unwrap(np.arctan2(traj.v - center[1], traj.u - center[0]))
    return float(ang[-1] - ang[0])


@dataclass
class PhaseRun:
    params: Params
    seed: int
    t_end: float
    trajectories: List[Trajectory] = field(default_factory=list)

    def labels(self) -> List[str]:
        return [str(tr.classification) for tr in self.trajectories]


def phase_portrait(
    p: Params,
    n_starts: int,
    t_end: float,
    seed: int,
    equilibria: Sequence = (),
    dt_max: float = 0.01,
    tail_fraction: float = 0.2,
) -> PhaseRun:
    """Integrate and classify ``n_starts`` seeded random interior starts."""
    out = PhaseRun(p, seed, t_end)
    for s0 in random_interior_points(n_starts, seed):
        tr = integrate_ode(p, s0, t_end, dt_max)
        tr.seed = seed
        tr.classification = classify_trajectory(tr, equilibria, tail_fraction)
        out.trajectories.append(tr)
    return out


def persistence_check(
    p: Params,
    n_starts: int = 20,
    t_end: float = 1000.0,
    seed: int = 0,
    threshold: float = 1e-3,
    dt_max: float = 0.05,
) -> bool:
    """True iff no random interior start dies out at the origin.

    A start persists if max(u + v) over the last fifth of the run exceeds
    ``threshold``, or if it is near the origin but moving away from it.
    """
    for s0 in random_interior_points(n_starts, seed):
        tr = integrate_ode(p, s0, t_end, dt_max)
        tail = tr.times >= 0.8 * t_end
        if np.max(tr.u[tail] + tr.v[tail]) > threshold:
            continue
        if not _departing(tr, tail, (0.0, 0.0)):
            return False
    return True
