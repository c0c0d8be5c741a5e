"""Outcome labels for PDE runs, parameter sweeps and the canonical figure
scenarios."""

from __future__ import annotations

import enum
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import io as dio
from .analysis import equilibria
from .model import Params, make_params
from .ode import Label, phase_portrait
from .pde import Grid1D, InitialCondition, RunResult, front_position, run, track_fronts

EPS_EXT = 0.01
PERSIST_V = 0.05
JOINT_LEVEL_U = 0.1  # the joint wave's u plateau sits well below 0.5
TRAIL_WIDTH = 200.0
BRAKE_RELEASE = 80.0
MAJORITY = 0.8  # share of ODE starts that must carry the expected label
OVERSHOOT_TOL = 1e-8


class Outcome(str, enum.Enum):
    COEXTINCTION = "Coextinction"
    JOINT_INVASION = "JointInvasion"
    DRIVE_ONLY = "DrivePersistsBrakeDies"
    UNDECIDED = "Undecided"
    FAILED = "Failed"  # the run itself aborted (sweep cells only)


@dataclass(frozen=True)
class Thresholds:
    eps_ext: float = EPS_EXT
    persist_v: float = PERSIST_V
    joint_level_u: float = JOINT_LEVEL_U
    trail_width: float = TRAIL_WIDTH
    level_u: float = 0.5
    level_v: float = 0.1


@dataclass
class OutcomeRecord:
    params: Params
    outcome: Outcome
    sup_u_final: float
    sup_v_final: float
    u_speed: Optional[float] = None
    v_speed: Optional[float] = None
    joint_speed: Optional[float] = None
    runtime_s: float = 0.0
    grid: str = ""
    max_overshoot: float = 0.0
    error: Optional[str] = None

    def summary(self) -> Dict[str, object]:
        return {
            "a": self.params.a,
            "b": self.params.b,
            "h": self.params.h,
            "outcome": self.outcome.value,
            "sup_u_final": dio.fmt(self.sup_u_final),
            "sup_v_final": dio.fmt(self.sup_v_final),
            "u_speed": dio.fmt(self.u_speed),
            "v_speed": dio.fmt(self.v_speed),
            "joint_speed": dio.fmt(self.joint_speed),
            "max_overshoot": dio.fmt(self.max_overshoot),
            "runtime_s": f"{self.runtime_s:.3f}",
            "grid": self.grid,
        }


def _non_increasing(seq: np.ndarray, tol: float) -> bool:
    return bool(np.all(np.diff(seq) <= tol))


def _trailing_v(raster, i: int, level_u: float, width: float) -> float:
    xf = front_position(raster.x, raster.u[i], level_u)
    if not math.isfinite(xf):
        return 0.0
    m = (raster.x >= xf - width) & (raster.x <= xf)
    return float(raster.v[i][m].max()) if m.any() else 0.0


def classify_run(result: RunResult, th: Thresholds = Thresholds()) -> OutcomeRecord:
    """Label a finished run from its final state and space-time raster."""
    R = result.raster
    times = R.times
    sup_u = R.u.max(axis=1)
    sup_v = R.v.max(axis=1)
    su, sv = float(result.final.u.max()), float(result.final.v.max())
    t0, t1 = float(times[0]), float(times[-1])
    last_quarter = times >= t1 - 0.25 * (t1 - t0)
    last_half = times >= t1 - 0.5 * (t1 - t0)

    fronts = track_fronts(R, th.level_u, th.level_v)
    xj = np.array([front_position(R.x, row, th.joint_level_u) for row in R.u])
    joint_speed = None
    jh = xj[last_half]
    if np.all(np.isfinite(jh)) and jh.size >= 2:
        joint_speed = float(np.polyfit(times[last_half], jh, 1)[0])

    # monotone decay needs a tolerance relative to the extinction scale only
    tol = 1e-6 * th.eps_ext
    if (
        su < th.eps_ext
        and sv < th.eps_ext
        and _non_increasing(sup_u[last_quarter], tol)
        and _non_increasing(sup_v[last_quarter], tol)
    ):
        outcome = Outcome.COEXTINCTION
    elif (
        joint_speed is not None
        and jh[-1] > jh[0]
        and _non_increasing(-jh, 0.0)
        and min(_trailing_v(R, i, th.joint_level_u, th.trail_width) for i in np.flatnonzero(last_half))
        > th.persist_v
    ):
        outcome = Outcome.JOINT_INVASION
    elif sv < th.eps_ext and su > 0.5:
        outcome = Outcome.DRIVE_ONLY
    else:
        outcome = Outcome.UNDECIDED
    g = result.grid
    return OutcomeRecord(
        params=result.params,
        outcome=outcome,
        sup_u_final=su,
        sup_v_final=sv,
        u_speed=fronts.u_speed,
        v_speed=fronts.v_speed,
        joint_speed=joint_speed,
        runtime_s=result.runtime_s,
        grid=f"L={g.L:g} N={g.N} T={g.T_end:g} M={g.M}",
        max_overshoot=result.max_overshoot,
    )


# -- sweeps ----------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioTemplate:
    """How each sweep cell is run: grid, brake release time, thresholds."""

    grid: Grid1D = field(default_factory=Grid1D.desk)
    h: float = 0.5
    brake_release: float = BRAKE_RELEASE
    thresholds: Thresholds = field(default_factory=Thresholds)
    raster_dt: float = 1.0

    def initial_condition(self) -> InitialCondition:
        return InitialCondition.appendix(self.grid.L, self.brake_release)


def run_scenario(p: Params, template: ScenarioTemplate) -> RunResult:
    return run(p, template.grid, template.initial_condition(), raster_dt=template.raster_dt)


def _sweep_cell(args):
    a, b, template = args
    p = make_params(a, b, template.h)
    try:
        return classify_run(run_scenario(p, template), template.thresholds)
    except Exception as exc:  # a failing cell must not stop the sweep
        msg = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return OutcomeRecord(p, Outcome.FAILED, math.nan, math.nan, error=msg)


@dataclass
class SweepResult:
    a_grid: List[float]
    b_grid: List[float]
    records: List[OutcomeRecord]

    def table(self) -> np.ndarray:
        """Outcome codes, rows = a, columns = b."""
        codes = [dio.OUTCOME_CODES[r.outcome.value] for r in self.records]
        return np.array(codes).reshape(len(self.a_grid), len(self.b_grid))

    def coextinction_boundary(self) -> Dict[float, Optional[float]]:
        """For each bistable column a > 1/2, the largest Coextinction b below
        the first persistence label (Undecided or Failed cells are skipped;
        None if no cell below that label is Coextinction)."""
        out = {}
        for i, a in enumerate(self.a_grid):
            if a <= 0.5:
                continue
            best = None
            for j, b in enumerate(self.b_grid):
                outcome = self.records[i * len(self.b_grid) + j].outcome
                if outcome is Outcome.COEXTINCTION:
                    best = b
                elif outcome not in (Outcome.UNDECIDED, Outcome.FAILED):
                    break
            out[a] = best
        return out


def sweep(
    a_grid: Sequence[float],
    b_grid: Sequence[float],
    template: ScenarioTemplate = ScenarioTemplate(),
    jobs: Optional[int] = None,
) -> SweepResult:
    """Run every (a, b) cell; results come back in (a, b) order."""
    a_grid = [float(a) for a in a_grid]
    b_grid = sorted(float(b) for b in b_grid)
    for x in a_grid + b_grid:
        if not 0.0 <= x < 1.0:
            raise ValueError(f"sweep values must lie in (0, 1), got {x}")
    cells = [(a, b, template) for a in a_grid for b in b_grid]
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(cells) == 1:
        records = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_sweep_cell, cells))
    return SweepResult(a_grid, b_grid, records)


def write_sweep_outputs(result: SweepResult, out_dir) -> List[Path]:
    out_dir = Path(out_dir)
    paths = [dio.write_sweep(out_dir, result.records)]
    lines = [f"a={a} largest_coextinction_b={'none' if b is None else b}" for a, b in result.coextinction_boundary().items()]
    failed = [f"failed a={r.params.a} b={r.params.b}: {r.error}" for r in result.records if r.outcome is Outcome.FAILED]
    # the corner (0, 1) repels in the wild-type direction, so rounding that
    # leaves T can grow; such cells are reported, never clamped
    shot = [
        f"overshoot a={r.params.a} b={r.params.b}: {r.max_overshoot:.3g}"
        for r in result.records
        if r.max_overshoot > OVERSHOOT_TOL
    ]
    paths.append(dio.atomic_write_text(out_dir / "sweep_summary.txt", "\n".join(lines + failed + shot) + "\n"))
    return paths


# -- figure scenarios --------------------------------------------------------


@dataclass(frozen=True)
class PdeFigure:
    a: float
    b: float
    h: float
    expected: str
    accept: tuple  # acceptable Outcome values


@dataclass(frozen=True)
class OdeFigure:
    a: float
    b: float
    h: float
    t_end: float
    n_starts: int
    expected: str
    accept_label: Label
    accept_kind: Optional[str] = None
    dt_max: float = 0.05


SNAPSHOT_TIMES = (0.0, 50.0, 80.0, 100.0, 150.0, 200.0, 250.0, 300.0)

FIGURES = {
    "Fig6": PdeFigure(0.55, 0.45, 0.5, "Coextinction", (Outcome.COEXTINCTION,)),
    "Fig5": PdeFigure(0.45, 0.35, 0.5, "JointInvasion", (Outcome.JOINT_INVASION,)),
    "Fig3A": PdeFigure(0.55, 0.65, 0.5, "Coextinction", (Outcome.COEXTINCTION,)),
    "Fig3B": PdeFigure(
        0.55, 0.8, 0.5, "DrivePersistsBrakeDies or Undecided (not Coextinction)",
        (Outcome.DRIVE_ONLY, Outcome.UNDECIDED),
    ),
    # damped spirals settle within 1e-3 only after a few thousand time units
    "Fig4A": OdeFigure(0.4, 0.1, 0.2, 8000.0, 10, "ConvergesTo(Interior)", Label.CONVERGES, "Interior"),
    "Fig4B": OdeFigure(0.4, 0.1, 0.8, 1000.0, 10, "SustainedOscillation", Label.SUSTAINED),
    "Fig7A": OdeFigure(0.6, 0.6, 1.0, 1000.0, 20, "CornerExtinction", Label.CORNER),
    "Fig7B": OdeFigure(0.6, 0.6, 0.1, 1000.0, 20, "CornerExtinction", Label.CORNER),
}


@dataclass
class Reproduction:
    figure_id: str
    expected: str
    observed: str
    ok: bool
    files: List[Path] = field(default_factory=list)
    record: Optional[OutcomeRecord] = None
    run: Optional[object] = None  # RunResult or PhaseRun

    def summary_line(self) -> str:
        return f"outcome: {self.observed}"


def reproduce(
    figure_id: str,
    out_dir=None,
    grid: Optional[Grid1D] = None,
    seed: int = 0,
    raster_stride: int = 4,
) -> Reproduction:
    """Run one canonical figure scenario and, with ``out_dir``, write its data."""
    if figure_id not in FIGURES:
        raise KeyError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}")
    spec = FIGURES[figure_id]
    p = make_params(spec.a, spec.b, spec.h)
    files: List[Path] = []
    out = Path(out_dir) if out_dir is not None else None
    if isinstance(spec, PdeFigure):
        grid = grid or Grid1D.desk()
        times = tuple(t for t in SNAPSHOT_TIMES if t <= grid.T_end)
        res = run(p, grid, InitialCondition.appendix(grid.L, BRAKE_RELEASE), snapshot_times=times)
        rec = classify_run(res)
        ok = rec.outcome in spec.accept
        repro = Reproduction(figure_id, spec.expected, rec.outcome.value, ok, record=rec, run=res)
        if out is not None:
            files += dio.write_snapshots(out, res.snapshots, grid.x)
            files += dio.write_raster(out, res.raster, stride=raster_stride)
            files.append(dio.write_fronts(out, track_fronts(res.raster)))
            summary = {"figure": figure_id, "expected": spec.expected, **rec.summary(),
                       "brake_release": BRAKE_RELEASE, "match": str(ok).lower()}
            files.append(dio.write_kv(out / "summary.txt", summary))
    else:
        t0 = time.perf_counter()
        eqs = equilibria(p)
        phase = phase_portrait(p, spec.n_starts, spec.t_end, seed, eqs, dt_max=spec.dt_max)
        hits = 0
        for tr in phase.trajectories:
            c = tr.classification
            if c.label is spec.accept_label and (spec.accept_kind is None or c.kind == spec.accept_kind):
                hits += 1
        ok = hits >= math.ceil(MAJORITY * spec.n_starts)
        observed = f"{spec.expected} in {hits}/{spec.n_starts}"
        repro = Reproduction(figure_id, spec.expected, observed, ok, run=phase)
        if out is not None:
            for k, tr in enumerate(phase.trajectories):
                files.append(dio.write_trajectory(out / f"traj_{k:02d}.csv", tr))
            summary = {
                "figure": figure_id, "a": spec.a, "b": spec.b, "h": spec.h, "seed": seed,
                "t_end": spec.t_end, "n_starts": spec.n_starts, "expected": spec.expected,
                "outcome": observed, "match": str(ok).lower(),
                "runtime_s": f"{time.perf_counter() - t0:.3f}",
            }
            for k, lab in enumerate(phase.labels()):
                summary[f"trajectory_{k:02d}"] = lab
            files.append(dio.write_kv(out / "summary.txt", summary))
    repro.files = files
    return repro


__all__ = [
    "Outcome", "Thresholds", "OutcomeRecord", "classify_run", "ScenarioTemplate", "run_scenario",
    "sweep", "SweepResult", "write_sweep_outputs", "FIGURES", "reproduce", "Reproduction",
]
