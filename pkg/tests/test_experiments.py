import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivebrake import experiments as ex
from drivebrake.experiments import (
    FIGURES,
    Outcome,
    ScenarioTemplate,
    SweepResult,
    Thresholds,
    classify_run,
    reproduce,
    sweep,
    write_sweep_outputs,
)
from drivebrake.model import make_params
from drivebrake.pde import FieldState, Grid1D, Raster, RunResult

COARSE = Grid1D.desk(N=1600, M=10000)


def synthetic(u_rows, v_rows, times=None, a=0.55, b=0.45):
    u_rows = np.asarray(u_rows, dtype=float)
    v_rows = np.asarray(v_rows, dtype=float)
    nt, nx = u_rows.shape
    times = np.linspace(0, 300, nt) if times is None else times
    x = np.arange(nx) * 1.0
    g = Grid1D(L=float(nx - 1), N=nx - 1, T_end=300.0, M=300)
    final = FieldState(u_rows[-1].copy(), v_rows[-1].copy(), t=300.0)
    return RunResult(make_params(a, b), g, final, {}, Raster(times, x, u_rows, v_rows), 0.0)


def test_all_zero_is_coextinction():
    rec = classify_run(synthetic(np.zeros((31, 50)), np.zeros((31, 50))))
    assert rec.outcome is Outcome.COEXTINCTION
    assert rec.sup_u_final == 0 and rec.u_speed is None


def test_late_regrowth_is_not_coextinction():
    u = np.zeros((31, 50))
    u[-3:, 10] = [1e-4, 2e-3, 5e-3]
    assert classify_run(synthetic(u, np.zeros_like(u))).outcome is Outcome.UNDECIDED


def test_drive_only_persistence():
    u = np.zeros((31, 50))
    u[:, :20] = 1.0
    rec = classify_run(synthetic(u, np.zeros_like(u)))
    assert rec.outcome is Outcome.DRIVE_ONLY


def joint_wave(trail_v):
    nt, nx = 31, 400
    times = np.linspace(0, 300, nt)
    x = np.arange(nx)
    u = np.array([0.3 * (x <= 50 + t) for t in times])
    v = np.array([trail_v * ((x <= 50 + t) & (x > t - 100)) for t in times])
    return synthetic(u, v, times, a=0.45, b=0.35)


def test_joint_invasion_requires_persisting_brake():
    rec = classify_run(joint_wave(0.2))
    assert rec.outcome is Outcome.JOINT_INVASION
    assert rec.joint_speed == pytest.approx(1.0, abs=1e-9)
    assert classify_run(joint_wave(0.01)).outcome is not Outcome.JOINT_INVASION


def test_classification_is_deterministic():
    r = joint_wave(0.2)
    a, b = classify_run(r), classify_run(r)
    assert a.summary() == b.summary()


@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 0.5))
def test_coextinction_label_implies_small_sups(seed, scale):
    rng = np.random.default_rng(seed)
    u = scale * rng.random((20, 30)) * np.linspace(1, 0, 20)[:, None]
    v = scale * rng.random((20, 30)) * np.linspace(1, 0, 20)[:, None]
    th = Thresholds()
    rec = classify_run(synthetic(u, v, np.linspace(0, 300, 20)), th)
    if rec.outcome is Outcome.COEXTINCTION:
        assert rec.sup_u_final < th.eps_ext and rec.sup_v_final < th.eps_ext


def test_sweep_records_failures_and_continues(monkeypatch):
    real = ex.run_scenario

    def flaky(p, template):
        if p.b == 0.2:
            raise FloatingPointError("synthetic failure")
        return real(p, template)

    monkeypatch.setattr(ex, "run_scenario", flaky)
    tmpl = ScenarioTemplate(grid=Grid1D(L=100, N=100, T_end=10, M=100))
    res = sweep([0.55], [0.2, 0.1], tmpl, jobs=1)
    assert [r.params.b for r in res.records] == [0.1, 0.2]
    assert res.records[1].outcome is Outcome.FAILED
    assert "synthetic failure" in res.records[1].error
    assert res.records[0].outcome is not Outcome.FAILED
    assert res.table().tolist() == [[ex.dio.OUTCOME_CODES[res.records[0].outcome.value], -1]]


def test_sweep_rejects_out_of_range_values():
    with pytest.raises(ValueError):
        sweep([1.2], [0.1], jobs=1)


def test_coextinction_boundary_rule():
    p = make_params(0.55, 0.1)
    labels = [Outcome.UNDECIDED, Outcome.COEXTINCTION, Outcome.COEXTINCTION, Outcome.DRIVE_ONLY, Outcome.COEXTINCTION]
    recs = [ex.OutcomeRecord(p, o, 0, 0) for o in labels]
    res = SweepResult([0.55], [0.1, 0.3, 0.5, 0.7, 0.9], recs)
    assert res.coextinction_boundary() == {0.55: 0.5}
    res = SweepResult([0.45], [0.1], recs[:1])
    assert res.coextinction_boundary() == {}


def test_coarse_sweep_column(tmp_path):
    res = sweep([0.45, 0.55], [0.8, 0.45, 0.75], ScenarioTemplate(grid=COARSE), jobs=2)
    got = {(r.params.a, r.params.b): r.outcome for r in res.records}
    assert got[(0.55, 0.45)] is Outcome.COEXTINCTION
    assert got[(0.55, 0.75)] is not Outcome.COEXTINCTION
    assert got[(0.55, 0.8)] is not Outcome.COEXTINCTION
    assert all(got[(0.45, b)] is not Outcome.COEXTINCTION for b in (0.45, 0.75, 0.8))
    assert res.coextinction_boundary() == {0.55: 0.45}
    paths = write_sweep_outputs(res, tmp_path)
    assert [p.name for p in paths] == ["sweep.csv", "sweep_summary.txt"]
    summary = (tmp_path / "sweep_summary.txt").read_text()
    assert "a=0.55 largest_coextinction_b=0.45" in summary
    # at this coarse time step rounding near (0, 1) escapes T and is reported
    flagged = [r for r in res.records if r.max_overshoot > ex.OVERSHOOT_TOL]
    assert flagged and all(f"overshoot a={r.params.a} b={r.params.b}" in summary for r in flagged)


def test_figure_table():
    assert set(FIGURES) == {"Fig3A", "Fig3B", "Fig4A", "Fig4B", "Fig5", "Fig6", "Fig7A", "Fig7B"}
    assert Outcome.COEXTINCTION not in FIGURES["Fig3B"].accept
    with pytest.raises(KeyError):
        reproduce("Fig1")


def test_reproduce_writes_bundle(tmp_path):
    rep = reproduce("Fig7B", tmp_path, seed=2)
    assert rep.ok and rep.summary_line().startswith("outcome: CornerExtinction in")
    names = sorted(p.name for p in rep.files)
    assert names[-1] == "traj_19.csv" and "summary.txt" in names
    assert "match=true" in (tmp_path / "summary.txt").read_text()
