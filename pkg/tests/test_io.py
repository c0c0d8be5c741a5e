import math
import os

import numpy as np
import pytest

from drivebrake import io as dio
from drivebrake.experiments import Outcome, OutcomeRecord
from drivebrake.model import make_params
from drivebrake.pde import FieldState, Fronts, Raster


def test_fmt():
    assert dio.fmt(None) == "" and dio.fmt(math.nan) == ""
    assert dio.fmt(0.1) == "0.1"
    x = 1 / 3
    assert float(dio.fmt(x)) == x
    assert dio.fmt(np.float64(2.5)) == "2.5"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = dio.atomic_write_text(tmp_path / "sub" / "a.csv", "x\n1\n")
    assert p.read_text() == "x\n1\n"
    assert os.listdir(tmp_path / "sub") == ["a.csv"]


def test_interrupted_write_keeps_old_file(tmp_path, monkeypatch):
    target = tmp_path / "a.csv"
    target.write_text("old\n")

    def boom(src, dst):
        raise KeyboardInterrupt

    monkeypatch.setattr(dio.os, "replace", boom)
    with pytest.raises(KeyboardInterrupt):
        dio.atomic_write_text(target, "new\n" * 1000)
    assert target.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["a.csv"]


def test_snapshot_file(tmp_path):
    x = np.array([0.0, 0.5])
    s = FieldState(np.array([0.1, 0.2]), np.array([0.0, 0.3]), t=150.0)
    p = dio.write_snapshot(tmp_path, s, x)
    assert p.name == "snap_t150.csv"
    assert p.read_text() == "x,u,v\n0.0,0.1,0.0\n0.5,0.2,0.3\n"
    s.n = np.array([1.0, 2.0])
    s.t = 12.5
    t = dio.read_csv_table(dio.write_snapshot(tmp_path, s, x))
    assert list(t) == ["x", "u", "v", "n"]
    np.testing.assert_array_equal(t["n"], [1.0, 2.0])


def test_raster_files(tmp_path):
    rng = np.random.default_rng(0)
    x = np.arange(9) * 0.25
    times = np.array([0.0, 1.0, 2.0])
    u = rng.random((3, 9))
    r = Raster(times, x, u, 1 - u)
    dio.write_raster(tmp_path, r, stride=2)
    lines = (tmp_path / "raster_u.csv").read_text().splitlines()
    assert lines[0].split(",") == ["t"] + [repr(float(v)) for v in x[::2]]
    assert len(lines) == 4 and lines[2].split(",")[0] == "1.0"
    img = dio.read_pgm(tmp_path / "raster_v.pgm")
    assert img.shape == (3, 5)
    np.testing.assert_array_equal(img, np.rint(255 * (1 - u[:, ::2])).astype(np.uint8))
    assert (tmp_path / "raster_u.pgm").read_bytes().startswith(b"P5\n5 3\n255\n")


def test_pgm_rejects_other_formats(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        dio.read_pgm(tmp_path / "x.pgm")


def test_fronts_file_has_empty_cells(tmp_path):
    fr = Fronts(np.array([0.0, 1.0]), np.array([3.0, 3.5]), np.array([math.nan, 2.0]), 0.5, None, (0, 1))
    text = dio.write_fronts(tmp_path, fr).read_text()
    assert text == "t,x_front_u,x_front_v\n0.0,3.0,\n1.0,3.5,2.0\n"


def test_sweep_csv():
    recs = [
        OutcomeRecord(make_params(0.55, 0.45), Outcome.COEXTINCTION, 1e-9, 2e-9),
        OutcomeRecord(make_params(0.45, 0.35), Outcome.JOINT_INVASION, 0.3, 0.2, 1.5, 1.4),
        OutcomeRecord(make_params(0.45, 0.4), Outcome.FAILED, math.nan, math.nan, error="boom"),
    ]
    lines = dio.sweep_csv(recs).splitlines()
    assert lines[0].startswith("# outcome codes:")
    assert "0=Coextinction" in lines[0] and "-1=Failed" in lines[0]
    assert lines[1] == "a,b,outcome_code,sup_u_final,sup_v_final,u_speed,v_speed"
    assert lines[2] == "0.55,0.45,0,1e-09,2e-09,,"
    assert lines[3] == "0.45,0.35,1,0.3,0.2,1.5,1.4"
    assert lines[4] == "0.45,0.4,-1,,,,"


def test_kv_text():
    assert dio.kv_text({"a": 1, "outcome": "Coextinction"}) == "a=1\noutcome=Coextinction\n"
