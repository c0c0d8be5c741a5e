"""File outputs. Every file is written to a temporary sibling and renamed
into place, so an interrupted run never leaves a truncated file."""

from __future__ import annotations

import io
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def fmt(x) -> str:
    """Shortest round-tripping decimal; empty string for None or nan."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _table(header: Sequence[str], columns: Sequence[np.ndarray]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(fmt(c) for c in row) + "\n")
    return buf.getvalue()


def time_tag(t: float) -> str:
    return f"{t:g}"


def write_snapshot(out_dir, state, x) -> Path:
    header = ["x", "u", "v"]
    cols = [x, state.u, state.v]
    if state.n is not None:
        header.append("n")
        cols.append(state.n)
    return atomic_write_text(Path(out_dir) / f"snap_t{time_tag(state.t)}.csv", _table(header, cols))


def write_snapshots(out_dir, snapshots: Mapping[float, object], x) -> list:
    return [write_snapshot(out_dir, snapshots[t], x) for t in sorted(snapshots)]


def raster_csv(times, x, field, stride: int = 1) -> str:
    xs = x[::stride]
    buf = io.StringIO()
    buf.write("t," + ",".join(fmt(v) for v in xs) + "\n")
    for t, row in zip(times, field):
        buf.write(fmt(t) + "," + ",".join(fmt(v) for v in row[::stride]) + "\n")
    return buf.getvalue()


def pgm_bytes(field: np.ndarray) -> bytes:
    """Binary 8-bit graymap: row = time, column = space, value round(255 f)."""
    f = np.asarray(field, dtype=float)
    img = np.clip(np.rint(255.0 * f), 0, 255).astype(np.uint8)
    rows, cols = img.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + img.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PGM file")
    cols, rows, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(data[m.end(): m.end() + rows * cols], dtype=np.uint8).reshape(rows, cols)


def write_raster(out_dir, raster, stride: int = 1, heatmap: bool = True) -> list:
    out_dir = Path(out_dir)
    paths = []
    for name, field in (("u", raster.u), ("v", raster.v)):
        paths.append(atomic_write_text(out_dir / f"raster_{name}.csv", raster_csv(raster.times, raster.x, field, stride)))
        if heatmap:
            paths.append(atomic_write_bytes(out_dir / f"raster_{name}.pgm", pgm_bytes(field[:, ::stride])))
    return paths


def write_fronts(out_dir, fronts) -> Path:
    return atomic_write_text(
        Path(out_dir) / "fronts.csv",
        _table(["t", "x_front_u", "x_front_v"], [fronts.times, fronts.x_u, fronts.x_v]),
    )


def write_trajectory(path, traj) -> Path:
    return atomic_write_text(path, _table(["t", "u", "v"], [traj.times, traj.u, traj.v]))


def kv_text(record: Mapping[str, object]) -> str:
    return "".join(f"{k}={v}\n" for k, v in record.items())


def write_kv(path, record: Mapping[str, object]) -> Path:
    return atomic_write_text(path, kv_text(record))


OUTCOME_CODES = {"Coextinction": 0, "JointInvasion": 1, "DrivePersistsBrakeDies": 2, "Undecided": 3, "Failed": -1}

SWEEP_COLUMNS = ["a", "b", "outcome_code", "sup_u_final", "sup_v_final", "u_speed", "v_speed"]


def sweep_csv(records: Iterable) -> str:
    legend = " ".join(f"{code}={name}" for name, code in OUTCOME_CODES.items())
    buf = io.StringIO()
    buf.write(f"# outcome codes: {legend}\n")
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in records:
        row = [r.params.a, r.params.b, OUTCOME_CODES[r.outcome.value], r.sup_u_final, r.sup_v_final, r.u_speed, r.v_speed]
        buf.write(",".join(str(c) if isinstance(c, int) else fmt(c) for c in row) + "\n")
    return buf.getvalue()


def write_sweep(out_dir, records) -> Path:
    return atomic_write_text(Path(out_dir) / "sweep.csv", sweep_csv(records))


def read_csv_table(path) -> dict:
    """Read a CSV written here back into {column: float array} (empty -> nan)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    cols = list(zip(*[[float(c) if c else math.nan for c in ln.split(",")] for ln in lines[1:]]))
    return {h: np.array(c) for h, c in zip(header, cols)} if cols else {h: np.array([]) for h in header}


def optional_float(x: Optional[float]):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)
