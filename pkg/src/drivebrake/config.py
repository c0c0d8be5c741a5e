"""Run configuration: a flat ``key = value`` text file.

Keys may be dotted (``grid.N = 3200``), ``#`` starts a comment, values are
JSON literals or bare words (``variant = Nagylaki``). Unknown keys are
rejected. Every error names the file line it comes from.

Initial-condition blocks are declared as ``ic.<name>.field``,
``ic.<name>.lo``, ``ic.<name>.hi``, ``ic.<name>.level`` and optionally
``ic.<name>.release``; they are added to the blocks of ``ic.preset``
(``appendix`` or ``none``).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .experiments import BRAKE_RELEASE, Thresholds
from .model import Params, Variant, make_params
from .pde import Block, DriftSpec, Grid1D, InitialCondition


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: Optional[int] = None):
        where = f"{path}:{line}: " if path is not None and line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line


@dataclass
class PhaseSettings:
    n_starts: int = 10
    t_end: float = 1000.0
    dt_max: float = 0.01
    tail_fraction: float = 0.2


@dataclass
class RunConfig:
    params: Params
    grid: Grid1D = field(default_factory=Grid1D.desk)
    ic: InitialCondition = field(default_factory=lambda: InitialCondition.appendix(1280.0, BRAKE_RELEASE))
    drift: DriftSpec = field(default_factory=DriftSpec)
    n0: float = 1.0
    snapshots: Tuple[float, ...] = (0.0, 80.0, 150.0, 300.0)
    out_dir: Path = Path("out")
    seed: int = 0
    level_u: float = 0.5
    level_v: float = 0.1
    thresholds: Thresholds = field(default_factory=Thresholds)
    phase: PhaseSettings = field(default_factory=PhaseSettings)
    sweep_a: Tuple[float, ...] = ()
    sweep_b: Tuple[float, ...] = ()
    raster_dt: float = 1.0
    raster_stride: int = 4
    grid_explicit: bool = False


# -- value checkers: each returns the converted value or raises ValueError --


def _real(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    lb = "(" if lo_open else "["
    rb = ")" if hi_open else "]"
    dom = f"a real in {lb}{lo:g}, {hi:g}{rb}" if math.isfinite(lo) and math.isfinite(hi) else (
        f"a real > {lo:g}" if lo_open and math.isfinite(lo) else f"a real >= {lo:g}" if math.isfinite(lo) else "a real"
    )

    def check(x):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ValueError(f"expected {dom}")
        x = float(x)
        ok = math.isfinite(x) and (x > lo if lo_open else x >= lo) and (x < hi if hi_open else x <= hi)
        if not ok:
            raise ValueError(f"expected {dom}")
        return x

    return check


def _int(lo=None):
    def check(x):
        if isinstance(x, bool) or not isinstance(x, int) or (lo is not None and x < lo):
            raise ValueError(f"expected an integer >= {lo}" if lo is not None else "expected an integer")
        return x

    return check


def _choice(*options):
    def check(x):
        if x not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return x

    return check


def _real_list(each):
    def check(x):
        if not isinstance(x, list):
            raise ValueError("expected a list of reals, e.g. [0.1, 0.2]")
        return tuple(each(v) for v in x)

    return check


def _text(x):
    if not isinstance(x, str) or not x:
        raise ValueError("expected a non-empty string")
    return x


_POS = _real(0.0, lo_open=True)
_UNIT = _real(0.0, 1.0)

SCHEMA: Dict[str, Callable] = {
    "a": _real(0.0, 1.0, True, True),
    "b": _real(0.0, 1.0, False, True),
    "h": _UNIT,
    "variant": _choice("Tanaka", "Nagylaki"),
    "w_OO": _POS,
    "n0": _POS,
    "grid.L": _POS,
    "grid.N": _int(2),
    "grid.T_end": _POS,
    "grid.M": _int(1),
    "ic.preset": _choice("appendix", "none"),
    "ic.brake_release": _real(0.0),
    "drift.profile": _choice("none", "tanh", "exp"),
    "drift.n_left": _POS,
    "drift.n_right": _POS,
    "drift.center": _real(),
    "drift.width": _POS,
    "drift.slope": _real(),
    "snapshots": _real_list(_real(0.0)),
    "out": _text,
    "seed": _int(0),
    "fronts.level_u": _real(0.0, 1.0, True, True),
    "fronts.level_v": _real(0.0, 1.0, True, True),
    "thresholds.eps_ext": _real(0.0, 1.0, True, True),
    "thresholds.persist_v": _real(0.0, 1.0, True, True),
    "thresholds.joint_level_u": _real(0.0, 1.0, True, True),
    "thresholds.trail_width": _POS,
    "phase.n_starts": _int(1),
    "phase.t_end": _POS,
    "phase.dt_max": _POS,
    "phase.tail_fraction": _real(0.0, 1.0, True, False),
    "sweep.a": _real_list(_real(0.0, 1.0, True, True)),
    "sweep.b": _real_list(_real(0.0, 1.0, False, True)),
    "output.raster_dt": _POS,
    "output.raster_stride": _int(1),
}

BLOCK_SCHEMA: Dict[str, Callable] = {
    "field": _choice("u", "v"),
    "lo": _real(),
    "hi": _real(),
    "level": _UNIT,
    "release": _real(0.0),
}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_.]*)\s*[=:]\s*(.*?)\s*$")
_BLOCK_KEY = re.compile(r"^ic\.([A-Za-z0-9_]+)\.([a-z]+)$")


def _value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare word


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def parse_text(text: str, path="<config>") -> RunConfig:
    entries: Dict[str, Tuple[object, int]] = {}
    blocks: Dict[str, Dict[str, Tuple[object, int]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).strip()
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            raise ConfigError(f"cannot parse {body!r}; expected 'key = value'", path, lineno)
        key, raw = m.group(1), m.group(2)
        if raw == "":
            raise ConfigError(f"{key}: missing value", path, lineno)
        val = _value(raw)
        bm = _BLOCK_KEY.match(key)
        if key in SCHEMA:
            target, name, check = entries, key, SCHEMA[key]
        elif bm and bm.group(2) in BLOCK_SCHEMA and key not in ("ic.preset", "ic.brake_release"):
            target = blocks.setdefault(bm.group(1), {})
            name, check = bm.group(2), BLOCK_SCHEMA[bm.group(2)]
        else:
            raise ConfigError(f"unknown key {key!r}", path, lineno)
        if name in target:
            raise ConfigError(f"{key}: duplicate key (first set on line {target[name][1]})", path, lineno)
        try:
            target[name] = (check(val), lineno)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}, found {raw}", path, lineno) from None
    return _build(entries, blocks, path)


def _build(e, blocks, path) -> RunConfig:
    def get(key, default=None):
        return e[key][0] if key in e else default

    def line(key):
        return e[key][1] if key in e else None

    for req in ("a", "b"):
        if req not in e:
            raise ConfigError(f"missing required key {req!r}", path)
    variant = get("variant", "Tanaka")
    w_oo = get("w_OO")
    if variant == "Nagylaki" and w_oo is None:
        raise ConfigError("variant: Nagylaki requires w_OO (constant wild-type fitness > 0)", path, line("variant"))
    if variant == "Tanaka" and w_oo is not None:
        raise ConfigError("w_OO: only meaningful with variant = Nagylaki", path, line("w_OO"))
    params = make_params(get("a"), get("b"), get("h", 0.5), variant=Variant(variant), w_oo=w_oo)

    grid_keys = {"L": "grid.L", "N": "grid.N", "T_end": "grid.T_end", "M": "grid.M"}
    grid = Grid1D.desk(**{k: get(v) for k, v in grid_keys.items() if v in e})

    release = get("ic.brake_release", BRAKE_RELEASE)
    preset = get("ic.preset", "appendix")
    ic_blocks: List[Block] = list(InitialCondition.appendix(grid.L, release).blocks) if preset == "appendix" else []
    for name in sorted(blocks):
        spec = blocks[name]
        first = min(ln for _, ln in spec.values())
        missing = [k for k in ("field", "lo", "hi", "level") if k not in spec]
        if missing:
            raise ConfigError(f"ic.{name}: missing {', '.join(missing)}", path, first)
        try:
            ic_blocks.append(
                Block(spec["field"][0], spec["lo"][0], spec["hi"][0], spec["level"][0], spec.get("release", (0.0, 0))[0])
            )
        except ValueError as exc:
            raise ConfigError(f"ic.{name}: {exc}", path, first) from None
    drift_kw = {k.split(".")[1]: get(k) for k in SCHEMA if k.startswith("drift.") and k in e}
    try:
        drift = DriftSpec(**drift_kw)
    except ValueError as exc:
        raise ConfigError(f"drift: {exc}", path, line("drift.profile")) from None
    if drift.profile != "none" and variant == "Nagylaki":
        raise ConfigError("drift.profile: the Nagylaki variant evolves n itself", path, line("drift.profile"))

    d = Thresholds()
    thresholds = Thresholds(
        eps_ext=get("thresholds.eps_ext", d.eps_ext),
        persist_v=get("thresholds.persist_v", d.persist_v),
        joint_level_u=get("thresholds.joint_level_u", d.joint_level_u),
        trail_width=get("thresholds.trail_width", d.trail_width),
        level_u=get("fronts.level_u", d.level_u),
        level_v=get("fronts.level_v", d.level_v),
    )
    ph = PhaseSettings()
    phase = PhaseSettings(
        get("phase.n_starts", ph.n_starts),
        get("phase.t_end", ph.t_end),
        get("phase.dt_max", ph.dt_max),
        get("phase.tail_fraction", ph.tail_fraction),
    )
    return RunConfig(
        params=params,
        grid=grid,
        ic=InitialCondition(tuple(ic_blocks)),
        drift=drift,
        n0=get("n0", 1.0),
        snapshots=tuple(sorted(get("snapshots", (0.0, 80.0, 150.0, grid.T_end)))),
        out_dir=Path(get("out", "out")),
        seed=get("seed", 0),
        level_u=thresholds.level_u,
        level_v=thresholds.level_v,
        thresholds=thresholds,
        phase=phase,
        sweep_a=get("sweep.a", ()),
        sweep_b=get("sweep.b", ()),
        raster_dt=get("output.raster_dt", 1.0),
        raster_stride=get("output.raster_stride", 4),
        grid_explicit=any(v in e for v in grid_keys.values()),
    )


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", path)
    return parse_text(path.read_text(), path)
