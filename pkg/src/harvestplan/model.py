"""Shared domain types: harvester configuration, fruit maps and cell geometry.

Coordinates are world-frame throughout: x runs along the row (the vehicle
travels in +x), z is height, y points into the canopy.  Cell 1 is the
front cell; cell ``c`` spans ``[x_front_init - c*l, x_front_init - (c-1)*l]``
at t = 0 and translates with the vehicle.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

PICKING_MODES = ("depth-aware", "constant")
CLAIM_ORDERS = ("front-first", "rear-first")


class FruitMapError(ValueError):
    """A fruit record could not be accepted."""


class ConfigError(ValueError):
    """Configuration is malformed or violates an invariant."""


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float = 1.0
    a_max: float = 1.0


@dataclass(frozen=True)
class ArmState:
    """Initial arm state.  ``vx=None`` means "ride with the vehicle"."""

    px: float
    pz: float
    vx: float | None = None
    vz: float = 0.0


@dataclass(frozen=True)
class ArmId:
    cell: int
    row: int

    def index(self, rows: int) -> int:
        return (self.cell - 1) * rows + (self.row - 1)


@dataclass(frozen=True)
class HarvesterConfig:
    rows: int = 1
    cells: int = 1
    cell_length: float = 0.6
    frame_height: float = 2.0
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    dt: float = 0.1
    td_grasp: float = 2.0
    epsilon_v: float = 1e-4
    x_front_init: float = 0.0
    front_clearance: float | None = None
    initial_arm_states: tuple[ArmState, ...] | None = None
    picking_duration_mode: str = "depth-aware"
    claim_order: str = "front-first"

    @property
    def n_arms(self) -> int:
        return self.rows * self.cells

    @property
    def clearance(self) -> float:
        if self.front_clearance is not None:
            return self.front_clearance
        return self.limits.v_max ** 2 / (2.0 * self.limits.a_max)

    def arm_states(self) -> tuple[ArmState, ...]:
        """Initial states, cell-major; defaults to cell centres at evenly spaced heights."""
        if self.initial_arm_states is not None:
            return self.initial_arm_states
        states = []
        for c in range(1, self.cells + 1):
            x = self.x_front_init - (c - 0.5) * self.cell_length
            for r in range(1, self.rows + 1):
                states.append(ArmState(x, self.frame_height * r / (self.rows + 1)))
        return tuple(states)

    def arm_state(self, arm: ArmId) -> ArmState:
        return self.arm_states()[arm.index(self.rows)]

    def check(self) -> "HarvesterConfig":
        problems = validate_config(self)
        if problems:
            raise ConfigError("; ".join(str(p) for p in problems))
        return self


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def validate_config(cfg: HarvesterConfig) -> list[Violation]:
    """Return every violated configuration invariant (empty when valid)."""
    out: list[Violation] = []

    def need(ok: bool, name: str, msg: str) -> None:
        if not ok:
            out.append(Violation(name, msg))

    need(isinstance(cfg.rows, int) and cfg.rows >= 1, "rows", f"must be an integer >= 1, got {cfg.rows!r}")
    need(isinstance(cfg.cells, int) and cfg.cells >= 1, "cells", f"must be an integer >= 1, got {cfg.cells!r}")
    need(cfg.cell_length > 0, "cell_length", f"must be > 0, got {cfg.cell_length}")
    need(cfg.frame_height > 0, "frame_height", f"must be > 0, got {cfg.frame_height}")
    need(cfg.limits.v_max > 0, "v_max", f"must be > 0, got {cfg.limits.v_max}")
    need(cfg.limits.a_max > 0, "a_max", f"must be > 0, got {cfg.limits.a_max}")
    need(cfg.dt > 0, "dt", f"must be > 0, got {cfg.dt}")
    need(cfg.epsilon_v > 0, "epsilon_v", f"must be > 0, got {cfg.epsilon_v}")
    need(cfg.td_grasp >= 0, "td_grasp", f"must be >= 0, got {cfg.td_grasp}")
    if cfg.front_clearance is not None:
        need(cfg.front_clearance >= 0, "front_clearance", f"must be >= 0, got {cfg.front_clearance}")
    need(cfg.picking_duration_mode in PICKING_MODES, "picking_duration_mode",
         f"must be one of {PICKING_MODES}, got {cfg.picking_duration_mode!r}")
    need(cfg.claim_order in CLAIM_ORDERS, "claim_order",
         f"must be one of {CLAIM_ORDERS}, got {cfg.claim_order!r}")

    states = cfg.initial_arm_states
    if states is not None and isinstance(cfg.rows, int) and isinstance(cfg.cells, int):
        if len(states) != cfg.rows * cfg.cells:
            out.append(Violation("initial_arm_states",
                                 f"expected {cfg.rows * cfg.cells} states, got {len(states)}"))
        else:
            for c in range(cfg.cells):
                zs = [s.pz for s in states[c * cfg.rows:(c + 1) * cfg.rows]]
                if any(b <= a for a, b in zip(zs, zs[1:])):
                    out.append(Violation("initial_arm_states",
                                         f"cell {c + 1}: initial z must strictly increase with row, got {zs}"))
    return out


def cell_bounds(cfg: HarvesterConfig, c: int, t: float, v: float = 0.0) -> tuple[float, float]:
    """(x_rear, x_front) of cell ``c`` at time ``t`` for vehicle speed ``v``."""
    shift = cfg.x_front_init + v * t
    return shift - c * cfg.cell_length, shift - (c - 1) * cfg.cell_length


# --------------------------------------------------------------------------
# Fruits

@dataclass(frozen=True)
class Fruit:
    id: int
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class FruitMap:
    fruits: tuple[Fruit, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.fruits, key=lambda f: (f.x, f.z, f.id)))
        object.__setattr__(self, "fruits", ordered)
        dups = [i for i, n in Counter(f.id for f in ordered).items() if n > 1]
        if dups:
            raise FruitMapError(f"duplicate fruit id {min(dups)}")
        for f in ordered:
            if f.y < 0:
                raise FruitMapError(f"fruit {f.id}: y must be >= 0, got {f.y}")
        object.__setattr__(self, "_index", {f.id: f for f in ordered})

    def __len__(self) -> int:
        return len(self.fruits)

    def __iter__(self):
        return iter(self.fruits)

    def __getitem__(self, fruit_id: int) -> Fruit:
        return self._index[fruit_id]  # type: ignore[attr-defined]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.fruits], dtype=float)

    @classmethod
    def from_records(cls, records: Iterable[Sequence[float]], height: float | None = None) -> "FruitMap":
        fruits = []
        for rec in records:
            fid, x, y, z = rec
            fruits.append(Fruit(int(fid), float(x), float(y), float(z)))
        fm = cls(tuple(fruits))
        if height is not None:
            for f in fm:
                _check_height(f, height)
        return fm


def _check_height(f: Fruit, height: float, where: str = "") -> None:
    if not 0.0 <= f.z <= height:
        raise FruitMapError(f"{where}fruit {f.id}: z={f.z} outside [0, {height}]")


def _parse_records(text: str, is_json: bool) -> list[tuple[str, dict]]:
    if is_json:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FruitMapError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, list):
            raise FruitMapError("JSON fruit map must be an array of objects")
        return [(f"record {i}", rec) for i, rec in enumerate(data)]
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["id", "x", "y", "z"]:
        raise FruitMapError(f"line 1: expected header 'id,x,y,z', got {reader.fieldnames}")
    return [(f"line {i + 2}", row) for i, row in enumerate(reader)]


def load_fruit_map(source: str | Path | IO[str], height: float | None = None,
                   fmt: str | None = None) -> FruitMap:
    """Read a fruit map from CSV (``id,x,y,z``) or a JSON array of objects.

    Errors name the offending record (CSV line number or JSON index).
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text(encoding="utf-8")
        fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    else:
        text = source.read()
        fmt = fmt or ("json" if text.lstrip().startswith("[") else "csv")

    fruits: list[Fruit] = []
    where_by_id: dict[int, str] = {}
    for where, rec in _parse_records(text, fmt == "json"):
        try:
            fid_raw = rec["id"]
            fid = int(fid_raw)
            if float(fid_raw) != fid:
                raise ValueError
            f = Fruit(fid, float(rec["x"]), float(rec["y"]), float(rec["z"]))
        except (KeyError, TypeError, ValueError):
            raise FruitMapError(f"{where}: malformed record {rec!r}") from None
        if not all(math.isfinite(v) for v in (f.x, f.y, f.z)):
            raise FruitMapError(f"{where}: non-finite coordinate in fruit {f.id}")
        if f.id in where_by_id:
            raise FruitMapError(f"{where}: duplicate fruit id {f.id} (first seen at {where_by_id[f.id]})")
        if f.y < 0:
            raise FruitMapError(f"{where}: fruit {f.id}: y must be >= 0, got {f.y}")
        if height is not None:
            _check_height(f, height, f"{where}: ")
        where_by_id[f.id] = where
        fruits.append(f)
    return FruitMap(tuple(fruits))


def write_fruit_map(fm: FruitMap, path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = [{"id": f.id, "x": f.x, "y": f.y, "z": f.z} for f in fm]
        path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "z"])
        for f in fm:
            w.writerow([f.id, repr(f.x), repr(f.y), repr(f.z)])


# --------------------------------------------------------------------------
# Config files: flat ``key = value`` text, ``#`` comments.

_LIMIT_KEYS = ("v_max", "a_max")


def config_to_dict(cfg: HarvesterConfig) -> dict:
    out: dict = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if f.name == "limits":
            out["v_max"], out["a_max"] = val.v_max, val.a_max
        elif f.name == "initial_arm_states":
            if val is not None:
                out[f.name] = [[s.px, s.pz, s.vx, s.vz] for s in val]
        elif val is not None:
            out[f.name] = val
    return out


def config_from_dict(data: dict) -> HarvesterConfig:
    data = dict(data)
    known = {f.name for f in fields(HarvesterConfig)} | set(_LIMIT_KEYS)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = HarvesterConfig()
    limits = KinematicLimits(float(data.pop("v_max", base.limits.v_max)),
                             float(data.pop("a_max", base.limits.a_max)))
    kwargs: dict = {"limits": limits}
    for key, val in data.items():
        if key == "initial_arm_states":
            kwargs[key] = None if val is None else tuple(ArmState(*map(_opt_float, s)) for s in val)
        elif key in ("rows", "cells"):
            kwargs[key] = int(val)
        elif key in ("picking_duration_mode", "claim_order"):
            kwargs[key] = str(val)
        else:
            kwargs[key] = None if val is None else float(val)
    return HarvesterConfig(**kwargs)


def _opt_float(v):
    return None if v is None else float(v)


def parse_config_text(text: str) -> HarvesterConfig:
    data: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split(sep, 1))
        try:
            data[key] = json.loads(val)
        except json.JSONDecodeError:
            data[key] = val
    return config_from_dict(data)


def load_config(path: str | Path) -> HarvesterConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: HarvesterConfig) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in config_to_dict(cfg).items())


def with_geometry(cfg: HarvesterConfig, rows: int, cells: int) -> HarvesterConfig:
    """Copy of ``cfg`` for a different (R, C), dropping explicit arm states."""
    return replace(cfg, rows=rows, cells=cells, initial_arm_states=None)
