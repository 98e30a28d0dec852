"""Vehicle speed search and per-cell fruit picking schedules."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..model import FruitMap, HarvesterConfig, cell_bounds
from ..motion import max_picking_duration, picking_duration
from ..sequencing import ArmSequence, HarvesterSequence, SKIP
from . import kernels


class NoFeasiblePlan(RuntimeError):
    def __init__(self, message: str, diagnostic: str = ""):
        super().__init__(message + (f": {diagnostic}" if diagnostic else ""))
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class ScheduleEntry:
    fruit_id: int
    arrival: float
    depart: float
    zone: int = -1


@dataclass(frozen=True)
class CellSchedule:
    cell: int
    rows: tuple[tuple[ScheduleEntry, ...], ...]
    makespan: float


@dataclass(frozen=True)
class PlanResult:
    vehicle_speed: float
    makespan: float
    cells: tuple[CellSchedule, ...]
    strategy: str
    sequence: HarvesterSequence | None = None
    v_high: float = math.nan

    @property
    def n_fruits(self) -> int:
        return sum(len(row) for cs in self.cells for row in cs.rows)

    def to_dict(self) -> dict:
        return {
            "vehicle_speed": self.vehicle_speed,
            "makespan": self.makespan,
            "strategy": self.strategy,
            "v_high": self.v_high,
            "cells": [
                {"cell": cs.cell, "makespan": cs.makespan,
                 "rows": [[{"fruit_id": e.fruit_id, "arrival": e.arrival, "depart": e.depart,
                            "zone": e.zone} for e in row] for row in cs.rows]}
                for cs in self.cells
            ],
            "sequence": self.sequence.to_dict() if self.sequence is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "PlanResult":
        cells = tuple(
            CellSchedule(c["cell"],
                         tuple(tuple(ScheduleEntry(e["fruit_id"], e["arrival"], e["depart"], e.get("zone", -1))
                                     for e in row) for row in c["rows"]),
                         c.get("makespan", max((e["depart"] for row in c["rows"] for e in row), default=0.0)))
            for c in d["cells"]
        )
        seq = HarvesterSequence.from_dict(d["sequence"]) if d.get("sequence") else None
        return cls(d["vehicle_speed"], d["makespan"], cells, d["strategy"], seq, d.get("v_high", math.nan))


class CellResult(NamedTuple):
    feasible: bool
    makespan: float | None
    schedule: CellSchedule | None
    failure: str = ""


class _CellArrays:
    """Flat ``R x K`` view of one cell's sequences, reused across speed probes."""

    def __init__(self, cell_seq: Sequence[ArmSequence], fm: FruitMap, cfg: HarvesterConfig, c: int):
        R = len(cell_seq)
        K = len(cell_seq[0].entries) if R else 0
        self.c = c
        self.ids = np.full((R, K), -1, dtype=np.int64)
        self.zones = np.full((R, K), -1, dtype=np.int64)
        self.fx = np.zeros((R, K))
        self.fz = np.zeros((R, K))
        self.tp = np.zeros((R, K))
        self.valid = np.zeros((R, K), dtype=np.uint8)
        for r, seq in enumerate(cell_seq):
            if len(seq.entries) != K:
                raise ValueError("arm sequences of a cell must have equal (SKIP-padded) length")
            for k, (zone, fid) in enumerate(seq.entries):
                self.zones[r, k] = zone
                if fid is SKIP:
                    continue
                f = fm[fid]
                self.ids[r, k] = fid
                self.fx[r, k], self.fz[r, k] = f.x, f.z
                self.tp[r, k] = picking_duration(f, cfg)
                self.valid[r, k] = 1
        states = cfg.arm_states()[(c - 1) * cfg.rows:c * cfg.rows]
        self.x0 = np.array([s.px for s in states], dtype=float)
        self.z0 = np.array([s.pz for s in states], dtype=float)
        self.rear0, self.front0 = cell_bounds(cfg, c, 0.0)
        self.cfg = cfg

    def run(self, v: float, kernel=None) -> CellResult:
        cfg = self.cfg
        kernel = kernel or kernels.schedule_cell
        ok, fr, fk, arrival = kernel(self.fx, self.fz, self.tp, self.valid, self.x0, self.z0, float(v),
                                     cfg.limits.v_max, cfg.limits.a_max, self.front0, self.rear0,
                                     cfg.clearance)
        if not ok:
            fid = int(self.ids[fr, fk])
            return CellResult(False, None, None,
                              f"cell {self.c} row {fr + 1}: fruit {fid} (x={self.fx[fr, fk]:.4f}) leaves the "
                              f"cell before picking completes at v={v:.6g}")
        rows = []
        makespan = 0.0
        for r in range(self.fx.shape[0]):
            row = []
            for k in np.flatnonzero(self.valid[r]):
                a = float(arrival[r, k])
                dep = a + float(self.tp[r, k])
                row.append(ScheduleEntry(int(self.ids[r, k]), a, dep, int(self.zones[r, k])))
                makespan = max(makespan, dep)
            rows.append(tuple(row))
        return CellResult(True, makespan, CellSchedule(self.c, tuple(rows), makespan))


def cell_scheduling_at_v(cell_seq: Sequence[ArmSequence], v: float, cfg: HarvesterConfig,
                         fm: FruitMap, c: int | None = None) -> CellResult:
    """Schedule the arms of one cell at vehicle speed ``v``.

    Returns ``(feasible, makespan, schedule, failure)``; ``failure`` names the
    fruit that would leave the cell before its dwell ends.
    """
    if v <= 0:
        raise ValueError(f"vehicle speed must be > 0, got {v}")
    c = c if c is not None else (cell_seq[0].arm.cell if cell_seq else 1)
    return _CellArrays(cell_seq, fm, cfg, c).run(v)


def _probe(cells: list[_CellArrays], v: float) -> tuple[bool, list[CellSchedule], str]:
    out = []
    for ca in cells:
        res = ca.run(v)
        if not res.feasible:
            return False, out, res.failure
        out.append(res.schedule)
    return True, out, ""


def probe_speed(seq: HarvesterSequence, fm: FruitMap, cfg: HarvesterConfig, v: float) -> bool:
    """True iff every cell of ``seq`` is schedulable at speed ``v``."""
    cells = [_CellArrays(seq.cell(c), fm, cfg, c) for c in range(1, cfg.cells + 1)]
    return _probe(cells, v)[0]


def initial_speed_bound(fm: FruitMap, cfg: HarvesterConfig) -> float:
    """Upper end of the speed search: a fruit must stay in a cell for its whole dwell."""
    tp_max = max_picking_duration(fm, cfg)
    return cfg.cell_length / tp_max if tp_max > 0 else cfg.limits.v_max


def _search(seq: HarvesterSequence, fm: FruitMap, cfg: HarvesterConfig, v_high: float):
    cells = [_CellArrays(seq.cell(c), fm, cfg, c) for c in range(1, cfg.cells + 1)]
    lo, hi = 0.0, v_high
    best = None
    failure = ""
    while hi - lo > cfg.epsilon_v:
        mid = (hi + lo) / 2.0
        ok, scheds, why = _probe(cells, mid)
        if ok:
            lo = mid
            best = (mid, scheds)
        else:
            hi = mid
            failure = why
    if best is None:
        ok, scheds, why = _probe(cells, cfg.epsilon_v)
        if ok:
            best = (cfg.epsilon_v, scheds)
        else:
            failure = why
    return best, failure


def plan_velocity_and_schedule(candidates: Sequence[HarvesterSequence], cfg: HarvesterConfig,
                               fm: FruitMap) -> PlanResult:
    """Binary-search the fastest feasible speed for each candidate; keep the
    candidate with the smallest makespan (earliest on ties)."""
    if not candidates:
        raise ValueError("at least one candidate sequence is required")
    cfg.check()
    v_high = initial_speed_bound(fm, cfg)
    if len(fm) == 0:
        empty = tuple(CellSchedule(c, tuple(() for _ in range(cfg.rows)), 0.0) for c in range(1, cfg.cells + 1))
        return PlanResult(v_high, 0.0, empty, candidates[0].strategy.value, candidates[0], v_high)
    if any(picking_duration(f, cfg) <= 0 for f in fm):
        raise ValueError("every fruit needs a positive picking duration")

    best: PlanResult | None = None
    failure = ""
    seen: dict[tuple, PlanResult | None] = {}
    for cand in candidates:
        key = tuple(a.entries for a in cand.arms)
        if key in seen:
            continue
        found, why = _search(cand, fm, cfg, v_high)
        if found is None:
            seen[key] = None
            failure = failure or why
            continue
        v, scheds = found
        plan = PlanResult(v, max(cs.makespan for cs in scheds), tuple(scheds), cand.strategy.value, cand, v_high)
        seen[key] = plan
        if best is None or plan.makespan < best.makespan:
            best = plan
    if best is None:
        raise NoFeasiblePlan("no feasible plan", failure)
    return best
