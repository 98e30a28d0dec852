"""Zone/cluster partitioning of a fruit map and candidate arm sequences.

Fruits are cut into along-row zones of ``m = R*C`` fruits, each zone is
split into ``R`` height bands (clusters) of ``C`` fruits, and every arm of
row ``r`` takes one fruit per zone from band ``r``.  Because bands are
height-ordered, the row ``r`` fruit of a zone never sits above the row
``r+1`` fruit of the same cell, so no pair of arms must cross.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .model import ArmId, FruitMap, HarvesterConfig

SKIP = None


class Strategy(str, Enum):
    TOPMOST = "TOPMOST"
    RIGHTMOST = "RIGHTMOST"


@dataclass(frozen=True)
class Zone:
    index: int
    fruit_ids: tuple[int, ...]
    x_interval: tuple[float, float]


@dataclass(frozen=True)
class Cluster:
    zone_index: int
    row: int
    fruit_ids: tuple[int, ...]


@dataclass(frozen=True)
class ArmSequence:
    arm: ArmId
    entries: tuple[tuple[int, int | None], ...]

    @property
    def fruit_ids(self) -> list[int]:
        return [fid for _, fid in self.entries if fid is not SKIP]


@dataclass(frozen=True)
class HarvesterSequence:
    strategy: Strategy
    rows: int
    cells: int
    arms: tuple[ArmSequence, ...]  # cell-major, row-minor

    def cell(self, c: int) -> tuple[ArmSequence, ...]:
        return self.arms[(c - 1) * self.rows:c * self.rows]

    @property
    def n_zones(self) -> int:
        return len(self.arms[0].entries) if self.arms else 0

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "rows": self.rows,
            "cells": self.cells,
            "arms": [
                {"cell": a.arm.cell, "row": a.arm.row,
                 "entries": [{"zone": z, "fruit_id": fid} for z, fid in a.entries]}
                for a in self.arms
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HarvesterSequence":
        arms = tuple(
            ArmSequence(ArmId(a["cell"], a["row"]),
                        tuple((e["zone"], e["fruit_id"]) for e in a["entries"]))
            for a in d["arms"]
        )
        return cls(Strategy(d["strategy"]), d["rows"], d["cells"], arms)


def build_zones(fm: FruitMap, cfg: HarvesterConfig) -> list[Zone]:
    """Merge per-fruit vertical strips into zones of ``R*C`` fruits, left to right."""
    if len(fm) == 0:
        return []
    m = cfg.rows * cfg.cells
    xs = [f.x for f in fm]
    # strip boundaries: midpoints between successive fruits, outer edges at the extreme fruits
    edges = [xs[0]] + [(a + b) / 2.0 for a, b in zip(xs, xs[1:])] + [xs[-1]]
    zones = []
    for zi, start in enumerate(range(0, len(fm), m)):
        stop = min(start + m, len(fm))
        ids = tuple(f.id for f in fm.fruits[start:stop])
        zones.append(Zone(zi, ids, (edges[start], edges[stop])))
    return zones


def split_clusters(zone: Zone, fm: FruitMap, rows: int, cells: int) -> list[Cluster]:
    """Chunk a zone bottom-up into ``rows`` height bands of ``cells`` fruits."""
    by_height = sorted((fm[i] for i in zone.fruit_ids), key=lambda f: (f.z, f.x, f.id))
    return [
        Cluster(zone.index, r + 1, tuple(f.id for f in by_height[r * cells:(r + 1) * cells]))
        for r in range(rows)
    ]


def _pick_key(strategy: Strategy):
    if strategy is Strategy.TOPMOST:
        return lambda f: (f.z, f.x, -f.id)
    return lambda f: (f.x, f.z, -f.id)


def generate_candidates(fm: FruitMap, cfg: HarvesterConfig) -> list[HarvesterSequence]:
    """One all-TOPMOST and one all-RIGHTMOST harvester sequence."""
    R, C = cfg.rows, cfg.cells
    zones = build_zones(fm, cfg)
    clusters = [split_clusters(z, fm, R, C) for z in zones]
    cell_order = range(1, C + 1) if cfg.claim_order == "front-first" else range(C, 0, -1)

    out = []
    for strategy in (Strategy.TOPMOST, Strategy.RIGHTMOST):
        key = _pick_key(strategy)
        entries: dict[ArmId, list] = {ArmId(c, r): [] for c in range(1, C + 1) for r in range(1, R + 1)}
        for zone, zone_clusters in zip(zones, clusters):
            for cl in zone_clusters:
                pool = [fm[i] for i in cl.fruit_ids]
                for c in cell_order:
                    pick = SKIP
                    if pool:
                        best = max(pool, key=key)
                        pool.remove(best)
                        pick = best.id
                    entries[ArmId(c, cl.row)].append((zone.index, pick))
        arms = tuple(ArmSequence(arm, tuple(entries[arm]))
                     for arm in sorted(entries, key=lambda a: (a.cell, a.row)))
        out.append(HarvesterSequence(strategy, R, C, arms))
    return out


def candidates_to_json(cands: list[HarvesterSequence]) -> str:
    return json.dumps([c.to_dict() for c in cands], indent=1)
