"""Independent checks of plans and trajectories.

``replay_schedule`` re-derives every arrival time with a time-ordered event
simulation; it deliberately shares nothing with the scheduler apart from the
trapezoid profile and the picking duration, so agreement between the two is
evidence rather than tautology.  ``check_trajectories`` measures every
constraint family on sampled trajectories, and ``brute_force_makespan``
enumerates all crossing-free sequences of a tiny single-cell instance.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import FruitMap, HarvesterConfig, cell_bounds
from .motion import picking_duration, trapezoid_time
from .scheduling import NoFeasiblePlan, PlanResult, cell_scheduling_at_v, kernels
from .sequencing import HarvesterSequence, generate_candidates

REPLAY_TOL = 1e-9
TRAJ_TOL = 1e-6

FAMILIES = ("initial", "vel_update", "pos_update", "vx_bound", "vz_bound", "acc_bound",
            "ordering", "frame_x", "z_bottom", "z_top", "dwell")


@dataclass(frozen=True)
class Finding:
    kind: str
    cell: int
    row: int
    index: int  # time index for trajectories, fruit id for schedules
    magnitude: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "arm": [self.cell, self.row], "index": self.index,
                "magnitude": self.magnitude}


@dataclass
class ValidationReport:
    violations: list[Finding] = field(default_factory=list)
    max_residual: dict[str, float] = field(default_factory=dict)
    fpt: float = 0.0
    makespan: float = 0.0
    n_fruits: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "n_fruits": self.n_fruits, "makespan": self.makespan, "fpt": self.fpt,
                "max_residual": self.max_residual, "violations": [v.to_dict() for v in self.violations]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def throughput(n_fruits: int, makespan: float) -> float:
    return n_fruits / makespan if makespan > 0 else 0.0


# ---------------------------------------------------------------- replay

@dataclass
class ReplayResult:
    arrivals: dict[tuple[int, int], list[tuple[int, float]]]
    violations: list[Finding]

    @property
    def ok(self) -> bool:
        return not self.violations


def _row_sequences(plan: PlanResult, c: int, rows: int) -> list[list[tuple[int, int | None]]]:
    if plan.sequence is not None:
        return [list(a.entries) for a in plan.sequence.cell(c)]
    cs = plan.cells[c - 1]
    zones = [e.zone for row in cs.rows for e in row]
    if any(z < 0 for z in zones):
        raise ValueError("plan carries neither a sequence nor zone indices")
    n = max(zones, default=-1) + 1
    out = []
    for row in cs.rows:
        seq: list[tuple[int, int | None]] = [(k, None) for k in range(n)]
        for e in row:
            seq[e.zone] = (e.zone, e.fruit_id)
        out.append(seq)
    return out


class _CellReplay:
    """Event simulation of one cell.

    Each arm alternates DEPART -> (REACH yield point -> wait for the
    neighbour's DEPART)* -> ARRIVE.  A neighbour's dwell blocks the vertical
    path while it is strictly between the arm's height and its target.
    """

    def __init__(self, seqs, fm: FruitMap, cfg: HarvesterConfig, c: int, v: float):
        self.cfg, self.v = cfg, v
        self.a, self.vmax = cfg.limits.a_max, cfg.limits.v_max
        self.rear0, self.front0 = cell_bounds(cfg, c, 0.0)
        states = cfg.arm_states()[(c - 1) * cfg.rows:c * cfg.rows]
        self.R = len(seqs)
        # dwell list per row: index 0 is the start pose (departed at t = 0)
        self.dwell_zone = [[-1] for _ in range(self.R)]
        self.dwell_fid: list[list[int | None]] = [[None] for _ in range(self.R)]
        self.dwell_x = [[s.px] for s in states]
        self.dwell_z = [[s.pz] for s in states]
        self.dwell_tp = [[0.0] for _ in range(self.R)]
        for r, seq in enumerate(seqs):
            for k, fid in seq:
                if fid is None:
                    continue
                f = fm[fid]
                self.dwell_zone[r].append(k)
                self.dwell_fid[r].append(fid)
                self.dwell_x[r].append(f.x)
                self.dwell_z[r].append(f.z)
                self.dwell_tp[r].append(picking_duration(f, cfg))
        self.arrive = [[0.0] + [math.nan] * (len(d) - 1) for d in self.dwell_zone]
        self.depart: list[list[float | None]] = [[0.0] + [None] * (len(d) - 1) for d in self.dwell_zone]
        self.waiters: dict[tuple[int, int], list[int]] = defaultdict(list)
        self.events: list = []
        self.seq = itertools.count()
        self.plan_state: dict[int, dict] = {}
        self.failures: list[Finding] = []
        self.c = c

    def push(self, t: float, kind: str, row: int) -> None:
        heapq.heappush(self.events, (t, next(self.seq), kind, row))

    def last_dwell_before(self, j: int, zone: int) -> int:
        i = 0
        for n, z in enumerate(self.dwell_zone[j]):
            if z <= zone - 1:
                i = n
        return i

    def start_move(self, r: int, t: float) -> None:
        i = self.plan_state[r]["at"] if r in self.plan_state else 0
        if i + 1 >= len(self.dwell_zone[r]):
            return
        nxt = i + 1
        zone = self.dwell_zone[r][nxt]
        z0, zt = self.dwell_z[r][i], self.dwell_z[r][nxt]
        points = []
        if zt != z0:
            up = zt > z0
            lo, hi = min(z0, zt), max(z0, zt)
            rows = range(r + 1, self.R) if up else range(r - 1, -1, -1)
            for j in rows:
                last = self.last_dwell_before(j, zone)
                for n in range(last + 1):
                    zj = self.dwell_z[j][n]
                    if not lo < zj < hi:
                        continue
                    dep = self.depart[j][n]
                    if n == last or dep is None or dep > t:
                        points.append((zj, j, n))
            points.sort(key=lambda p: p[0] if up else -p[0])
        self.plan_state[r] = {"at": i, "next": nxt, "t0": t, "z": z0, "points": points, "p": 0}
        self.advance(r, t)

    def advance(self, r: int, t: float) -> None:
        st = self.plan_state[r]
        if st["p"] < len(st["points"]):
            zy = st["points"][st["p"]][0]
            self.push(t + trapezoid_time(abs(zy - st["z"]), self.vmax, self.a), "REACH", r)
            return
        nxt = st["next"]
        t_vert = t + trapezoid_time(abs(self.dwell_z[r][nxt] - st["z"]), self.vmax, self.a)
        xs, xt, t0 = self.dwell_x[r][st["at"]], self.dwell_x[r][nxt], st["t0"]
        peak = self.vmax + self.v if xt >= xs else self.vmax - self.v
        if peak <= 0:
            t_horiz = math.inf
        else:
            t_move = t0 + trapezoid_time(abs(xt - xs), peak, self.a)
            # at rest on the fruit only once the front edge has passed it by a braking distance
            t_front = (xt - self.front0) / self.v + self.v / (2.0 * self.a)
            t_horiz = max(t_move, t_front)
        self.push(max(t_vert, t_horiz), "ARRIVE", r)

    def on_reach(self, r: int, t: float) -> None:
        st = self.plan_state[r]
        zy, j, n = st["points"][st["p"]]
        st["z"] = zy
        st["p"] += 1
        dep = self.depart[j][n]
        if dep is None:
            self.waiters[(j, n)].append(r)
        elif dep > t:
            self.push(dep, "RESUME", r)
        else:
            self.advance(r, t)

    def on_arrive(self, r: int, t: float) -> None:
        st = self.plan_state[r]
        n = st["next"]
        self.arrive[r][n] = t
        dep = t + self.dwell_tp[r][n]
        self.depart[r][n] = dep
        x = self.dwell_x[r][n]
        need = self.rear0 + self.v * dep + self.v * self.v / (2.0 * self.a)
        if x < need:
            self.failures.append(Finding("rear_edge", self.c, r + 1, self.dwell_fid[r][n], need - x))
        st["at"] = n
        self.push(dep, "DEPART", r)

    def on_depart(self, r: int, t: float) -> None:
        n = self.plan_state[r]["at"] if r in self.plan_state else 0
        for w in self.waiters.pop((r, n), []):
            self.push(t, "RESUME", w)
        self.start_move(r, t)

    def run(self) -> None:
        for r in range(self.R):
            self.push(0.0, "DEPART", r)
        while self.events:
            t, _, kind, r = heapq.heappop(self.events)
            if kind == "DEPART":
                self.on_depart(r, t)
            elif kind == "REACH":
                self.on_reach(r, t)
            elif kind == "RESUME":
                self.advance(r, t)
            else:
                self.on_arrive(r, t)
        for (j, n), rs in self.waiters.items():
            for r in rs:
                self.failures.append(Finding("replay_deadlock", self.c, r + 1, -1, math.inf))


def replay_schedule(plan: PlanResult, cfg: HarvesterConfig, fm: FruitMap,
                    tol: float = REPLAY_TOL) -> ReplayResult:
    """Re-simulate the plan and compare every arrival time against it."""
    arrivals: dict[tuple[int, int], list[tuple[int, float]]] = {}
    violations: list[Finding] = []
    for cs in plan.cells:
        c = cs.cell
        sim = _CellReplay(_row_sequences(plan, c, cfg.rows), fm, cfg, c, plan.vehicle_speed)
        sim.run()
        violations += sim.failures
        for r in range(sim.R):
            got = [(sim.dwell_fid[r][n], sim.arrive[r][n]) for n in range(1, len(sim.dwell_fid[r]))]
            arrivals[(c, r + 1)] = got
            planned = cs.rows[r] if r < len(cs.rows) else ()
            if len(planned) != len(got):
                violations.append(Finding("replay_count", c, r + 1, -1, abs(len(planned) - len(got))))
            for e, (fid, t) in zip(planned, got):
                if e.fruit_id != fid:
                    violations.append(Finding("replay_order", c, r + 1, e.fruit_id, math.inf))
                elif not abs(e.arrival - t) <= tol:
                    violations.append(Finding("replay", c, r + 1, fid, abs(e.arrival - t)))
    return ReplayResult(arrivals, violations)


def check_dwell_ordering(plan: PlanResult, fm: FruitMap, tol: float = 0.0) -> list[Finding]:
    """Rows of a cell that dwell at the same time must be height-ordered."""
    out = []
    for cs in plan.cells:
        for r in range(len(cs.rows) - 1):
            for lower in cs.rows[r]:
                for upper in itertools.chain.from_iterable(cs.rows[r + 1:]):
                    if lower.arrival < upper.depart and upper.arrival < lower.depart:
                        gap = fm[lower.fruit_id].z - fm[upper.fruit_id].z
                        if gap > tol:
                            out.append(Finding("dwell_order", cs.cell, r + 1, lower.fruit_id, gap))
    return out


# ---------------------------------------------------------------- trajectories

def _grid_window(arrival: float, depart: float, dt: float) -> tuple[int, int]:
    lo = math.ceil(arrival / dt - 1e-9)
    hi = math.floor(depart / dt + 1e-9)
    if lo > hi:
        lo = hi = round((arrival + depart) / (2 * dt))
    return lo, hi


def check_trajectories(trajs: Sequence, plan: PlanResult, cfg: HarvesterConfig, fm: FruitMap,
                       tol: float = TRAJ_TOL) -> ValidationReport:
    """Measure constraint residuals of every trajectory set against ``cfg``.

    Dwell windows come from each set's own schedule, which differs from the
    plan only if the trajectory stage had to delay it.
    """
    rep = ValidationReport(max_residual={f: 0.0 for f in FAMILIES})
    lim, v = cfg.limits, plan.vehicle_speed
    states = cfg.arm_states()

    def record(kind: str, c: int, rows_idx, res: np.ndarray) -> None:
        res = np.asarray(res, dtype=float)
        if res.size == 0:
            return
        rep.max_residual[kind] = max(rep.max_residual[kind], float(np.max(res)))
        for flat in np.flatnonzero(res > tol):
            r, ts = np.unravel_index(flat, res.shape) if res.ndim == 2 else (0, flat)
            row = rows_idx[r] if rows_idx is not None else 0
            rep.violations.append(Finding(kind, c, row, int(ts), float(res.flat[flat])))

    makespan = plan.makespan
    for tr in trajs:
        c, dt = tr.cell, tr.dt
        shapes = {a.shape for a in (tr.px, tr.pz, tr.vx, tr.vz, tr.ax, tr.az)}
        if len(shapes) != 1:
            rep.violations.append(Finding("shape", c, 0, -1, math.inf))
            continue
        R, K1 = tr.px.shape
        rows = list(range(1, R + 1))
        ts = np.arange(K1) * dt
        st = states[(c - 1) * cfg.rows:(c - 1) * cfg.rows + R]
        p0x = np.array([s.px for s in st])
        p0z = np.array([s.pz for s in st])
        v0x = np.array([v if s.vx is None else s.vx for s in st])
        v0z = np.array([s.vz for s in st])
        init = np.column_stack([abs(tr.px[:, 0] - p0x), abs(tr.pz[:, 0] - p0z),
                                abs(tr.vx[:, 0] - v0x), abs(tr.vz[:, 0] - v0z)]).max(axis=1)
        record("initial", c, rows, init[:, None])
        for p, vel, acc in ((tr.px, tr.vx, tr.ax), (tr.pz, tr.vz, tr.az)):
            record("vel_update", c, rows, abs(vel[:, 1:] - vel[:, :-1] - dt * acc[:, :-1]))
            record("pos_update", c, rows,
                   abs(p[:, 1:] - p[:, :-1] - dt * vel[:, :-1] - 0.5 * dt * dt * acc[:, :-1]))
            record("acc_bound", c, rows, np.maximum(abs(acc) - lim.a_max, 0.0))
        record("vx_bound", c, rows, np.maximum.reduce([tr.vx - (lim.v_max + v), (v - lim.v_max) - tr.vx,
                                                        np.zeros_like(tr.vx)]))
        record("vz_bound", c, rows, np.maximum(abs(tr.vz) - lim.v_max, 0.0))
        if R > 1:
            record("ordering", c, rows[:-1], np.maximum(tr.pz[:-1] - tr.pz[1:], 0.0))
        rear, front = cell_bounds(cfg, c, 0.0)
        record("frame_x", c, rows, np.maximum.reduce([rear + v * ts - tr.px, tr.px - (front + v * ts),
                                                       np.zeros_like(tr.px)]))
        record("z_bottom", c, [1], np.maximum(-tr.pz[:1], 0.0))
        record("z_top", c, [R], np.maximum(tr.pz[-1:] - cfg.frame_height, 0.0))
        sched = tr.schedule
        makespan = max(makespan, sched.makespan)
        for r, row in enumerate(sched.rows):
            for e in row:
                f = fm[e.fruit_id]
                lo, hi = _grid_window(e.arrival, e.depart, dt)
                lo, hi = max(lo, 0), min(hi, K1 - 1)
                if lo > hi:
                    rep.violations.append(Finding("dwell", c, r + 1, e.fruit_id, math.inf))
                    continue
                err = np.maximum(abs(tr.px[r, lo:hi + 1] - f.x), abs(tr.pz[r, lo:hi + 1] - f.z))
                res = np.zeros((R, K1))
                res[r, lo:hi + 1] = err
                record("dwell", c, rows, res)
    rep.n_fruits = plan.n_fruits
    rep.makespan = makespan
    rep.fpt = throughput(rep.n_fruits, makespan)
    return rep


# ---------------------------------------------------------------- brute force

@dataclass(frozen=True)
class BruteForceResult:
    makespan: float
    rows: tuple[tuple[int | None, ...], ...]  # aligned per-row sequences, None = SKIP
    cases: int


def _alignments(a: int, b: int):
    """Lockstep interleavings of two sequences (each step advances one or both)."""
    if a == 0 and b == 0:
        yield ()
        return
    if a:
        for rest in _alignments(a - 1, b):
            yield ((1, 0),) + rest
    if b:
        for rest in _alignments(a, b - 1):
            yield ((0, 1),) + rest
    if a and b:
        for rest in _alignments(a - 1, b - 1):
            yield ((1, 1),) + rest


def brute_force_makespan(fm: FruitMap, cfg: HarvesterConfig, v: float) -> BruteForceResult:
    """Minimum makespan over every assignment, order and lockstep alignment
    of a tiny single-cell instance in which paired fruits never cross."""
    R, N = cfg.rows, len(fm)
    if cfg.cells != 1 or R > 2 or N > 6:
        raise ValueError("brute force is limited to 1 cell, R <= 2, N <= 6")
    fruits = list(fm)
    if N == 0:
        return BruteForceResult(0.0, tuple(() for _ in range(R)), 0)
    X = np.array([f.x for f in fruits])
    Z = np.array([f.z for f in fruits])
    TP = np.array([picking_duration(f, cfg) for f in fruits])
    states = cfg.arm_states()[:R]
    x0 = np.array([s.px for s in states], dtype=float)
    z0 = np.array([s.pz for s in states], dtype=float)
    rear0, front0 = cell_bounds(cfg, 1, 0.0)
    lim = cfg.limits
    kernel = kernels.schedule_cell
    best = (math.inf, None)
    cases = 0

    def evaluate(idx: np.ndarray, valid: np.ndarray):
        nonlocal best, cases
        cases += 1
        ok, _, _, arr = kernel(np.ascontiguousarray(X[idx]), np.ascontiguousarray(Z[idx]),
                               np.ascontiguousarray(TP[idx] * valid), valid, x0, z0, float(v),
                               lim.v_max, lim.a_max, front0, rear0, cfg.clearance)
        if not ok:
            return
        span = float(np.max(np.where(valid.astype(bool), arr + TP[idx], -np.inf)))
        if span < best[0]:
            seqs = tuple(tuple(int(fruits[i].id) if valid[r, k] else None for k, i in enumerate(idx[r]))
                         for r in range(R))
            best = (span, seqs)

    if R == 1:
        for perm in itertools.permutations(range(N)):
            evaluate(np.array([perm]), np.ones((1, N), dtype=np.uint8))
    else:
        for mask in range(1 << N):
            low = [i for i in range(N) if mask >> i & 1]
            high = [i for i in range(N) if not mask >> i & 1]
            aligns = list(_alignments(len(low), len(high)))
            for p1 in itertools.permutations(low):
                for p2 in itertools.permutations(high):
                    for al in aligns:
                        K = len(al)
                        idx = np.zeros((2, K), dtype=np.int64)
                        valid = np.zeros((2, K), dtype=np.uint8)
                        i1 = i2 = 0
                        crossing = False
                        for k, (s1, s2) in enumerate(al):
                            if s1:
                                idx[0, k] = p1[i1]
                                valid[0, k] = 1
                                i1 += 1
                            if s2:
                                idx[1, k] = p2[i2]
                                valid[1, k] = 1
                                i2 += 1
                            if s1 and s2 and Z[idx[0, k]] > Z[idx[1, k]]:
                                crossing = True
                                break
                        if not crossing:
                            evaluate(idx, valid)
    if best[1] is None:
        raise NoFeasiblePlan(f"no feasible assignment at v={v}")
    return BruteForceResult(best[0], best[1], cases)


def heuristic_makespan(fm: FruitMap, cfg: HarvesterConfig, v: float,
                       candidates: Sequence[HarvesterSequence] | None = None) -> float:
    """Smallest makespan among the candidate sequences scheduled at speed ``v``
    (``inf`` when none is feasible)."""
    best = math.inf
    for cand in candidates if candidates is not None else generate_candidates(fm, cfg):
        spans = []
        for c in range(1, cfg.cells + 1):
            res = cell_scheduling_at_v(cand.cell(c), v, cfg, fm, c)
            if not res.feasible:
                break
            spans.append(res.makespan)
        else:
            best = min(best, max(spans, default=0.0))
    return best
