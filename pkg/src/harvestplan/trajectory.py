"""Discretised arm trajectories from a fixed schedule, as a linear program.

Per cell, every arm is a double integrator in x and z sampled every ``dt``.
Positions are pinned to the fruit during each dwell, x stays inside the
moving cell frame, z keeps the rows ordered, and the objective is the sum
of absolute accelerations (linearised with one nonnegative auxiliary per
acceleration).  Cells share no constraint, so each is solved on its own.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import FruitMap, HarvesterConfig, cell_bounds
from .scheduling import CellSchedule, PlanResult, ScheduleEntry

GRID_EPS = 1e-9
MAX_RETRIES = 5


class TrajectoryError(RuntimeError):
    pass


def horizon_steps(tau: float, dt: float) -> int:
    return int(math.floor(tau / dt + GRID_EPS))


def dwell_indices(arrival: float, depart: float, dt: float) -> tuple[int, int]:
    """Grid indices ``[lo, hi]`` pinned for a dwell; never empty."""
    lo = int(math.ceil(arrival / dt - GRID_EPS))
    hi = int(math.floor(depart / dt + GRID_EPS))
    if lo > hi:
        lo = hi = int(round((arrival + depart) / (2.0 * dt)))
    return lo, hi


@dataclass(frozen=True)
class Pin:
    row: int  # 0-based
    fruit_id: int
    lo: int
    hi: int
    x: float
    z: float


@dataclass
class TrajectoryModel:
    """One cell's LP in HiGHS-ready form plus the metadata to read it back."""

    cell: int
    rows: int
    steps: int
    dt: float
    v: float
    c: np.ndarray
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    a_ub: sp.csr_matrix
    b_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    pins: list[Pin]
    frame: tuple[float, float]
    height: float
    blocks: list[np.ndarray] = field(default_factory=list)
    conflict: str = ""

    @property
    def n_integer(self) -> int:
        return 0

    def offset(self, row: int, axis: int) -> int:
        return (2 * row + axis) * _block_size(self.steps)


@dataclass
class TrajectorySet:
    cell: int
    dt: float
    v: float
    px: np.ndarray  # (R, K+1)
    pz: np.ndarray
    vx: np.ndarray
    vz: np.ndarray
    ax: np.ndarray
    az: np.ndarray
    objective: float
    schedule: CellSchedule
    retries: int = 0

    @property
    def steps(self) -> int:
        return self.px.shape[1] - 1


@dataclass(frozen=True)
class InfeasibleResult:
    reason: str
    pin: Pin | None = None


def _block_size(K: int) -> int:
    # p[0..K], v[0..K], a[0..K], s[0..K-1]
    return 4 * K + 3


def build_cell_model(schedule: CellSchedule, v: float, cfg: HarvesterConfig, tau: float,
                     fm: FruitMap) -> TrajectoryModel:
    """Assemble the LP for one cell over ``floor(tau/dt)`` steps."""
    R, dt = cfg.rows, cfg.dt
    K = horizon_steps(tau, dt)
    for row in schedule.rows:
        for e in row:
            if e.depart > tau + GRID_EPS:
                raise ValueError(f"fruit {e.fruit_id} departs at {e.depart} > horizon {tau}")
    B = _block_size(K)
    n = 2 * R * B
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    cost = np.zeros(n)
    lim = cfg.limits
    ts = np.arange(K + 1) * dt
    rear, front = cell_bounds(cfg, schedule.cell, 0.0)
    states = cfg.arm_states()[(schedule.cell - 1) * R:schedule.cell * R]

    eq_r, eq_c, eq_v = [], [], []
    ub_r, ub_c, ub_v = [], [], []
    n_eq = n_ub = 0
    t_idx = np.arange(K)
    blocks = []
    for r in range(R):
        for axis in (0, 1):
            o = (2 * r + axis) * B
            P, V, A, S = o, o + K + 1, o + 2 * (K + 1), o + 3 * (K + 1)
            # v[t+1] - v[t] - dt a[t] = 0
            rows = n_eq + t_idx
            eq_r += [rows, rows, rows]
            eq_c += [V + t_idx + 1, V + t_idx, A + t_idx]
            eq_v += [np.ones(K), -np.ones(K), np.full(K, -dt)]
            n_eq += K
            # p[t+1] - p[t] - dt v[t] - dt^2/2 a[t] = 0
            rows = n_eq + t_idx
            eq_r += [rows] * 4
            eq_c += [P + t_idx + 1, P + t_idx, V + t_idx, A + t_idx]
            eq_v += [np.ones(K), -np.ones(K), np.full(K, -dt), np.full(K, -0.5 * dt * dt)]
            n_eq += K
            # |a| <= s
            rows = n_ub + 2 * t_idx
            ub_r += [rows, rows, rows + 1, rows + 1]
            ub_c += [A + t_idx, S + t_idx, A + t_idx, S + t_idx]
            ub_v += [np.ones(K), -np.ones(K), -np.ones(K), -np.ones(K)]
            n_ub += 2 * K
            cost[S:S + K] = 1.0
            lb[S:S + K] = 0.0
            lb[A:A + K + 1], ub[A:A + K + 1] = -lim.a_max, lim.a_max
            lb[A + K] = ub[A + K] = 0.0
            if axis == 0:
                lb[V:V + K + 1], ub[V:V + K + 1] = -lim.v_max + v, lim.v_max + v
                lb[P:P + K + 1], ub[P:P + K + 1] = rear + v * ts, front + v * ts
            else:
                lb[V:V + K + 1], ub[V:V + K + 1] = -lim.v_max, lim.v_max
                if r == 0:
                    lb[P:P + K + 1] = 0.0
                if r == R - 1:
                    ub[P:P + K + 1] = cfg.frame_height
            st = states[r]
            p0 = st.px if axis == 0 else st.pz
            v0 = (v if st.vx is None else st.vx) if axis == 0 else st.vz
            _fix(lb, ub, P, p0)
            _fix(lb, ub, V, v0)
            blocks.append(np.arange(o, o + B))

    # rows stay ordered in z
    if R > 1:
        tk = np.arange(K + 1)
        for r in range(R - 1):
            rows = n_ub + tk
            ub_r += [rows, rows]
            ub_c += [(2 * r + 1) * B + tk, (2 * (r + 1) + 1) * B + tk]
            ub_v += [np.ones(K + 1), -np.ones(K + 1)]
            n_ub += K + 1
        zb = np.concatenate([blocks[2 * r + 1] for r in range(R)])
        blocks = [blocks[2 * r] for r in range(R)] + [zb]

    pins = []
    conflict = ""
    for r, row in enumerate(schedule.rows):
        for e in row:
            f = fm[e.fruit_id]
            lo_i, hi_i = dwell_indices(e.arrival, e.depart, dt)
            lo_i, hi_i = max(lo_i, 0), min(hi_i, K)
            pin = Pin(r, e.fruit_id, lo_i, hi_i, f.x, f.z)
            pins.append(pin)
            for axis, val in ((0, f.x), (1, f.z)):
                P = (2 * r + axis) * B
                sl = slice(P + lo_i, P + hi_i + 1)
                if not conflict and (np.any(lb[sl] > val + 1e-12) or np.any(ub[sl] < val - 1e-12)):
                    conflict = f"row {r + 1} fruit {e.fruit_id}: pinned position outside bounds"
                lb[sl] = val
                ub[sl] = val

    a_eq = sp.csr_matrix((np.concatenate(eq_v), (np.concatenate(eq_r), np.concatenate(eq_c))), shape=(n_eq, n))
    a_ub = sp.csr_matrix((np.concatenate(ub_v), (np.concatenate(ub_r), np.concatenate(ub_c))), shape=(n_ub, n))
    return TrajectoryModel(schedule.cell, R, K, dt, v, cost, a_eq, np.zeros(n_eq), a_ub, np.zeros(n_ub),
                           lb, ub, pins, (rear, front), cfg.frame_height, blocks, conflict)


def _fix(lb: np.ndarray, ub: np.ndarray, i: int, val: float) -> None:
    lb[i] = ub[i] = val


_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}


def _solve_lp(c, a_eq, b_eq, a_ub, b_ub, lb, ub):
    res = linprog(c, A_ub=a_ub if a_ub.shape[0] else None, b_ub=b_ub if a_ub.shape[0] else None,
                  A_eq=a_eq, b_eq=b_eq, bounds=np.column_stack([lb, ub]), method="highs",
                  options=_HIGHS_OPTIONS)
    return res


def _rows_within(a: sp.csr_matrix, cols: np.ndarray) -> np.ndarray:
    pattern = (a != 0).astype(np.int64)
    inside = np.asarray(pattern[:, cols].sum(axis=1)).ravel()
    total = pattern.getnnz(axis=1)
    return np.flatnonzero((total > 0) & (inside == total))


def _solve_block(model: TrajectoryModel, cols: np.ndarray, lb=None, ub=None):
    lb = model.lb if lb is None else lb
    ub = model.ub if ub is None else ub
    eq_rows = _rows_within(model.a_eq, cols)
    ub_rows = _rows_within(model.a_ub, cols)
    a_eq = model.a_eq[eq_rows][:, cols]
    a_ub = model.a_ub[ub_rows][:, cols]
    return _solve_lp(model.c[cols], a_eq, model.b_eq[eq_rows], a_ub, model.b_ub[ub_rows], lb[cols], ub[cols])


def _relaxed_bounds(model: TrajectoryModel, keep: Sequence[Pin]):
    """Bounds with only the pins in ``keep`` applied."""
    lb, ub = model.lb.copy(), model.ub.copy()
    B = _block_size(model.steps)
    kept = {(p.row, p.lo, p.hi) for p in keep}
    for p in model.pins:
        if (p.row, p.lo, p.hi) in kept:
            continue
        for axis in (0, 1):
            P = (2 * p.row + axis) * B
            sl = slice(P + p.lo, P + p.hi + 1)
            ref = _unpinned_bounds(model, p.row, axis, sl)
            lb[sl], ub[sl] = ref
    return lb, ub


def _unpinned_bounds(model: TrajectoryModel, row: int, axis: int, sl: slice):
    n = sl.stop - sl.start
    B = _block_size(model.steps)
    start = sl.start - (2 * row + axis) * B
    if axis == 0:
        ts = (np.arange(n) + start) * model.dt
        rear, front = model.frame
        lo = rear + model.v * ts
        hi = front + model.v * ts
    else:
        lo = np.full(n, 0.0 if row == 0 else -np.inf)
        hi = np.full(n, model.height if row == model.rows - 1 else np.inf)
    if start == 0:  # the initial condition stays pinned
        lo = lo.copy()
        hi = hi.copy()
        lo[0] = model.lb[sl.start]
        hi[0] = model.ub[sl.start]
    return lo, hi


def _first_bad_pin(model: TrajectoryModel) -> Pin | None:
    """Earliest-starting dwell whose inclusion makes the model infeasible."""
    order = sorted(model.pins, key=lambda p: (p.lo, p.row))
    if not order:
        return None

    def feasible(k: int) -> bool:
        lb, ub = _relaxed_bounds(model, order[:k])
        return all(_solve_block(model, cols, lb, ub).status == 0 for cols in model.blocks)

    lo, hi = 0, len(order)  # feasible(lo) assumed, feasible(hi) false
    if feasible(hi):
        return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return order[hi - 1]


def idle_splits(model: TrajectoryModel, window_steps: int) -> list[int]:
    """Indices ``s`` where every arm is pinned over ``[s-1, s+1]``, at least
    ``window_steps`` apart; candidates for cutting the horizon."""
    K = model.steps
    pinned = np.zeros((model.rows, K + 1), dtype=bool)
    for p in model.pins:
        pinned[p.row, p.lo:p.hi + 1] = True
    core = pinned.all(axis=0)
    ok = np.zeros(K + 1, dtype=bool)
    ok[1:K] = core[:-2] & core[1:-1] & core[2:]
    out, last = [], 0
    for s_ in np.flatnonzero(ok):
        if s_ - last >= window_steps and K - s_ >= window_steps // 2:
            out.append(int(s_))
            last = s_
    return out


def _window_cols(model: TrajectoryModel, cols: np.ndarray, s0: int, s1: int) -> np.ndarray:
    K = model.steps
    rel = (cols - cols[0]) % _block_size(K)  # every block is a run of whole arm-axis blocks
    kind = np.minimum(rel // (K + 1), 3)
    ts = rel - kind * (K + 1)
    a_hi = s1 if s1 == K else s1 - 1
    keep = np.where(kind < 2, (ts >= s0) & (ts <= s1), (ts >= s0) & (ts <= a_hi))
    return cols[keep]


def solve_model(model: TrajectoryModel, schedule: CellSchedule | None = None,
                window_steps: int | None = None) -> TrajectorySet | InfeasibleResult:
    """Solve the cell LP block by block (x per arm, z per cell).

    With ``window_steps`` set, the horizon is also cut at moments when every
    arm is dwelling; the arms are held at rest there, which decouples the
    pieces at a (usually small) cost in optimality.
    """
    if model.conflict:
        return InfeasibleResult(model.conflict, None)
    x = np.zeros(model.c.size)
    objective = 0.0
    lb, ub = model.lb, model.ub
    pieces = [(0, model.steps)]
    if window_steps:
        splits = idle_splits(model, window_steps)
        if splits:
            lb, ub = lb.copy(), ub.copy()
            B = _block_size(model.steps)
            for blk in range(2 * model.rows):
                for s_ in splits:
                    _fix(lb, ub, blk * B + model.steps + 1 + s_, 0.0)
            edges = [0, *splits, model.steps]
            pieces = list(zip(edges[:-1], edges[1:]))
    parts = [_window_cols(model, cols, s0, s1) if len(pieces) > 1 else cols
             for cols in model.blocks for s0, s1 in pieces]
    for cols in parts:
        res = _solve_block(model, cols, lb, ub)
        if res.status == 2:
            pin = _first_bad_pin(model)
            where = f"row {pin.row + 1} fruit {pin.fruit_id} dwell [{pin.lo}, {pin.hi}]" if pin else "unknown"
            return InfeasibleResult(f"cell {model.cell} infeasible at {where}", pin)
        if res.status != 0:
            return InfeasibleResult(f"cell {model.cell}: solver status {res.status} ({res.message})")
        x[cols] = res.x
        objective += res.fun
    K, B = model.steps, _block_size(model.steps)
    arrays = {}
    for axis, name in ((0, "x"), (1, "z")):
        for kind, off in (("p", 0), ("v", K + 1), ("a", 2 * (K + 1))):
            arrays[kind + name] = np.vstack([x[(2 * r + axis) * B + off:(2 * r + axis) * B + off + K + 1]
                                             for r in range(model.rows)])
    sched = schedule if schedule is not None else CellSchedule(model.cell, (), 0.0)
    return TrajectorySet(model.cell, model.dt, model.v, arrays["px"], arrays["pz"], arrays["vx"], arrays["vz"],
                         arrays["ax"], arrays["az"], objective, sched)


def delay_from(schedule: CellSchedule, t_from: float, shift: float) -> CellSchedule:
    """Push every dwell starting at or after ``t_from`` back by ``shift``."""
    rows = tuple(
        tuple(replace(e, arrival=e.arrival + shift, depart=e.depart + shift) if e.arrival >= t_from - GRID_EPS else e
              for e in row)
        for row in schedule.rows
    )
    makespan = max((e.depart for row in rows for e in row), default=0.0)
    return CellSchedule(schedule.cell, rows, makespan)


def solve_cell(schedule: CellSchedule, v: float, cfg: HarvesterConfig, tau: float, fm: FruitMap,
               max_retries: int = MAX_RETRIES, window_steps: int | None = None) -> TrajectorySet:
    """Build and solve one cell, delaying the schedule by ``dt`` at the failing
    dwell on infeasibility (at most ``max_retries`` times)."""
    sched = schedule
    horizon = tau
    last = ""
    for attempt in range(max_retries + 1):
        model = build_cell_model(sched, v, cfg, horizon, fm)
        out = solve_model(model, sched, window_steps)
        if isinstance(out, TrajectorySet):
            out.retries = attempt
            return out
        last = out.reason
        if out.pin is None:
            break
        entry = next(e for e in sched.rows[out.pin.row] if e.fruit_id == out.pin.fruit_id)
        sched = delay_from(sched, entry.arrival, cfg.dt)
        horizon = max(horizon, sched.makespan)
    raise TrajectoryError(f"cell {schedule.cell}: no trajectory after {max_retries} retries ({last})")


def generate_trajectories(plan: PlanResult, cfg: HarvesterConfig, fm: FruitMap,
                          max_retries: int = MAX_RETRIES, window_steps: int | None = None) -> list[TrajectorySet]:
    """One trajectory set per cell, covering every arm of the plan."""
    return [solve_cell(cs, plan.vehicle_speed, cfg, plan.makespan, fm, max_retries, window_steps)
            for cs in plan.cells]


def write_trajectories_csv(trajs: Sequence[TrajectorySet], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ts", "t", "cell", "row", "px", "pz", "vx", "vz", "ax", "az"])
        for tr in trajs:
            for ts in range(tr.steps + 1):
                for r in range(tr.px.shape[0]):
                    w.writerow([ts, repr(round(ts * tr.dt, 10)), tr.cell, r + 1,
                                *(repr(float(arr[r, ts])) for arr in (tr.px, tr.pz, tr.vx, tr.vz, tr.ax, tr.az))])
