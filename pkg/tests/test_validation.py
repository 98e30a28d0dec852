import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harvestplan.model import FruitMap
from harvestplan.scenarios import ScenarioSpec, generate_uniform
from harvestplan.scheduling import CellSchedule, PlanResult, ScheduleEntry, plan_velocity_and_schedule
from harvestplan.sequencing import generate_candidates
from harvestplan.trajectory import dwell_indices, generate_trajectories
from harvestplan.validation import (
    brute_force_makespan,
    check_dwell_ordering,
    check_trajectories,
    heuristic_makespan,
    replay_schedule,
    throughput,
)

from conftest import cfg_for, make_map


def _plan(fm, cfg):
    return plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm)


# -- replay -------------------------------------------------------------------

def test_replay_single_fruit_by_hand():
    cfg = cfg_for()
    fm = make_map((0.5, 0.0, 1.0))
    cs = CellSchedule(1, ((ScheduleEntry(0, 0.5 / 0.05 + 0.05 / 2, 12.025, 0),),), 12.025)
    plan = PlanResult(0.05, 12.025, (cs,), "TOPMOST")
    res = replay_schedule(plan, cfg, fm)
    assert res.arrivals[(1, 1)] == [(0, pytest.approx(10.025, abs=1e-12))]
    assert res.ok


def test_replay_of_empty_plan_is_empty():
    cfg = cfg_for(2, 1)
    plan = _plan(make_map(), cfg)
    res = replay_schedule(plan, cfg, make_map())
    assert res.ok and all(v == [] for v in res.arrivals.values())


def test_replay_flags_tampered_arrival():
    cfg = cfg_for(2, 2)
    fm = generate_uniform(ScenarioSpec(row_length=2, density=10, seed=3))
    plan = _plan(fm, cfg)
    cs = plan.cells[1]
    row = list(cs.rows[0])
    row[2] = dataclasses.replace(row[2], arrival=row[2].arrival + 1e-6)
    bad = dataclasses.replace(plan, cells=(plan.cells[0], dataclasses.replace(cs, rows=(tuple(row),) + cs.rows[1:])))
    res = replay_schedule(bad, cfg, fm)
    assert [(v.kind, v.cell, v.row, v.index) for v in res.violations] == [("replay", 2, 1, row[2].fruit_id)]


def test_replay_without_stored_sequence_uses_zone_indices():
    cfg = cfg_for(3, 1)
    fm = generate_uniform(ScenarioSpec(row_length=2, density=10, seed=4))
    plan = dataclasses.replace(_plan(fm, cfg), sequence=None)
    assert replay_schedule(plan, cfg, fm).ok


maps = st.lists(st.tuples(st.floats(0, 3), st.floats(0, 0.5), st.floats(0, 2)), min_size=1, max_size=30)


@settings(max_examples=60, deadline=None)
@given(maps, st.integers(1, 4), st.integers(1, 3), st.sampled_from(["front-first", "rear-first"]))
def test_replay_agrees_with_scheduler(rows, R, C, order):
    cfg = cfg_for(R, C, claim_order=order, epsilon_v=1e-3)
    fm = make_map(*rows)
    plan = _plan(fm, cfg)
    assert replay_schedule(plan, cfg, fm).violations == []
    assert check_dwell_ordering(plan, fm) == []


def test_dwell_ordering_detects_inversion():
    fm = make_map((0.1, 0, 1.5), (0.2, 0, 0.5))
    cs = CellSchedule(1, ((ScheduleEntry(0, 1.0, 3.0),), (ScheduleEntry(1, 2.0, 4.0),)), 4.0)
    found = check_dwell_ordering(PlanResult(0.01, 4.0, (cs,), "TOPMOST"), fm)
    assert [(f.kind, f.index) for f in found] == [("dwell_order", 0)]


# -- trajectory checks --------------------------------------------------------

@pytest.fixture(scope="module")
def solved():
    cfg = cfg_for(2, 1)
    fm = generate_uniform(ScenarioSpec(row_length=1.5, density=8, seed=7))
    plan = _plan(fm, cfg)
    return cfg, fm, plan, generate_trajectories(plan, cfg, fm)


def _copy(trajs):
    return [dataclasses.replace(t, **{k: getattr(t, k).copy() for k in ("px", "pz", "vx", "vz", "ax", "az")})
            for t in trajs]


def test_clean_trajectories_pass(solved):
    cfg, fm, plan, trajs = solved
    rep = check_trajectories(trajs, plan, cfg, fm)
    assert rep.ok
    assert max(rep.max_residual.values()) <= 1e-6
    assert rep.fpt * rep.makespan == pytest.approx(len(fm), rel=1e-12)
    data = json.loads(rep.to_json())
    assert data["ok"] and data["n_fruits"] == len(fm)


def test_one_centimetre_off_during_dwell(solved):
    cfg, fm, plan, trajs = solved
    bad = _copy(trajs)
    e = bad[0].schedule.rows[1][1]
    lo, hi = dwell_indices(e.arrival, e.depart, cfg.dt)
    bad[0].px[1, (lo + hi) // 2] += 0.01
    rep = check_trajectories(bad, plan, cfg, fm)
    dwell = [v for v in rep.violations if v.kind == "dwell"]
    assert len(dwell) == 1
    assert (dwell[0].row, dwell[0].index) == (2, (lo + hi) // 2)
    assert dwell[0].magnitude == pytest.approx(0.01)


def _idle_index(tr, row):
    pinned = np.zeros(tr.px.shape[1], dtype=bool)
    for e in tr.schedule.rows[row]:
        lo, hi = dwell_indices(e.arrival, e.depart, tr.dt)
        pinned[lo:hi + 1] = True
    return int(np.flatnonzero(~pinned)[5])


@pytest.mark.parametrize("kind", ["initial", "vel_update", "acc_bound", "vz_bound", "vx_bound", "ordering",
                                  "frame_x", "z_bottom", "z_top"])
def test_injected_faults_are_classified(solved, kind):
    cfg, fm, plan, trajs = solved
    bad = _copy(trajs)
    tr = bad[0]
    ts = _idle_index(tr, 0)
    if kind == "initial":
        tr.vz[0, 0] = 0.3
    elif kind == "vel_update":
        tr.vx[0, ts] += 0.05
    elif kind == "acc_bound":
        tr.az[0, ts] = 1.5
    elif kind == "vz_bound":
        tr.vz[0, ts] = -1.2
    elif kind == "vx_bound":
        tr.vx[0, ts] = plan.vehicle_speed + 1.3
    elif kind == "ordering":
        tr.pz[0, ts] = tr.pz[1, ts] + 0.05
    elif kind == "frame_x":
        tr.px[0, ts] = 100.0
    elif kind == "z_bottom":
        tr.pz[0, ts] = -0.05
    elif kind == "z_top":
        tr.pz[1, _idle_index(tr, 1)] = cfg.frame_height + 0.05
    rep = check_trajectories(bad, plan, cfg, fm)
    assert rep.count(kind) >= 1
    assert rep.max_residual[kind] > 1e-6


def test_throughput_definition():
    assert throughput(100, 50.0) == 2.0
    assert throughput(0, 0.0) == 0.0


# -- brute force --------------------------------------------------------------

def test_brute_force_one_fruit_equals_its_schedule():
    cfg = cfg_for()
    fm = make_map((0.4, 0.2, 1.3))
    v = 0.02
    bf = brute_force_makespan(fm, cfg, v)
    assert bf.cases == 1
    assert bf.makespan == heuristic_makespan(fm, cfg, v)


def test_stacked_fruits_go_to_matching_rows():
    cfg = cfg_for(2, 1)
    fm = make_map((0.3, 0.0, 0.4), (0.3, 0.0, 1.6))
    bf = brute_force_makespan(fm, cfg, 0.02)
    lower = [f for f in bf.rows[0] if f is not None]
    upper = [f for f in bf.rows[1] if f is not None]
    assert (lower, upper) == ([0], [1])
    # 2 + 2 single-row orders, 3 alignments bottom/top, 2 top/bottom once the simultaneous crossing is pruned
    assert bf.cases == 9


def test_brute_force_scope():
    with pytest.raises(ValueError):
        brute_force_makespan(make_map(*[(0.1 * i, 0, 1) for i in range(7)]), cfg_for(), 0.01)
    with pytest.raises(ValueError):
        brute_force_makespan(make_map((0.1, 0, 1)), cfg_for(3, 1), 0.01)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1.5), st.floats(0, 0.5), st.floats(0, 2)), min_size=1, max_size=5),
       st.integers(1, 2))
def test_heuristic_never_beats_enumeration(rows, R):
    cfg = cfg_for(R, 1, epsilon_v=1e-3)
    fm = make_map(*rows)
    v = _plan(fm, cfg).vehicle_speed
    h = heuristic_makespan(fm, cfg, v)
    assert math.isfinite(h)
    assert h >= brute_force_makespan(fm, cfg, v).makespan - 1e-9
