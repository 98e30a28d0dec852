"""End-to-end acceptance criteria, one test each.

Every test prints a single ``[criterion N] PASS|FAIL ...`` line (with
output capture disabled) before asserting, so ``pytest -v`` shows the
measured numbers whether or not the criterion holds.
"""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import replace

import numpy as np
import pytest

from harvestplan.bench import SweepSpec, aggregate, metrics_csv, run_sweep
from harvestplan.model import FruitMap, HarvesterConfig, with_geometry
from harvestplan.motion import trapezoid_time
from harvestplan.scenarios import ScenarioSpec, generate_uniform
from harvestplan.scheduling import NoFeasiblePlan, plan_velocity_and_schedule, probe_speed
from harvestplan.sequencing import generate_candidates
from harvestplan.trajectory import generate_trajectories
from harvestplan.validation import brute_force_makespan, check_trajectories, heuristic_makespan, replay_schedule

from conftest import make_map
from oracles import integrated_travel_time

pytestmark = pytest.mark.slow

CORPUS_EPS = 1e-3
DENSITIES = (5, 10, 30)
PAIRS = ((1, 1), (2, 1), (3, 2))


def report(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="module")
def corpus():
    """50 seeded scenarios covering every (density, geometry) combination."""
    out = []
    for seed in range(50):
        density = DENSITIES[seed % 3]
        rows, cells = PAIRS[(seed // 3) % 3]
        fm = generate_uniform(ScenarioSpec(row_length=10.0, density=density, seed=seed))
        cfg = replace(with_geometry(HarvesterConfig(), rows, cells), epsilon_v=CORPUS_EPS)
        plan = plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm)
        out.append((seed, fm, cfg, plan))
    return out


def test_constraint_residuals(corpus, capsys):
    t0 = time.perf_counter()
    worst = 0.0
    bad = []
    for seed, fm, cfg, plan in corpus:
        trajs = generate_trajectories(plan, cfg, fm)
        rep = check_trajectories(trajs, plan, cfg, fm)
        worst = max([worst, *rep.max_residual.values()])
        if not rep.ok:
            bad.append((seed, rep.violations[0]))
    elapsed = time.perf_counter() - t0
    ok = not bad and worst <= 1e-6 and elapsed <= 300
    report(capsys, 1, ok, f"{len(corpus)} scenarios, max residual {worst:.2e}, {len(bad)} failing, {elapsed:.1f} s")
    assert not bad, bad[:3]
    assert worst <= 1e-6
    assert elapsed <= 300


def test_replay_agreement(corpus, capsys):
    n_entries = 0
    mismatches = []
    for seed, fm, cfg, plan in corpus:
        rr = replay_schedule(plan, cfg, fm, tol=1e-9)
        n_entries += sum(len(r) for cs in plan.cells for r in cs.rows)
        mismatches += [(seed, f) for f in rr.violations]
    report(capsys, 2, not mismatches, f"{n_entries} entries, {len(mismatches)} mismatches at 1e-9 s")
    assert not mismatches, mismatches[:3]


def test_speed_maximality(corpus, capsys):
    bad = []
    for seed, fm, cfg, plan in corpus:
        v = plan.vehicle_speed
        feasible = probe_speed(plan.sequence, fm, cfg, v)
        # above the search bound a fruit cannot stay in a cell for its dwell
        above = v + cfg.epsilon_v
        infeasible = above > plan.v_high or not probe_speed(plan.sequence, fm, cfg, above)
        if not (feasible and infeasible):
            bad.append((seed, v, feasible, infeasible))
    report(capsys, 3, not bad, f"{len(corpus)} plans, {len(bad)} not maximal at eps {CORPUS_EPS}")
    assert not bad, bad[:3]


def _tiny_instance(rng: np.random.Generator) -> tuple[FruitMap, HarvesterConfig]:
    rows = int(rng.integers(1, 3))
    n = int(rng.integers(2, 7))
    pts = [(float(rng.uniform(-0.1, 0.9)), float(rng.uniform(0.0, 0.5)), float(rng.uniform(0.1, 1.9)))
           for _ in range(n)]
    return make_map(*pts), with_geometry(HarvesterConfig(), rows, 1)


def test_brute_force_admissibility(capsys):
    rng = np.random.default_rng(2024)
    ratios = []
    worse = []
    while len(ratios) < 30:
        fm, cfg = _tiny_instance(rng)
        try:
            v = plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm).vehicle_speed
        except NoFeasiblePlan:
            continue
        heur = heuristic_makespan(fm, cfg, v)
        opt = brute_force_makespan(fm, cfg, v).makespan
        ratios.append(heur / opt)
        if heur < opt - 1e-9:
            worse.append((len(ratios), heur, opt))
    detail = (f"30 instances, heuristic/optimal mean {statistics.fmean(ratios):.4f} "
              f"max {max(ratios):.4f}, {sum(r > 1 + 1e-9 for r in ratios)} strictly suboptimal")
    report(capsys, 4, not worse, detail)
    assert not worse, worse


def _sweep(pairs, density, reps, seed):
    spec = SweepSpec(pairs=tuple(pairs), densities=(float(density),), replications=reps,
                     scenario=ScenarioSpec(row_length=10.0), master_seed=seed)
    return spec, run_sweep(spec)


ARM_PAIRS = ((1, 1), (2, 1), (3, 1), (3, 2), (3, 3), (3, 4))


def test_monotonic_throughput(capsys):
    t0 = time.perf_counter()
    _, records = _sweep(ARM_PAIRS, 30, 20, seed=5)
    elapsed = time.perf_counter() - t0
    means = [a.fpt_mean for a in aggregate(records)]
    drops = [(i, means[i], means[i + 1]) for i in range(len(means) - 1)
             if means[i + 1] < means[i] - 0.02 * max(means[i], means[i + 1])]
    failed = sum(r.failed for r in records)
    ok = not drops and not failed and elapsed <= 600
    report(capsys, 5, ok, "mean FPT by arms 1,2,3,6,9,12: " + ", ".join(f"{m:.3f}" for m in means)
           + f"; {elapsed:.1f} s")
    assert failed == 0
    assert not drops, drops
    assert elapsed <= 600


def test_speedup_trend(capsys):
    _, records = _sweep(((1, 1), (3, 4)), 100, 10, seed=6)
    one, twelve = aggregate(records)
    speedup = twelve.fpt_mean / one.fpt_mean
    ok = speedup >= 8 and 0.10 <= one.fpt_mean <= 0.30
    report(capsys, 6, ok, f"FPT 1 arm {one.fpt_mean:.4f} (reference 0.17), 12 arms {twelve.fpt_mean:.4f}, "
           f"ratio {speedup:.2f}")
    assert 0.10 <= one.fpt_mean <= 0.30
    assert speedup >= 8


def test_trapezoid_oracle(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        d = float(rng.choice([rng.uniform(0, 0.05), rng.uniform(0, 3.0)]))
        vp = float(rng.uniform(0.05, 2.0))
        a = float(rng.uniform(0.1, 5.0))
        worst = max(worst, abs(trapezoid_time(d, vp, a) - integrated_travel_time(d, vp, a)))
    report(capsys, 7, worst <= 1e-6, f"1000 queries, max |error| {worst:.2e} s")
    assert worst <= 1e-6


def test_sweep_determinism(capsys):
    pairs = ((1, 1), (2, 1), (3, 2))
    spec = SweepSpec(pairs=pairs, densities=(5.0, 30.0), replications=3,
                     scenario=ScenarioSpec(row_length=5.0), master_seed=42)
    a = metrics_csv(run_sweep(spec)).encode()
    b = metrics_csv(run_sweep(spec)).encode()
    c = metrics_csv(run_sweep(spec, workers=2)).encode()
    ok = a == b == c
    report(capsys, 8, ok, f"{len(a)} bytes, serial repeat identical {a == b}, 2 workers identical {a == c}")
    assert ok


def test_scale_smoke(capsys):
    fm = generate_uniform(ScenarioSpec(row_length=50.0, density=30.0, seed=9))
    cfg = with_geometry(HarvesterConfig(), 3, 4)
    t0 = time.perf_counter()
    plan = plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm)
    elapsed = time.perf_counter() - t0
    ok = elapsed <= 60 and len(fm) == 3000 and math.isfinite(plan.makespan)
    report(capsys, 9, ok, f"N={len(fm)} (3,4) scheduled in {elapsed:.2f} s, v={plan.vehicle_speed:.4f} m/s")
    assert len(fm) == 3000
    assert elapsed <= 60
