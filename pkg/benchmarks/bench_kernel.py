"""Compiled vs pure-Python cell scheduling kernel.

    python benchmarks/bench_kernel.py [--length 50] [--density 30] [--repeat 5]

Times one full plan (all speed probes, both candidates) per backend and a
single-cell call at a fixed speed, and checks that both backends return
identical arrival times.
"""
from __future__ import annotations

import argparse
import statistics
import time

from harvestplan.model import HarvesterConfig, with_geometry
from harvestplan.scenarios import ScenarioSpec, generate_uniform
from harvestplan.scheduling import kernels, plan_velocity_and_schedule
from harvestplan.scheduling.scheduler import _CellArrays
from harvestplan.sequencing import generate_candidates


def _time(fn, repeat: int) -> float:
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=float, default=50.0)
    ap.add_argument("--density", type=float, default=30.0)
    ap.add_argument("--rows", type=int, default=3)
    ap.add_argument("--cells", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    compiled = kernels.schedule_cell_compiled
    if compiled is None:
        print("compiled kernel not built; only the Python kernel is available")
        return
    cfg = with_geometry(HarvesterConfig(), args.rows, args.cells)
    fm = generate_uniform(ScenarioSpec(row_length=args.length, density=args.density, seed=1))
    cands = generate_candidates(fm, cfg)
    plan = plan_velocity_and_schedule(cands, cfg, fm)
    cell = _CellArrays(cands[0].cell(1), fm, cfg, 1)
    v = plan.vehicle_speed

    a = cell.run(v, compiled)
    b = cell.run(v, kernels.schedule_cell_py)
    same = all(x.arrival == y.arrival for ra, rb in zip(a.schedule.rows, b.schedule.rows) for x, y in zip(ra, rb))
    print(f"N={len(fm)} R={args.rows} C={args.cells} v={v:.6g} identical_arrivals={same}")

    t_c = _time(lambda: cell.run(v, compiled), args.repeat)
    t_p = _time(lambda: cell.run(v, kernels.schedule_cell_py), max(1, args.repeat // 2))
    print(f"single cell  compiled {t_c * 1e3:9.3f} ms   python {t_p * 1e3:9.3f} ms   x{t_p / t_c:6.1f}")

    saved = kernels.schedule_cell
    try:
        kernels.schedule_cell = compiled
        p_c = _time(lambda: plan_velocity_and_schedule(cands, cfg, fm), args.repeat)
        kernels.schedule_cell = kernels.schedule_cell_py
        p_p = _time(lambda: plan_velocity_and_schedule(cands, cfg, fm), 1)
    finally:
        kernels.schedule_cell = saved
    print(f"full plan    compiled {p_c * 1e3:9.3f} ms   python {p_p * 1e3:9.3f} ms   x{p_p / p_c:6.1f}")


if __name__ == "__main__":
    main()
