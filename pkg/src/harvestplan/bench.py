"""Replicated sweeps over harvester geometries and the throughput plot."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import HarvesterConfig, config_from_dict, config_to_dict, with_geometry
from .scenarios import ScenarioSpec, generate_uniform
from .scheduling import NoFeasiblePlan, plan_velocity_and_schedule
from .sequencing import generate_candidates

METRICS_HEADER = ["R", "C", "arms", "density", "seed", "N", "v", "makespan", "fpt", "plan_ms", "lp_ms", "strategy"]


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    pairs: tuple[tuple[int, int], ...]
    densities: tuple[float, ...]
    replications: int = 1
    scenario: ScenarioSpec = field(default_factory=lambda: ScenarioSpec(row_length=10.0))
    config: HarvesterConfig = field(default_factory=HarvesterConfig)
    master_seed: int = 0
    trajectories: bool = False
    timing: bool = False

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.pairs or not self.densities:
            raise ValueError("a sweep needs at least one (R, C) pair and one density")
        for r, c in self.pairs:
            if int(r) < 1 or int(c) < 1:
                raise ValueError(f"invalid (R, C) pair {(r, c)}")
        for d in self.densities:
            if not d > 0:
                raise ValueError(f"density must be > 0, got {d}")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        known = {"pairs", "densities", "replications", "scenario", "config", "master_seed",
                 "trajectories", "timing", "workers"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        scen = dict(d.get("scenario", {}))
        scen.setdefault("row_length", 10.0)
        scen.pop("seed", None)
        scen.pop("density", None)
        return cls(
            pairs=tuple((int(r), int(c)) for r, c in d["pairs"]),
            densities=tuple(float(x) for x in d["densities"]),
            replications=int(d.get("replications", 1)),
            scenario=ScenarioSpec(**scen),
            config=config_from_dict(d.get("config", {})),
            master_seed=int(d.get("master_seed", 0)),
            trajectories=bool(d.get("trajectories", False)),
            timing=bool(d.get("timing", False)),
        )

    def jobs(self) -> list[tuple[int, int, float, int]]:
        return [(r, c, dens, rep) for r, c in self.pairs for dens in self.densities
                for rep in range(self.replications)]


def replication_seed(master_seed: int, rows: int, cells: int, density: float, rep: int) -> int:
    """Seed of one replication, stable across runs and platforms."""
    key = f"{master_seed}|{rows}|{cells}|{float(density)!r}|{rep}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class MetricsRecord:
    R: int
    C: int
    arms: int
    density: float
    seed: int
    N: int
    vehicle_speed: float | None
    makespan: float | None
    fpt: float | None
    plan_wall_time: float | None
    lp_wall_time: float | None
    strategy: str

    @property
    def failed(self) -> bool:
        return self.fpt is None

    def row(self) -> list[str]:
        def num(x, scale=1.0):
            return "" if x is None else repr(float(x) * scale)
        return [str(self.R), str(self.C), str(self.arms), repr(float(self.density)), str(self.seed), str(self.N),
                num(self.vehicle_speed), num(self.makespan), num(self.fpt),
                num(self.plan_wall_time, 1e3), num(self.lp_wall_time, 1e3), self.strategy]


def run_replication(job: tuple, spec: SweepSpec) -> MetricsRecord:
    rows, cells, density, rep = job
    seed = replication_seed(spec.master_seed, rows, cells, density, rep)
    scen = ScenarioSpec(spec.scenario.row_length, spec.scenario.height, spec.scenario.depth, density, seed)
    cfg = with_geometry(spec.config, rows, cells)
    fm = generate_uniform(scen)
    t0 = time.perf_counter()
    try:
        plan = plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm)
    except NoFeasiblePlan as exc:
        return MetricsRecord(rows, cells, rows * cells, density, seed, len(fm), None, None, None, None, None,
                             f"FAILED: {exc.diagnostic or exc}")
    t_plan = time.perf_counter() - t0
    t_lp = None
    strategy = plan.strategy
    if spec.trajectories:
        from .trajectory import TrajectoryError, generate_trajectories
        t1 = time.perf_counter()
        try:
            generate_trajectories(plan, cfg, fm)
        except TrajectoryError as exc:
            strategy = f"{strategy} LP-FAILED: {exc}"
        t_lp = time.perf_counter() - t1
    fpt = len(fm) / plan.makespan if plan.makespan > 0 else 0.0
    return MetricsRecord(rows, cells, rows * cells, density, seed, len(fm), plan.vehicle_speed, plan.makespan, fpt,
                         t_plan if spec.timing else None, t_lp if spec.timing else None, strategy)


def _run_job(args) -> MetricsRecord:
    spec_dict, job = args
    return run_replication(job, SweepSpec.from_dict(spec_dict))


def _spec_to_internal(spec: SweepSpec) -> dict:
    return {"pairs": spec.pairs, "densities": spec.densities, "replications": spec.replications,
            "scenario": asdict(spec.scenario), "config": config_to_dict(spec.config),
            "master_seed": spec.master_seed, "trajectories": spec.trajectories, "timing": spec.timing}


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[MetricsRecord]:
    """All replications in specification order, whatever the worker count."""
    jobs = spec.jobs()
    if workers <= 1 or len(jobs) <= 1:
        return [run_replication(j, spec) for j in jobs]
    payload = _spec_to_internal(spec)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order, so output is independent of the worker count
        return list(pool.map(_run_job, [(payload, j) for j in jobs]))


def metrics_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


@dataclass(frozen=True)
class Aggregate:
    R: int
    C: int
    arms: int
    density: float
    n: int
    failed: int
    fpt_mean: float | None
    fpt_std: float | None


def aggregate(records: Sequence[MetricsRecord]) -> list[Aggregate]:
    """Mean and sample standard deviation of FPT per (R, C, density), in first-seen order."""
    groups: dict[tuple, list[MetricsRecord]] = {}
    for rec in records:
        groups.setdefault((rec.R, rec.C, rec.density), []).append(rec)
    out = []
    for (r, c, dens), recs in groups.items():
        vals = [x.fpt for x in recs if not x.failed]
        mean = statistics.fmean(vals) if vals else None
        std = statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)
        out.append(Aggregate(r, c, r * c, dens, len(recs), len(recs) - len(vals), mean, std))
    return out


def summary_json(aggs: Sequence[Aggregate]) -> str:
    return json.dumps([asdict(a) for a in aggs], indent=1) + "\n"


def read_metrics(text: str) -> list[MetricsRecord]:
    """Parse a metrics CSV; errors name the offending (1-based) line."""
    lines = text.splitlines()
    if not lines:
        raise MetricsError("empty metrics file")
    reader = csv.reader(lines)
    header = next(reader)
    if header != METRICS_HEADER:
        raise MetricsError(f"line 1: expected header {','.join(METRICS_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(METRICS_HEADER):
            raise MetricsError(f"line {lineno}: expected {len(METRICS_HEADER)} fields, got {len(row)}")
        try:
            def opt(s, scale=1.0):
                return None if s == "" else float(s) * scale
            rec = MetricsRecord(int(row[0]), int(row[1]), int(row[2]), float(row[3]), int(row[4]), int(row[5]),
                                opt(row[6]), opt(row[7]), opt(row[8]), opt(row[9], 1e-3), opt(row[10], 1e-3),
                                row[11])
        except ValueError as exc:
            raise MetricsError(f"line {lineno}: {exc}") from None
        out.append(rec)
    return out


def plot_fpt(records: Sequence[MetricsRecord], path: str | Path) -> dict[float, list[tuple[int, float, float]]]:
    """FPT against arm count, one series per density.

    Returns the plotted series as ``{density: [(arms, mean, std), ...]}``;
    points with a single successful replication get no error bar.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    aggs = [a for a in aggregate(records) if a.fpt_mean is not None]
    if not aggs:
        raise MetricsError("no successful records to plot")
    series: dict[float, list[tuple[int, float, float]]] = {}
    for a in sorted(aggs, key=lambda a: (a.density, a.arms, a.R)):
        std = a.fpt_std if a.n - a.failed > 1 else 0.0
        series.setdefault(a.density, []).append((a.arms, a.fpt_mean, std))
    fig, ax = plt.subplots(figsize=(6, 4))
    for dens, pts in series.items():
        xs, ys, errs = zip(*pts)
        cont = ax.errorbar(xs, ys, yerr=errs if any(errs) else None, marker="o", capsize=3,
                           label=f"{dens:g} fruits/m²")
        for art in cont.get_children():
            art.set_gid(f"density-{dens:g}")
    ax.set_xlabel("number of arms")
    ax.set_ylabel("FPT (fruits/s)")
    ax.legend(title="density")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return series
