"""``harvestplan`` command line: generate, plan, sweep, plot."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .model import ConfigError, FruitMapError, HarvesterConfig, load_config, load_fruit_map, with_geometry

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_INVALID = 5


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"harvestplan: {msg}", file=sys.stderr)


def cmd_generate(args) -> int:
    from .scenarios import ScenarioSpec, generate_uniform, write_scenario

    try:
        spec = ScenarioSpec(args.length, args.height, args.depth, args.density, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fm = generate_uniform(spec)
    try:
        write_scenario(fm, spec, args.output)
    except OSError as exc:
        _err(f"cannot write {args.output}: {exc}")
        return EXIT_USAGE
    print(f"wrote {len(fm)} fruits to {args.output}")
    return EXIT_OK


def _load_config(args) -> HarvesterConfig:
    cfg = load_config(args.config) if args.config else HarvesterConfig()
    if args.rows or args.cells:
        cfg = with_geometry(cfg, args.rows or cfg.rows, args.cells or cfg.cells)
    if args.epsilon_v is not None:
        from dataclasses import replace
        cfg = replace(cfg, epsilon_v=args.epsilon_v)
    cfg.check()
    return cfg


def cmd_plan(args) -> int:
    from .scheduling import NoFeasiblePlan, plan_velocity_and_schedule
    from .sequencing import generate_candidates
    from .validation import ValidationReport, check_dwell_ordering, check_trajectories, replay_schedule

    try:
        cfg = _load_config(args)
        fm = load_fruit_map(args.map, height=cfg.frame_height)
    except (FruitMapError, ConfigError, ValueError, json.JSONDecodeError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    except OSError as exc:
        _err(f"cannot read input: {exc}")
        return EXIT_PARSE

    t0 = time.perf_counter()
    try:
        plan = plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm)
    except NoFeasiblePlan as exc:
        _err(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    t_plan = time.perf_counter() - t0

    out = plan.to_json() + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)

    replay = replay_schedule(plan, cfg, fm)
    report = ValidationReport(max_residual={})
    if not args.no_traj:
        from .trajectory import TrajectoryError, generate_trajectories, write_trajectories_csv
        try:
            trajs = generate_trajectories(plan, cfg, fm, max_retries=args.max_retries,
                                          window_steps=args.window_steps)
        except TrajectoryError as exc:
            _err(str(exc))
            return EXIT_INVALID
        if args.trajectories:
            write_trajectories_csv(trajs, args.trajectories)
        report = check_trajectories(trajs, plan, cfg, fm)
    else:
        report.n_fruits = plan.n_fruits
        report.makespan = plan.makespan
        report.fpt = plan.n_fruits / plan.makespan if plan.makespan > 0 else 0.0
    report.violations = replay.violations + check_dwell_ordering(plan, fm) + report.violations
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"v={plan.vehicle_speed:.6g} m/s makespan={plan.makespan:.6g} s fpt={report.fpt:.6g} "
          f"strategy={plan.strategy} plan_time={t_plan:.3f}s violations={len(report.violations)}",
          file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_sweep(args) -> int:
    from .bench import SweepSpec, aggregate, metrics_csv, run_sweep, summary_json

    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        spec = SweepSpec.from_dict(raw)
    except OSError as exc:
        _err(f"cannot read sweep spec: {exc}")
        return EXIT_PARSE
    except (ValueError, KeyError, TypeError) as exc:
        _err(f"bad sweep spec: {exc}")
        return EXIT_PARSE
    if args.timing:
        from dataclasses import replace
        spec = replace(spec, timing=True)
    workers = args.workers if args.workers is not None else int(raw.get("workers", 1))
    records = run_sweep(spec, workers=workers)
    Path(args.output).write_text(metrics_csv(records), encoding="utf-8")
    aggs = aggregate(records)
    if args.summary:
        Path(args.summary).write_text(summary_json(aggs), encoding="utf-8")
    failed = sum(r.failed for r in records)
    print(f"{len(records)} replications, {len(aggs)} points, {failed} failed", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .bench import MetricsError, plot_fpt, read_metrics

    try:
        records = read_metrics(Path(args.metrics).read_text(encoding="utf-8"))
    except OSError as exc:
        _err(f"cannot read metrics: {exc}")
        return EXIT_PARSE
    except MetricsError as exc:
        _err(str(exc))
        return EXIT_PARSE
    if not records:
        raise UsageError("metrics file has no records")
    try:
        series = plot_fpt(records, args.output)
    except MetricsError as exc:
        raise UsageError(str(exc)) from None
    print(f"wrote {len(series)} series to {args.output}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harvestplan", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a uniform random fruit map")
    g.add_argument("--length", type=float, default=50.0, help="row length, m")
    g.add_argument("--height", type=float, default=2.0, help="canopy height, m")
    g.add_argument("--depth", type=float, default=0.5, help="canopy depth, m")
    g.add_argument("--density", type=float, default=30.0, help="fruits per m² of canopy face")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True, help="fruit map (.csv or .json)")
    g.set_defaults(func=cmd_generate)

    pl = sub.add_parser("plan", help="plan speed, schedules and trajectories for a fruit map")
    pl.add_argument("map", help="fruit map (.csv or .json)")
    pl.add_argument("--config", help="key = value config file")
    pl.add_argument("--rows", type=int)
    pl.add_argument("--cells", type=int)
    pl.add_argument("--epsilon-v", type=float, dest="epsilon_v")
    pl.add_argument("-o", "--output", help="plan JSON (default: stdout)")
    pl.add_argument("--trajectories", help="trajectory CSV")
    pl.add_argument("--report", help="validation report JSON")
    pl.add_argument("--no-traj", action="store_true", help="stop after scheduling")
    pl.add_argument("--max-retries", type=int, default=5)
    pl.add_argument("--window-steps", type=int, default=None,
                    help="cut the trajectory horizon at idle points at least this many steps apart")
    pl.set_defaults(func=cmd_plan)

    sw = sub.add_parser("sweep", help="replicated planning over (R, C) pairs and densities")
    sw.add_argument("spec", help="sweep spec JSON")
    sw.add_argument("-o", "--output", required=True, help="metrics CSV")
    sw.add_argument("--summary", help="per-point aggregate JSON")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--timing", action="store_true", help="fill the wall-time columns")
    sw.set_defaults(func=cmd_sweep)

    pt = sub.add_parser("plot", help="FPT against arm count as SVG")
    pt.add_argument("metrics", help="metrics CSV from sweep")
    pt.add_argument("-o", "--output", required=True, help="SVG path")
    pt.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
