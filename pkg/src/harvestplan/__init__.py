"""Scheduling and trajectory planning for multi-arm Cartesian fruit harvesters."""
from .model import (
    ArmId,
    ArmState,
    ConfigError,
    Fruit,
    FruitMap,
    FruitMapError,
    HarvesterConfig,
    KinematicLimits,
    cell_bounds,
    load_config,
    load_fruit_map,
    validate_config,
)
from .motion import picking_duration, trapezoid_time
from .scenarios import ScenarioSpec, generate_uniform
from .scheduling import NoFeasiblePlan, PlanResult, plan_velocity_and_schedule
from .sequencing import HarvesterSequence, Strategy, build_zones, generate_candidates, split_clusters


def plan(fm: FruitMap, cfg: HarvesterConfig) -> PlanResult:
    """Candidate sequences followed by the speed/schedule search."""
    return plan_velocity_and_schedule(generate_candidates(fm, cfg), cfg, fm)


__version__ = "0.1.0"
