"""Rest-to-rest trapezoidal timing and per-fruit picking durations."""
from __future__ import annotations

import math

from .model import Fruit, FruitMap, HarvesterConfig


def trapezoid_time(distance: float, v_peak: float, a: float) -> float:
    """Minimum rest-to-rest time to cover ``distance`` with |v| <= v_peak, |acc| <= a."""
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    if distance >= v_peak * v_peak / a:
        return distance / v_peak + v_peak / a
    return 2.0 * math.sqrt(distance / a)


def picking_duration(fruit: Fruit, cfg: HarvesterConfig) -> float:
    """Dwell time at a fruit: extend along y, grasp/detach, retract (or just grasp)."""
    if cfg.picking_duration_mode == "constant":
        return cfg.td_grasp
    reach = trapezoid_time(fruit.y, cfg.limits.v_max, cfg.limits.a_max)
    return reach + cfg.td_grasp + reach


def picking_durations(fm: FruitMap, cfg: HarvesterConfig) -> dict[int, float]:
    return {f.id: picking_duration(f, cfg) for f in fm}


def max_picking_duration(fm: FruitMap, cfg: HarvesterConfig) -> float:
    if len(fm) == 0:
        return cfg.td_grasp
    return max(picking_duration(f, cfg) for f in fm)

