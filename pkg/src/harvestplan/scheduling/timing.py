"""Per-move timing rules used when scheduling one cell.

An arm that must pass a vertical neighbour's height stops there until the
neighbour has left (a *yield*).  Horizontal moves are rest-to-rest in the
world frame and may not arrive at a fruit before the advancing front edge
of the cell has swept past it with enough room to brake.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

from ..model import KinematicLimits
from ..motion import trapezoid_time


class YieldRecord(NamedTuple):
    z_yield: float
    t_yield: float


def update_yield_info(
    r: int,
    z_cur: Sequence[float],
    t_cur: Sequence[float],
    z_target: float,
    pending: Sequence[Sequence[tuple[float, float]]] | None = None,
) -> list[YieldRecord]:
    """Yield points for arm ``r`` (0-based) heading to ``z_target``.

    Scans the arms above (moving up) or below (moving down).  An arm whose
    current height lies strictly between ``z_cur[r]`` and ``z_target`` gives a
    record ``(its z, its free time)``.  ``pending`` holds, per arm, earlier
    dwells ``(z, depart)`` that a lagging neighbour has not finished yet;
    those inside the travel span and departing after ``t_cur[r]`` are
    yielded to as well.  Records are ordered along the direction of travel.
    """
    z0 = z_cur[r]
    if z_target == z0:
        return []
    d = 1 if z_target > z0 else -1
    lo, hi = (z0, z_target) if d > 0 else (z_target, z0)
    recs: list[YieldRecord] = []
    j = r + d
    while 0 <= j < len(z_cur):
        if lo < z_cur[j] < hi:
            recs.append(YieldRecord(z_cur[j], t_cur[j]))
        if pending is not None:
            for z, dep in pending[j]:
                if dep > t_cur[r] and lo < z < hi:
                    recs.append(YieldRecord(z, dep))
        j += d
    recs.sort(key=lambda rec: (d * rec.z_yield, rec.t_yield))
    return recs


def vertical_time(yield_info: Sequence[YieldRecord], z_cur: float, z_target: float,
                  t: float, limits: KinematicLimits) -> float:
    """Arrival time at ``z_target``, stopping at each yield point until it is released."""
    z = z_cur
    for z_y, t_y in yield_info:
        t = max(t_y, t + trapezoid_time(abs(z_y - z), limits.v_max, limits.a_max))
        z = z_y
    return t + trapezoid_time(abs(z_target - z), limits.v_max, limits.a_max)


def ride_time(x_target: float, front0: float, v: float, a_max: float) -> float:
    """Earliest time an arm can be at rest at ``x_target`` behind a front edge
    that started at ``front0`` and advances at ``v``."""
    return (x_target - front0) / v + v / (2.0 * a_max)


def horizontal_time(x_cur: float, x_target: float, t: float, v: float,
                    limits: KinematicLimits, front0: float, clearance: float) -> float:
    """Arrival time at ``x_target`` for an arm leaving ``x_cur`` at rest at time ``t``.

    ``front0`` is the cell's front edge at t = 0.  World-frame peak speed is
    ``v_max + v`` forward and ``v_max - v`` backward.
    """
    dx = x_target - x_cur
    peak = limits.v_max + v if dx >= 0 else limits.v_max - v
    if peak <= 0:
        return math.inf
    t_move = t + trapezoid_time(abs(dx), peak, limits.a_max)
    t_ride = ride_time(x_target, front0, v, limits.a_max)
    d_front = front0 + v * t - x_cur
    if d_front >= clearance:
        t_arr = t_move
    else:
        # pinned against the front edge: ride it, then brake onto the target
        t_arr = max(t_ride, t_move)
    return max(t_arr, t_ride)


def rear_margin(v: float, a_max: float) -> float:
    """Gap an arm at rest needs ahead of the rear edge to get back up to speed ``v``."""
    return v * v / (2.0 * a_max)
