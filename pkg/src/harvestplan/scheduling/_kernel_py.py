"""Pure-Python cell scheduling kernel (fallback for the compiled one)."""
from __future__ import annotations

import math

import numpy as np

from ..model import KinematicLimits
from .timing import horizontal_time, rear_margin, update_yield_info, vertical_time


def schedule_cell(fx, fz, tp, valid, x0, z0, v, v_max, a_max, front0, rear0, clearance):
    """Schedule one cell at vehicle speed ``v``.

    Arrays are ``R x K`` (row, zone); ``valid[r, k] == 0`` marks a SKIP.
    Returns ``(feasible, fail_row, fail_k, arrival)``; arrival is NaN at SKIPs
    and for entries after a failure.
    """
    R, K = fx.shape
    limits = KinematicLimits(v_max, a_max)
    margin = rear_margin(v, a_max)
    t_cur = [0.0] * R
    x_cur = [float(x) for x in x0]
    z_cur = [float(z) for z in z0]
    pending: list[list[tuple[float, float]]] = [[] for _ in range(R)]
    arrival = np.full((R, K), math.nan)

    for k in range(K):
        t_min = min(t_cur)
        for r in range(R):
            if pending[r] and pending[r][0][1] <= t_min:
                pending[r] = [p for p in pending[r] if p[1] > t_min]
        # yield info is refreshed for every row before any row advances
        infos = [update_yield_info(r, z_cur, t_cur, fz[r, k], pending) if valid[r, k] else None
                 for r in range(R)]
        for r in range(R):
            if not valid[r, k]:
                continue
            t_v = vertical_time(infos[r], z_cur[r], fz[r, k], t_cur[r], limits)
            t_h = horizontal_time(x_cur[r], fx[r, k], t_cur[r], v, limits, front0, clearance)
            t_next = max(t_v, t_h)
            arrival[r, k] = t_next
            depart = t_next + tp[r, k]
            if fx[r, k] < rear0 + v * depart + margin:
                return False, r, k, arrival
            pending[r].append((z_cur[r], t_cur[r]))
            t_cur[r] = depart
            x_cur[r] = fx[r, k]
            z_cur[r] = fz[r, k]
    return True, -1, -1, arrival
