"""Reference computations the tests compare against.

``integrated_travel_time`` finds the duration of the fastest rest-to-rest
motion by integrating its velocity profile numerically and root-finding on
the covered distance, without using the closed form.
"""
from __future__ import annotations

from scipy.integrate import quad
from scipy.optimize import brentq


def _profile_distance(duration: float, v_peak: float, a: float) -> float:
    def speed(t: float) -> float:
        return max(0.0, min(a * t, v_peak, a * (duration - t)))

    # corners of the profile as breakpoints keep quad exact to rounding
    pts = sorted({min(v_peak / a, duration / 2), max(duration - v_peak / a, duration / 2), duration / 2})
    pts = [p for p in pts if 0 < p < duration]
    val, _ = quad(speed, 0.0, duration, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def integrated_travel_time(distance: float, v_peak: float, a: float) -> float:
    if distance == 0:
        return 0.0
    hi = 1.0
    while _profile_distance(hi, v_peak, a) < distance:
        hi *= 2.0
    return brentq(lambda T: _profile_distance(T, v_peak, a) - distance, 0.0, hi, xtol=1e-13, rtol=1e-15,
                  maxiter=500)
