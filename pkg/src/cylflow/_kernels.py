"""Compiled inner loop for the explicit (Heun) time stepper.

The explicit scheme runs under a diffusive CFL restriction, so long
horizons take millions of steps; this module keeps that loop off the
interpreter.  Arithmetic is written so that reflection-mirrored inputs
produce bit-identical mirrored outputs: second differences are grouped as
``(left + right) - 2*center`` and the advective term pairs an exactly-odd
coefficient with an exactly-negated difference.  No fastmath.
"""

import math

import numpy as np
from numba import njit

# Chunk status codes shared with the driver.
OK = 0
REACHED = 1
STIFF = 2


@njit(cache=True)
def _rhs(w, out, h, beta, r0half, km, kp):
    n = w.shape[0] - 1
    g_left = w[1] + 2.0 * h * km * math.expm1(w[0])
    g_right = w[n - 1] + 2.0 * h * kp * math.expm1(w[n])
    h2 = h * h
    two_h = 2.0 * h
    for i in range(n + 1):
        left = g_left if i == 0 else w[i - 1]
        right = g_right if i == n else w[i + 1]
        lap = ((left + right) - 2.0 * w[i]) / h2 + beta[i] * (right - left) / two_h
        out[i] = math.exp(-2.0 * w[i]) * (lap - r0half[i])


@njit(cache=True)
def _area(w, f0, simp):
    total = 0.0
    for i in range(w.shape[0]):
        total += simp[i] * math.exp(2.0 * w[i]) * f0[i]
    return 2.0 * math.pi * total


@njit(cache=True)
def heun_chunk(w, t, steps_target, h, beta, r0half, km, kp, f0, simp,
               dfac, dt_min, stop_kind, stop_value, tnorm, area_prev):
    """Advance up to ``steps_target`` Heun steps in place.

    ``dfac`` folds the CFL prefactor ``safety * h^2 / (2 (1 + max|beta| h))``
    so the per-step limit is ``dfac * exp(2 min w)``.  Stop kinds:
    0 = t_tilde target (final step clipped to land exactly), 1 = normalized
    time target (trapezoid accumulation of 1/area), 2 = area floor,
    3 = plain step count.  Returns
    ``(t, steps_done, last_dt, status, tnorm, area_prev)``.
    """
    n = w.shape[0] - 1
    f0buf = np.empty(n + 1)
    f1buf = np.empty(n + 1)
    w1 = np.empty(n + 1)
    done = 0
    last_dt = 0.0
    while done < steps_target:
        wmin = w[0]
        for i in range(1, n + 1):
            if w[i] < wmin:
                wmin = w[i]
        dt = dfac * math.exp(2.0 * wmin)
        if dt < dt_min:
            return t, done, last_dt, STIFF, tnorm, area_prev
        clipped = False
        if stop_kind == 0 and t + dt >= stop_value:
            dt = stop_value - t
            clipped = True
            if dt <= 0.0:
                return t, done, last_dt, REACHED, tnorm, area_prev

        _rhs(w, f0buf, h, beta, r0half, km, kp)
        for i in range(n + 1):
            w1[i] = w[i] + dt * f0buf[i]
        _rhs(w1, f1buf, h, beta, r0half, km, kp)
        c = 0.5 * dt
        for i in range(n + 1):
            w[i] = w[i] + c * (f0buf[i] + f1buf[i])

        t = stop_value if clipped else t + dt
        done += 1
        last_dt = dt

        if stop_kind == 1:
            a = _area(w, f0, simp)
            tnorm += 0.5 * dt * (1.0 / area_prev + 1.0 / a)
            area_prev = a
            if tnorm >= stop_value:
                return t, done, last_dt, REACHED, tnorm, area_prev
        elif stop_kind == 2:
            area_prev = _area(w, f0, simp)
            if area_prev < stop_value:
                return t, done, last_dt, REACHED, tnorm, area_prev
        elif stop_kind == 0 and clipped:
            return t, done, last_dt, REACHED, tnorm, area_prev
    return t, done, last_dt, OK, tnorm, area_prev
