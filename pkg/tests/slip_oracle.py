"""Reference apex map: closed-form flight, adaptive solve_ivp stance."""

import math

import numpy as np
from scipy.integrate import solve_ivp


def apex_map_reference(p, state, theta, next_energy, dvx=0.0, dvy=0.0):
    """Return ``None`` on failure, else ``(next_state, distance)``."""
    g, l0, k, m = p.gravity, p.rest_length, p.spring_k, p.mass
    y0, vx0, e = state
    vx, vy = vx0 + dvx, dvy
    y_td = l0 * math.cos(theta)
    if y0 <= y_td:
        return None
    # descending root of y0 + vy t - g t^2 / 2 = y_td
    t_td = (vy + math.sqrt(vy * vy + 2 * g * (y0 - y_td))) / g
    x_td = vx * t_td
    vy_td = vy - g * t_td
    foot = x_td + l0 * math.sin(theta)

    def rhs(t, z):
        x, y, u, w = z
        dx = x - foot
        r = math.hypot(dx, y)
        f = k / m * (l0 - r) / r
        return [u, w, f * dx, f * y - g]

    def liftoff(t, z):
        return math.hypot(z[0] - foot, z[1]) - l0
    liftoff.terminal = True
    liftoff.direction = 1

    def ground(t, z):
        return z[1] - p.ground_clearance * l0
    ground.terminal = True
    ground.direction = -1

    # start a hair inside the spring so the liftoff event does not fire at t = 0
    z0 = np.array([x_td, y_td, vx, vy_td])
    sol = solve_ivp(rhs, (0.0, 10.0), z0, method="DOP853", rtol=1e-12, atol=1e-13,
                    events=(liftoff, ground), first_step=1e-6)
    if sol.t_events[1].size:
        return None
    if not sol.t_events[0].size:
        raise RuntimeError("no liftoff")
    x, y, u, w = sol.y_events[0][0]
    dx = x - foot
    r = math.hypot(dx, y)
    ux, uy = dx / r, y / r
    rdot = u * ux + w * uy
    tx, ty = u - rdot * ux, w - rdot * uy
    rdot = math.sqrt(max(rdot * rdot + 2 * e / m, 0.0))
    u, w = tx + rdot * ux, ty + rdot * uy
    if w <= 0:
        return None
    t_up = w / g
    y_apex = y + w * w / (2 * g)
    if y_apex < p.h_fail:
        return None
    return np.array([y_apex, u, next_energy]), x + u * t_up


def failure_threshold(p, state, theta, next_energy, angle, lo, hi, tol=1e-6):
    """Bisect the push magnitude at which the reference map first fails."""
    def fails(mag):
        imp = mag * 0.01 / p.mass
        return apex_map_reference(p, state, theta, next_energy,
                                  imp * math.cos(angle), imp * math.sin(angle)) is None
    assert not fails(lo) and fails(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fails(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
