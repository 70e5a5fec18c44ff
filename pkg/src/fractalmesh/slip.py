"""Spring-loaded inverted pendulum hopper on its apex Poincare section.

Section state is ``(apex height y, forward speed vx, stored leg energy e)``.
``e`` is the energy charged into the leg during the previous flight; it is
released radially at the next liftoff. At each apex the policy picks the
touchdown angle for the coming stance and the energy to charge for the one
after it, so the apex map is Markov in these three coordinates.

Integration is fixed-step RK4 (1 ms) for flight and stance alike, with
touchdown, liftoff and apex located by bisection on the sub-step length.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy import linalg, optimize

from .dynamics import Disturbance, Environment, SectionOutcome
from .errors import DivergenceError, InputError
from .mesh import NormalizationStats
from .policy import LinearPolicy

OK, FAILED, DIVERGED = 0, 1, 2
TOUCHDOWN, LIFTOFF, APEX = 0, 1, 2


@njit(cache=True, nogil=True)
def _accel(stance, x, y, foot_x, k_over_m, rest_length, gravity):
    if not stance:
        return 0.0, -gravity
    dx = x - foot_x
    r = math.sqrt(dx * dx + y * y)
    f = k_over_m * (rest_length - r) / r
    return f * dx, f * y - gravity


@njit(cache=True, nogil=True)
def _rk4(stance, x, y, vx, vy, h, foot_x, k_over_m, rest_length, gravity):
    a1x, a1y = _accel(stance, x, y, foot_x, k_over_m, rest_length, gravity)
    v2x = vx + 0.5 * h * a1x
    v2y = vy + 0.5 * h * a1y
    a2x, a2y = _accel(stance, x + 0.5 * h * vx, y + 0.5 * h * vy, foot_x, k_over_m, rest_length, gravity)
    v3x = vx + 0.5 * h * a2x
    v3y = vy + 0.5 * h * a2y
    a3x, a3y = _accel(stance, x + 0.5 * h * v2x, y + 0.5 * h * v2y, foot_x, k_over_m, rest_length, gravity)
    v4x = vx + h * a3x
    v4y = vy + h * a3y
    a4x, a4y = _accel(stance, x + h * v3x, y + h * v3y, foot_x, k_over_m, rest_length, gravity)
    return (x + h / 6.0 * (vx + 2.0 * v2x + 2.0 * v3x + v4x),
            y + h / 6.0 * (vy + 2.0 * v2y + 2.0 * v3y + v4y),
            vx + h / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x),
            vy + h / 6.0 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y))


@njit(cache=True, nogil=True)
def _guard(kind, x, y, vy, foot_x, rest_length, cos_td):
    if kind == TOUCHDOWN:
        return y - rest_length * cos_td
    if kind == LIFTOFF:
        dx = x - foot_x
        return math.sqrt(dx * dx + y * y) - rest_length
    return vy


@njit(cache=True, nogil=True)
def _run_phase(kind, x, y, vx, vy, foot_x, cos_td, h, event_tol, max_steps,
               k_over_m, rest_length, gravity, y_min):
    # touchdown and apex fire on a +/- crossing, liftoff on -/+
    stance = kind == LIFTOFF
    sign = 1.0 if stance else -1.0
    for _ in range(max_steps):
        nx, ny, nvx, nvy = _rk4(stance, x, y, vx, vy, h, foot_x, k_over_m, rest_length, gravity)
        if stance and ny < y_min:
            return FAILED, nx, ny, nvx, nvy
        if _guard(kind, nx, ny, nvy, foot_x, rest_length, cos_td) * sign >= 0.0:
            lo = 0.0
            hi = h
            while hi - lo > event_tol:
                mid = 0.5 * (lo + hi)
                mx, my, mvx, mvy = _rk4(stance, x, y, vx, vy, mid, foot_x, k_over_m, rest_length, gravity)
                if _guard(kind, mx, my, mvy, foot_x, rest_length, cos_td) * sign >= 0.0:
                    hi = mid
                else:
                    lo = mid
            nx, ny, nvx, nvy = _rk4(stance, x, y, vx, vy, hi, foot_x, k_over_m, rest_length, gravity)
            return OK, nx, ny, nvx, nvy
        x, y, vx, vy = nx, ny, nvx, nvy
    return DIVERGED, x, y, vx, vy


@njit(cache=True, nogil=True)
def apex_map(y0, vx0, stored_energy, theta_td, dvx, dvy, k_over_m, mass, rest_length, gravity,
             h_fail, y_min, h, event_tol, max_steps):
    """One apex-to-apex hop. Returns ``(status, y, vx, distance)``."""
    cos_td = math.cos(theta_td)
    x = 0.0
    y = y0
    vx = vx0 + dvx
    vy = dvy
    if y - rest_length * cos_td <= 0.0:
        return FAILED, y, vx, 0.0
    st, x, y, vx, vy = _run_phase(TOUCHDOWN, x, y, vx, vy, 0.0, cos_td, h, event_tol, max_steps,
                                  k_over_m, rest_length, gravity, y_min)
    if st != OK:
        return st, y, vx, x
    foot_x = x + rest_length * math.sin(theta_td)
    st, x, y, vx, vy = _run_phase(LIFTOFF, x, y, vx, vy, foot_x, cos_td, h, event_tol, max_steps,
                                  k_over_m, rest_length, gravity, y_min)
    if st != OK:
        return st, y, vx, x
    dx = x - foot_x
    r = math.sqrt(dx * dx + y * y)
    ux = dx / r
    uy = y / r
    rdot = vx * ux + vy * uy
    tx = vx - rdot * ux
    ty = vy - rdot * uy
    rdot_sq = rdot * rdot + 2.0 * stored_energy / mass
    rdot = math.sqrt(rdot_sq) if rdot_sq > 0.0 else 0.0
    vx = tx + rdot * ux
    vy = ty + rdot * uy
    if vy <= 0.0:
        return FAILED, y, vx, x
    st, x, y, vx, vy = _run_phase(APEX, x, y, vx, vy, foot_x, cos_td, h, event_tol, max_steps,
                                  k_over_m, rest_length, gravity, y_min)
    if st != OK:
        return st, y, vx, x
    if y < h_fail:
        return FAILED, y, vx, x
    return OK, y, vx, x


@njit(cache=True, nogil=True)
def _apex_map_batch(y0, vx0, energy, theta, dvx, dvy, k_over_m, mass, rest_length, gravity,
                    h_fail, y_min, h, event_tol, max_steps):
    n = y0.shape[0]
    status = np.empty(n, dtype=np.int64)
    out = np.empty((n, 3))
    for i in range(n):
        st, y, vx, dist = apex_map(y0[i], vx0[i], energy[i], theta[i], dvx[i], dvy[i], k_over_m, mass,
                                   rest_length, gravity, h_fail, y_min, h, event_tol, max_steps)
        status[i] = st
        out[i, 0] = y
        out[i, 1] = vx
        out[i, 2] = dist
    return status, out


@dataclass(frozen=True)
class SlipParams:
    mass: float = 1.0
    spring_k: float = 250.0
    rest_length: float = 1.0
    gravity: float = 9.81
    h_fail: float = 1.0
    ground_clearance: float = 0.5
    nominal_apex: float = 1.05
    theta_nominal: float = 0.25
    theta_range: float = 0.2
    thrust_range: float = 0.5
    action_cost: float = 0.01
    alive_bonus: float = 0.0
    dt: float = 1e-3
    event_tol: float = 1e-9
    max_phase_steps: int = 20000

    def __post_init__(self):
        for name in ("mass", "spring_k", "rest_length", "gravity", "dt", "event_tol"):
            if not getattr(self, name) > 0:
                raise InputError(f"SLIP parameter {name} must be positive")
        if not 0 < self.theta_nominal - self.theta_range and self.theta_nominal + self.theta_range < math.pi / 2:
            raise InputError("touchdown angle range must stay inside (0, pi/2)")


class SlipHopper(Environment):
    """SLIP apex map with policy-commanded touchdown angle and leg thrust.

    Actions are clipped to [-1, 1]: ``a[0]`` offsets the touchdown angle by
    up to ``theta_range`` radians, ``a[1]`` sets the energy to charge for the
    next liftoff, up to ``thrust_range`` joules either way. The hop reward is
    forward distance minus ``action_cost * |a|^2`` plus ``alive_bonus``.
    """

    name = "slip"
    state_dim = 3
    action_dim = 2

    def __init__(self, params: SlipParams | None = None, **overrides):
        self.p = params if params is not None else SlipParams(**overrides)
        self._fixed_point = None

    def params(self):
        return asdict(self.p)

    def _kernel_args(self):
        p = self.p
        return (p.spring_k / p.mass, p.mass, p.rest_length, p.gravity, p.h_fail,
                p.ground_clearance * p.rest_length, p.dt, p.event_tol, p.max_phase_steps)

    def decode_action(self, action) -> tuple[float, float, np.ndarray]:
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[:2], -1.0, 1.0)
        return (self.p.theta_nominal + self.p.theta_range * a[0], self.p.thrust_range * a[1], a)

    def raw_hop(self, state, theta_td: float, next_energy: float, push: Disturbance):
        """Kernel call without reward bookkeeping; returns ``(status, next_state, distance)``."""
        s = np.asarray(state, dtype=np.float64).reshape(-1)
        dvx, dvy = push.impulse(self.p.mass)
        st, y, vx, dist = apex_map(s[0], s[1], s[2], theta_td, dvx, dvy, *self._kernel_args())
        return st, np.array([y, vx, next_energy]), dist

    def step_action(self, state, action, push):
        theta, energy, a = self.decode_action(action)
        st, nxt, dist = self.raw_hop(state, theta, energy, push)
        if st == DIVERGED:
            raise DivergenceError("SLIP integration exceeded the step cap",
                                  state=np.asarray(state, dtype=np.float64), disturbance=push)
        if st == FAILED:
            return SectionOutcome.failure()
        reward = dist - self.p.action_cost * float(a @ a) + self.p.alive_bonus
        return SectionOutcome.next(nxt, reward)

    def step_many(self, states, actions, pushes):
        states = np.asarray(states, dtype=np.float64).reshape(-1, 3)
        n = states.shape[0]
        if n == 0:
            return []
        acts = np.clip(np.asarray(actions, dtype=np.float64).reshape(n, -1)[:, :2], -1.0, 1.0)
        theta = self.p.theta_nominal + self.p.theta_range * acts[:, 0]
        energy = self.p.thrust_range * acts[:, 1]
        imp = np.array([p.impulse(self.p.mass) for p in pushes], dtype=np.float64).reshape(n, 2)
        status, out = _apex_map_batch(states[:, 0].copy(), states[:, 1].copy(), states[:, 2].copy(),
                                      theta, imp[:, 0].copy(), imp[:, 1].copy(), *self._kernel_args())
        results = []
        for i in range(n):
            if status[i] == DIVERGED:
                raise DivergenceError("SLIP integration exceeded the step cap",
                                      state=states[i].copy(), disturbance=pushes[i])
            if status[i] == FAILED:
                results.append(SectionOutcome.failure())
            else:
                a = acts[i]
                reward = out[i, 2] - self.p.action_cost * float(a @ a) + self.p.alive_bonus
                results.append(SectionOutcome.next([out[i, 0], out[i, 1], energy[i]], reward))
        return results

    def is_failure(self, state):
        return float(np.asarray(state).reshape(-1)[0]) < self.p.h_fail

    def energy(self, state) -> float:
        """Mechanical energy of an apex state (stored leg energy excluded)."""
        s = np.asarray(state, dtype=np.float64).reshape(-1)
        return self.p.mass * (self.p.gravity * s[0] + 0.5 * s[1] ** 2)

    def fixed_point(self) -> np.ndarray:
        """Passive period-1 apex state at the nominal angle and apex height."""
        if self._fixed_point is None:
            y0 = self.p.nominal_apex
            theta = self.p.theta_nominal

            def speed_gap(v):
                st, nxt, _ = self.raw_hop([y0, v, 0.0], theta, 0.0, Disturbance(0.0))
                return nxt[1] - v if st == OK else math.nan

            grid = np.linspace(0.2, 6.0, 59)
            gaps = [speed_gap(v) for v in grid]
            for lo, hi, glo, ghi in zip(grid[:-1], grid[1:], gaps[:-1], gaps[1:]):
                if np.isfinite(glo) and np.isfinite(ghi) and glo * ghi < 0:
                    v = optimize.brentq(speed_gap, lo, hi, xtol=1e-14, rtol=1e-15)
                    break
            else:
                raise InputError("no passive period-1 gait found for these SLIP parameters")
            self._fixed_point = np.array([y0, v, 0.0])
        return self._fixed_point.copy()

    def nominal_init(self, rng=None, noise=0.0):
        s = self.fixed_point()
        if rng is not None and noise > 0:
            s = s + rng.uniform(-noise, noise, size=3)
        return s

    def linearize(self, eps: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
        """Central-difference Jacobians of the apex map at the fixed point."""
        s0 = self.fixed_point()

        def f(s, a):
            theta, energy, _ = self.decode_action(a)
            st, nxt, _ = self.raw_hop(s, theta, energy, Disturbance(0.0))
            if st != OK:
                raise InputError("fixed point is not interior; cannot linearize")
            return nxt

        A = np.zeros((3, 3))
        B = np.zeros((3, 2))
        for i in range(3):
            d = np.zeros(3)
            d[i] = eps
            A[:, i] = (f(s0 + d, np.zeros(2)) - f(s0 - d, np.zeros(2))) / (2 * eps)
        for i in range(2):
            d = np.zeros(2)
            d[i] = eps
            B[:, i] = (f(s0, d) - f(s0, -d)) / (2 * eps)
        return A, B


def period_one_policy(env: SlipHopper, obs_std=(1.0, 1.0, 1.0), action_weight: float = 1.0) -> LinearPolicy:
    """Discrete LQR policy that holds the passive period-1 gait.

    The policy's whitening mean is the fixed point itself, so its action
    there is exactly zero and the gait is reproduced to root-finding accuracy.
    """
    s0 = env.fixed_point()
    A, B = env.linearize()
    P = linalg.solve_discrete_are(A, B, np.eye(3), action_weight * np.eye(2))
    K = np.linalg.solve(B.T @ P @ B + action_weight * np.eye(2), B.T @ P @ A)
    std = np.asarray(obs_std, dtype=np.float64)
    return LinearPolicy(-K * std[None, :], NormalizationStats(s0, std), meta={"source": "period_one_lqr"})
