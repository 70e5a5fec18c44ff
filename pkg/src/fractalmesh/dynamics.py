"""Disturbances, the section-map environment contract and the small built-in systems.

An environment exposes a deterministic Poincare-section step: given a section
state, an action and a push it returns either the next section state or
failure. The SLIP hopper lives in :mod:`fractalmesh.slip`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Disturbance:
    """Planar push: ``magnitude`` newtons along ``angle`` for ``duration`` seconds."""

    magnitude: float
    angle: float = 0.0
    duration: float = 0.01

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise InputError(f"push magnitude must be >= 0, got {self.magnitude}")
        if not self.duration > 0:
            raise InputError(f"push duration must be > 0, got {self.duration}")

    def impulse(self, mass: float) -> tuple[float, float]:
        """Velocity change ``(dvx, dvy)`` imparted to a body of ``mass``."""
        dv = self.magnitude * self.duration / mass
        return dv * math.cos(self.angle), dv * math.sin(self.angle)

    @property
    def signed(self) -> float:
        """Signed magnitude along x for pushes on the horizontal axis."""
        return self.magnitude if math.cos(self.angle) >= 0 else -self.magnitude

    def to_dict(self):
        return {"magnitude": self.magnitude, "angle": self.angle, "duration": self.duration}


class DisturbanceSet(tuple):
    """Non-empty ordered tuple of pushes; the order indexes transition lists."""

    def __new__(cls, pushes):
        pushes = tuple(pushes)
        if not pushes:
            raise InputError("a disturbance set needs at least one push")
        for p in pushes:
            if not isinstance(p, Disturbance):
                raise InputError(f"not a Disturbance: {p!r}")
        return super().__new__(cls, pushes)


def disturbance_grid(count: int, f_min: float, f_max: float, duration: float = 0.01) -> DisturbanceSet:
    """``count`` horizontal pushes with signed magnitudes evenly spaced on [f_min, f_max]."""
    if count < 2:
        raise InputError(f"a disturbance grid needs count >= 2, got {count}")
    if not f_min < f_max:
        raise InputError(f"need f_min < f_max, got [{f_min}, {f_max}]")
    values = np.linspace(f_min, f_max, count)
    return DisturbanceSet(
        Disturbance(abs(float(v)), 0.0 if v >= 0 else math.pi, duration) for v in values)


@dataclass(frozen=True)
class DisturbanceSampler:
    magnitude_range: tuple[float, float] = (5.0, 15.0)
    angle_range: tuple[float, float] = (0.0, TWO_PI)
    duration: float = 0.01

    def __post_init__(self):
        lo, hi = self.magnitude_range
        if not 0 <= lo <= hi:
            raise InputError(f"bad magnitude range {self.magnitude_range}")
        a_lo, a_hi = self.angle_range
        if not 0 <= a_lo <= a_hi <= TWO_PI:
            raise InputError(f"bad angle range {self.angle_range}")
        if not self.duration > 0:
            raise InputError("duration must be positive")

    def sample(self, rng: np.random.Generator) -> Disturbance:
        return sample_disturbance(self, rng)

    def sample_block(self, rng: np.random.Generator, n: int) -> list[Disturbance]:
        mags = rng.uniform(self.magnitude_range[0], self.magnitude_range[1], n)
        angles = rng.uniform(self.angle_range[0], self.angle_range[1], n)
        return [Disturbance(float(m), float(a) % TWO_PI, self.duration) for m, a in zip(mags, angles)]


def sample_disturbance(sampler: DisturbanceSampler, rng: np.random.Generator) -> Disturbance:
    """Draw magnitude then angle uniformly; advances ``rng`` by exactly two draws."""
    magnitude = rng.uniform(*sampler.magnitude_range)
    angle = rng.uniform(*sampler.angle_range) % TWO_PI
    return Disturbance(float(magnitude), float(angle), sampler.duration)


@dataclass(frozen=True)
class SectionOutcome:
    """Result of one section step; ``state is None`` means failure."""

    state: np.ndarray | None
    reward: float = 0.0

    @property
    def failed(self) -> bool:
        return self.state is None

    @classmethod
    def next(cls, state, reward: float = 0.0) -> "SectionOutcome":
        return cls(np.asarray(state, dtype=np.float64), float(reward))

    @classmethod
    def failure(cls, reward: float = 0.0) -> "SectionOutcome":
        return cls(None, float(reward))


Policy = Callable[[np.ndarray], np.ndarray]

ZERO_PUSH = Disturbance(0.0, 0.0, 0.01)


class Environment:
    """Base class for deterministic section-map systems.

    Subclasses implement :meth:`step_action`; everything else has a default.
    """

    name = "environment"
    state_dim = 1
    action_dim = 1
    training_push = ZERO_PUSH

    def nominal_init(self, rng: np.random.Generator | None = None, noise: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def is_failure(self, state) -> bool:
        return False

    def step_action(self, state, action, push: Disturbance) -> SectionOutcome:
        raise NotImplementedError

    def action_for(self, state, policy: Policy | None) -> np.ndarray:
        if policy is None:
            return np.zeros(self.action_dim)
        return np.asarray(policy(np.asarray(state, dtype=np.float64)), dtype=np.float64)

    def section_step(self, state, policy: Policy | None, push: Disturbance) -> SectionOutcome:
        return self.step_action(state, self.action_for(state, policy), push)

    def step_many(self, states: np.ndarray, actions: np.ndarray,
                  pushes: Sequence[Disturbance]) -> list[SectionOutcome]:
        """Step row ``i`` of ``states`` with ``actions[i]`` under ``pushes[i]``."""
        return [self.step_action(s, a, p) for s, a, p in zip(states, actions, pushes)]

    def params(self) -> dict:
        return {}


class Walk1D(Environment):
    """Absorbing random walk on {1, ..., K-1}.

    Pushes with angle below pi move right, the rest move left. Position 0
    reflects back to 1 and position ``K`` is failure. Every surviving step
    pays a reward of 1.
    """

    name = "walk1d"
    state_dim = 1
    action_dim = 1

    def __init__(self, boundary: int = 5):
        if boundary < 2:
            raise InputError(f"walk1d boundary must be >= 2, got {boundary}")
        self.boundary = int(boundary)

    def nominal_init(self, rng=None, noise=0.0):
        return np.array([1.0])

    def is_failure(self, state):
        return int(round(float(np.asarray(state).reshape(-1)[0]))) >= self.boundary

    def step_action(self, state, action, push):
        pos = int(round(float(np.asarray(state).reshape(-1)[0])))
        pos += 1 if push.angle < math.pi else -1
        if pos <= 0:
            pos = 1
        if pos >= self.boundary:
            return SectionOutcome.failure()
        return SectionOutcome.next([float(pos)], 1.0)

    def params(self):
        return {"boundary": self.boundary}


class QuadraticSurrogate(Environment):
    """One-dimensional ARS test bed with a closed-form optimum.

    The state alternates between +1 and -1 and each step pays
    ``1 - (action - target_gain * state)**2``, so the best linear policy on
    unit-whitened observations has weight ``target_gain`` and earns 1 per step.
    """

    name = "quadratic"
    state_dim = 1
    action_dim = 1

    def __init__(self, target_gain: float = 2.0):
        self.target_gain = float(target_gain)

    def nominal_init(self, rng=None, noise=0.0):
        return np.array([1.0])

    def step_action(self, state, action, push):
        s = float(np.asarray(state).reshape(-1)[0])
        a = float(np.asarray(action).reshape(-1)[0])
        return SectionOutcome.next([-s], 1.0 - (a - self.target_gain * s) ** 2)

    def params(self):
        return {"target_gain": self.target_gain}


class AlwaysFail(Environment):
    """Every step fails; handy for exercising absorbing edge cases."""

    name = "always_fail"

    def __init__(self, state_dim: int = 1):
        self.state_dim = state_dim

    def nominal_init(self, rng=None, noise=0.0):
        return np.zeros(self.state_dim)

    def step_action(self, state, action, push):
        return SectionOutcome.failure()
