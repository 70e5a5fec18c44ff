"""Monte Carlo steps-to-failure under freshly sampled pushes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DisturbanceSampler, Environment, Policy
from .errors import InputError

PUSH_BLOCK = 64


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Philox stream keyed by ``seed`` whose counter starts at block ``index``.

    Streams for different trials are disjoint and do not depend on the order
    in which trials run.
    """
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


def rollout_to_failure(env: Environment, policy: Policy | None, sampler: DisturbanceSampler, start,
                       max_steps: int, rng: np.random.Generator) -> tuple[int, bool]:
    """Step until failure, sampling a new push every step.

    Returns ``(steps, censored)``; a censored rollout survived ``max_steps``.
    Pushes are drawn in blocks of 64 from ``rng``.
    """
    if max_steps < 1:
        raise InputError(f"max_steps must be >= 1, got {max_steps}")
    state = np.asarray(start, dtype=np.float64)
    if env.is_failure(state):
        raise InputError("rollout start state is already failing")
    pushes = []
    for step in range(1, max_steps + 1):
        if not pushes:
            pushes = sampler.sample_block(rng, PUSH_BLOCK)[::-1]
        out = env.section_step(state, policy, pushes.pop())
        if out.failed or env.is_failure(out.state):
            return step, False
        state = out.state
    return max_steps, True


@dataclass
class RolloutStats:
    trials: int
    mean_steps: float
    std_steps: float
    censored: int
    steps: list[int] = field(default_factory=list, repr=False)
    censored_flags: list[bool] = field(default_factory=list, repr=False)

    @property
    def valid(self) -> bool:
        return self.censored < self.trials

    @property
    def standard_error(self) -> float:
        n = self.trials - self.censored
        return self.std_steps / math.sqrt(n) if n > 0 else math.nan

    def to_dict(self) -> dict:
        return {"trials": self.trials, "mean_steps": self.mean_steps,
                "std_steps": self.std_steps, "censored": self.censored, "valid": self.valid}


def mc_mfpt(env: Environment, policy: Policy | None, sampler: DisturbanceSampler, starts, trials: int,
            max_steps: int, seed: int) -> RolloutStats:
    """Mean and sample std of uncensored steps-to-failure over ``trials`` rollouts.

    Trial ``i`` starts from ``starts[i % len(starts)]`` and draws from
    :func:`trial_rng` ``(seed, i)``.
    """
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    starts = [np.asarray(s, dtype=np.float64) for s in starts]
    if not starts:
        raise InputError("need at least one start state")
    steps, flags = [], []
    for i in range(trials):
        n, cens = rollout_to_failure(env, policy, sampler, starts[i % len(starts)], max_steps,
                                     trial_rng(seed, i))
        steps.append(n)
        flags.append(cens)
    done = np.array([n for n, c in zip(steps, flags) if not c], dtype=np.float64)
    if done.size == 0:
        mean, std = math.nan, math.nan
    else:
        mean = float(done.mean())
        std = float(done.std(ddof=1)) if done.size > 1 else 0.0
    return RolloutStats(trials, mean, std, int(sum(flags)), steps, flags)
