"""ARS-V2t training of linear policies, with an optional fractal-scaled objective."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import Environment
from .errors import InputError
from .fracdim import MESHDIM_D0, MESHDIM_FACTOR, trajectory_mesh_dim
from .mesh import NormalizationStats
from .policy import LinearPolicy, RunningStats

log = logging.getLogger(__name__)

OBJECTIVES = ("standard", "fractal")


@dataclass
class ArsConfig:
    step_size: float = 0.02
    exploration_std: float = 0.025
    directions: int = 50
    top_directions: int = 20
    episode_steps: int = 200
    epochs: int = 100
    seed: int = 0
    action_noise_std: float = 0.0
    obs_noise_std: float = 0.0
    init_noise: float = 0.005
    meshdim_d0: float = MESHDIM_D0
    meshdim_factor: float = MESHDIM_FACTOR

    def __post_init__(self):
        if not 1 <= self.top_directions <= self.directions:
            raise InputError(f"need 1 <= top_directions <= directions, got "
                             f"{self.top_directions} and {self.directions}")
        if not self.step_size >= 0 or not self.exploration_std > 0:
            raise InputError("step_size must be >= 0 and exploration_std > 0")
        if self.episode_steps < 1 or self.epochs < 0:
            raise InputError("episode_steps must be >= 1 and epochs >= 0")

    @classmethod
    def noisy(cls, **kw) -> "ArsConfig":
        """Config with the training-time action/observation noise levels."""
        return cls(**{"action_noise_std": 0.01, "obs_noise_std": 0.001, **kw})

    def to_dict(self):
        return asdict(self)


@dataclass
class EpisodeRecord:
    states: np.ndarray
    return_: float
    steps: int
    failed: bool = False


def evaluate_episode(env: Environment, policy: LinearPolicy, noise: tuple[float, float],
                     rng: np.random.Generator, episode_steps: int, init_noise: float = 0.005,
                     stats: NormalizationStats | None = None) -> EpisodeRecord:
    """Roll one episode from a perturbed nominal start.

    ``noise = (action_std, obs_std)``: Gaussian noise is added to the whitened
    observation before the policy and to the action after it. ``stats``
    overrides the policy's own whitening (ARS evaluates perturbed weights
    under the epoch's frozen stats).
    """
    if episode_steps < 1:
        raise InputError(f"episode_steps must be >= 1, got {episode_steps}")
    action_std, obs_std = noise
    stats = policy.obs_stats if stats is None else stats
    W = policy.weights
    state = env.nominal_init(rng, init_noise)
    states = [state]
    total = 0.0
    failed = False
    for _ in range(episode_steps):
        obs = stats.whiten(state)
        if obs_std > 0:
            obs = obs + rng.normal(0.0, obs_std, obs.shape)
        action = W @ obs
        if action_std > 0:
            action = action + rng.normal(0.0, action_std, action.shape)
        out = env.step_action(state, action, env.training_push)
        total += out.reward
        if out.failed:
            failed = True
            break
        state = out.state
        states.append(state)
    return EpisodeRecord(np.asarray(states), total, len(states) - 1, failed)


def fractal_return(record: EpisodeRecord, stats: NormalizationStats, d0: float = MESHDIM_D0,
                   factor: float = MESHDIM_FACTOR) -> float:
    """Episode return divided by the trajectory's clamped two-scale mesh dimension."""
    if len(record.states) < 2:
        return record.return_
    return record.return_ / trajectory_mesh_dim(record.states, stats, d0, factor)


@dataclass
class TrainingLog:
    rows: list[dict] = field(default_factory=list)

    def append(self, **row):
        self.rows.append(row)

    columns = ("epoch", "mean_return", "mean_fractal_return", "best_mesh_dim", "updated")


def select_top(rewards: np.ndarray, b: int) -> np.ndarray:
    """Indices of the ``b`` directions with the largest ``max(r+, r-)``, ascending.

    Ties go to the lower direction index.
    """
    return np.sort(np.argsort(-np.asarray(rewards).max(axis=1), kind="stable")[:b])


def ars_step(deltas: np.ndarray, rewards: np.ndarray, top: np.ndarray, step_size: float):
    """Weight increment from the retained directions, or ``None`` if their returns are all equal."""
    sigma_r = float(rewards[top].std())
    if sigma_r == 0.0:
        return None
    step = np.zeros_like(deltas[0])
    for k in top:
        step += (rewards[k, 0] - rewards[k, 1]) * deltas[k]
    return step_size / (len(top) * sigma_r) * step


def _episode_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(epoch), int(index)]))


def ars_train(env: Environment, config: ArsConfig, objective: str = "standard",
              init_policy: LinearPolicy | None = None) -> tuple[LinearPolicy, TrainingLog]:
    """Augmented Random Search, V2t variant.

    Each epoch draws ``directions`` Gaussian perturbations, evaluates the
    weights at plus and minus ``exploration_std`` times each, keeps the top
    ``top_directions`` by their better return and steps along the
    return-difference-weighted sum, scaled by the spread of the kept returns.
    Observation statistics absorb every state visited (V2).
    """
    if objective not in OBJECTIVES:
        raise InputError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    if init_policy is None:
        weights = np.zeros((env.action_dim, env.state_dim))
        running = RunningStats(env.state_dim)
        base_stats = NormalizationStats.identity(env.state_dim)
    else:
        weights = init_policy.weights.copy()
        running = RunningStats.from_moments(init_policy.obs_stats.mean, init_policy.obs_stats.std,
                                            init_policy.obs_count)
        base_stats = init_policy.obs_stats
    history = TrainingLog()
    if config.epochs == 0:
        if init_policy is not None:
            return init_policy, history
        return LinearPolicy(weights, base_stats), history

    master = np.random.Generator(np.random.Philox(key=int(config.seed)))
    noise = (config.action_noise_std, config.obs_noise_std)
    n_dir, n_top = config.directions, config.top_directions
    sigma, alpha = config.exploration_std, config.step_size
    for epoch in range(config.epochs):
        stats = running.snapshot() if running.count >= 2 else base_stats
        deltas = master.standard_normal((n_dir,) + weights.shape)
        raw = np.zeros((n_dir, 2))
        dims = np.ones((n_dir, 2))
        visited = []
        for k in range(n_dir):
            for j, sign in enumerate((1.0, -1.0)):
                pol = LinearPolicy(weights + sign * sigma * deltas[k], stats)
                rec = evaluate_episode(env, pol, noise, _episode_rng(config.seed, epoch, 2 * k + j),
                                       config.episode_steps, config.init_noise)
                visited.append(rec.states)
                raw[k, j] = rec.return_
                if len(rec.states) >= 2:
                    dims[k, j] = trajectory_mesh_dim(rec.states, stats, config.meshdim_d0,
                                                     config.meshdim_factor)
        rewards = raw / dims if objective == "fractal" else raw

        step = ars_step(deltas, rewards, select_top(rewards, n_top), alpha)
        updated = step is not None
        if updated:
            weights = weights + step
        else:
            log.info("epoch %d: retained returns are identical; update skipped", epoch)
        for states in visited:
            running.push_many(states)

        best = np.unravel_index(np.argmax(raw), raw.shape)
        history.append(epoch=epoch, mean_return=float(raw.mean()),
                       mean_fractal_return=float((raw / dims).mean()),
                       best_mesh_dim=float(dims[best]), updated=updated)

    prior = int(init_policy.meta.get("epoch", 0)) if init_policy is not None else 0
    meta = {"config": config.to_dict(), "epoch": prior + config.epochs,
            "objective": objective, "environment": env.name}
    final_stats = running.snapshot() if running.count >= 2 else base_stats
    return LinearPolicy(weights, final_stats, obs_count=running.count, meta=meta), history
