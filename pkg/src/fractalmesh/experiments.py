"""Standard-versus-fractal training study on the SLIP hopper.

Trains a group of standard agents, fine-tunes each with the fractal
objective, and meshes every agent's reachable set under the same pushes.
"""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DisturbanceSet, disturbance_grid
from .errors import PartialMeshError
from .reachability import create_mesh, seed_states
from .slip import SlipHopper
from .training import ArsConfig, ars_train

log = logging.getLogger(__name__)


@dataclass
class TrendStudyConfig:
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    standard: ArsConfig = field(default_factory=lambda: ArsConfig.noisy(
        directions=8, top_directions=4, epochs=500, episode_steps=200))
    fractal: ArsConfig = field(default_factory=lambda: ArsConfig.noisy(
        directions=8, top_directions=4, epochs=100, episode_steps=200, meshdim_d0=1.0))
    box_size: float = 0.1
    push_count: int = 9
    push_range: tuple[float, float] = (-15.0, 15.0)
    n_init: int = 10
    settle_steps: int = 20
    max_states: int = 150_000
    mesh_seed: int = 0


@dataclass
class AgentResult:
    """One trained agent's mesh size; ``capped`` sizes are lower bounds (cap + 1)."""

    seed: int
    group: str
    mesh_size: int
    capped: bool
    final_return: float
    train_time: float
    mesh_time: float


@dataclass
class TrendStudyResult:
    agents: list[AgentResult]

    def sizes(self, group: str) -> list[int]:
        return [a.mesh_size for a in self.agents if a.group == group]

    def median(self, group: str) -> float:
        return float(statistics.median(self.sizes(group)))

    @property
    def fractal_smaller(self) -> bool:
        # capped sizes are cap + 1, a lower bound, so a capped fractal median never wins
        return self.median("fractal") < self.median("standard")

    def table(self) -> list[dict]:
        return [a.__dict__.copy() for a in self.agents]


def mesh_size(env, policy, disturbances: DisturbanceSet, cfg: TrendStudyConfig) -> tuple[int, bool]:
    seeds = seed_states(env, policy, cfg.n_init, cfg.settle_steps, np.random.default_rng(cfg.mesh_seed))
    try:
        report = create_mesh(env, policy, seeds, disturbances, cfg.box_size, policy.obs_stats,
                             max_states=cfg.max_states)
    except PartialMeshError as exc:
        return exc.report.states_explored, True
    return len(report.mesh), False


def fractal_trend_study(cfg: TrendStudyConfig | None = None, env: SlipHopper | None = None) -> TrendStudyResult:
    cfg = cfg or TrendStudyConfig()
    env = env or SlipHopper()
    pushes = disturbance_grid(cfg.push_count, *cfg.push_range)
    agents = []
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        std_policy, std_log = ars_train(env, replace(cfg.standard, seed=seed), "standard")
        t1 = time.perf_counter()
        frac_policy, frac_log = ars_train(env, replace(cfg.fractal, seed=seed + 10_000), "fractal",
                                          init_policy=std_policy)
        t2 = time.perf_counter()
        for group, policy, logbook, train_time in (("standard", std_policy, std_log, t1 - t0),
                                                    ("fractal", frac_policy, frac_log, t2 - t1)):
            m0 = time.perf_counter()
            size, capped = mesh_size(env, policy, pushes, cfg)
            agents.append(AgentResult(seed, group, size, capped, logbook.rows[-1]["mean_return"],
                                      train_time, time.perf_counter() - m0))
            log.info("seed %d %s: mesh %d%s", seed, group, size, " (capped)" if capped else "")
    return TrendStudyResult(agents)
