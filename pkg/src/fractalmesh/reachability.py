"""Breadth-first closure of the reachable set under a fixed disturbance set."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DisturbanceSet, Environment, Policy
from .errors import EmptySeedError, InputError, PartialMeshError
from .mesh import FAILURE_ID, Mesh, NormalizationStats

log = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 1_000_000


@dataclass
class MeshBuildReport:
    mesh: Mesh
    states_explored: int = 0
    failures_recorded: int = 0
    frontier_peak: int = 0
    wall_time: float = 0.0
    seed_ids: list[int] = field(default_factory=list)
    complete: bool = True

    def to_dict(self) -> dict:
        return {
            "states_explored": self.states_explored,
            "failures_recorded": self.failures_recorded,
            "frontier_peak": self.frontier_peak,
            "wall_time": self.wall_time,
            "seed_ids": list(self.seed_ids),
            "complete": self.complete,
        }


def seed_states(env: Environment, policy: Policy | None, n_init: int, settle_steps: int,
                rng: np.random.Generator, init_noise: float = 0.005) -> list[np.ndarray]:
    """Section states reached after letting perturbed initial conditions settle.

    Each of the ``n_init`` nominal initial conditions is perturbed by
    ``init_noise`` and stepped ``settle_steps`` times without disturbance.
    Conditions that fail while settling are logged and dropped.
    """
    if n_init < 1:
        raise InputError(f"n_init must be >= 1, got {n_init}")
    seeds = []
    for i in range(n_init):
        state = env.nominal_init(rng, init_noise)
        ok = True
        for _ in range(settle_steps):
            out = env.section_step(state, policy, env.training_push)
            if out.failed:
                ok = False
                break
            state = out.state
        if ok and not env.is_failure(state):
            seeds.append(state)
        else:
            log.warning("seed %d failed while settling; skipped", i)
    if not seeds:
        raise EmptySeedError(f"all {n_init} seed initial conditions failed while settling")
    return seeds


def _simulate(env: Environment, states: np.ndarray, actions: np.ndarray, pushes, threads: int):
    n = len(pushes)
    if threads <= 1 or n < 2:
        return env.step_many(states, actions, pushes)
    bounds = np.linspace(0, n, min(threads, n) + 1).astype(int)
    chunks = [(states[a:b], actions[a:b], pushes[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: env.step_many(*c), chunks))
    return [out for part in parts for out in part]


def create_mesh(env: Environment, policy: Policy | None, initial_states, disturbances: DisturbanceSet,
                box_size: float, stats: NormalizationStats, max_states: int = DEFAULT_MAX_STATES,
                threads: int = 1) -> MeshBuildReport:
    """Mesh the reachable set and record the per-disturbance transition map.

    States are expanded first-in first-out. Each frontier generation is
    simulated as one batch (optionally across ``threads``) and then merged
    in (state ID, disturbance index) order, which assigns exactly the IDs a
    one-at-a-time FIFO sweep would.
    """
    if max_states < 1:
        raise InputError(f"max_states must be >= 1, got {max_states}")
    disturbances = DisturbanceSet(disturbances)
    started = time.perf_counter()
    mesh = Mesh(box_size, stats)
    report = MeshBuildReport(mesh)

    frontier: list[int] = []
    for s in initial_states:
        s = np.asarray(s, dtype=np.float64)
        if env.is_failure(s):
            log.warning("initial state %s is a failure state; excluded", s)
            continue
        sid, is_new = mesh.insert_or_get(s)
        if sid not in report.seed_ids:
            report.seed_ids.append(sid)
        if is_new:
            frontier.append(sid)
    if not frontier:
        raise InputError("no non-failing initial states to mesh from")
    _check_cap(mesh, max_states, report, started)

    n_d = len(disturbances)
    while frontier:
        report.frontier_peak = max(report.frontier_peak, len(frontier))
        reps = [mesh.entry(i).representative for i in frontier]
        actions = [env.action_for(r, policy) for r in reps]
        states = np.repeat(np.asarray(reps), n_d, axis=0)
        acts = np.repeat(np.asarray(actions).reshape(len(reps), -1), n_d, axis=0)
        pushes = list(disturbances) * len(frontier)
        outcomes = _simulate(env, states, acts, pushes, threads)

        next_frontier = []
        for k, out in enumerate(outcomes):
            entry = mesh.entry(frontier[k // n_d])
            if out.failed or env.is_failure(out.state):
                entry.transitions.append(FAILURE_ID)
                report.failures_recorded += 1
                continue
            nid, is_new = mesh.insert_or_get(out.state)
            entry.transitions.append(nid)
            if is_new:
                next_frontier.append(nid)
                _check_cap(mesh, max_states, report, started)
        frontier = next_frontier

    report.states_explored = len(mesh)
    report.wall_time = time.perf_counter() - started
    return report


def _check_cap(mesh, max_states, report, started):
    if len(mesh) > max_states:
        report.states_explored = len(mesh)
        report.wall_time = time.perf_counter() - started
        report.complete = False
        raise PartialMeshError(f"mesh exceeded {max_states} states", report)

