"""JSON run configuration for the command-line front end.

A run config is one JSON object::

    {
      "seed": 0,
      "out": "runs/demo",
      "environment": {"kind": "slip", "params": {"h_fail": 1.0}},
      "policy": {"fixture": {}},
      "disturbances": {"grid": {"count": 9, "f_min": -15, "f_max": 15}},
      "mesh": {"box_size": 0.1, "max_states": 1000000, "n_init": 10, "settle_steps": 20},
      "analysis": {"ladder": {"d0": 0.25, "factor": 2, "levels": 6}, "mc_trials": 1000}
    }

The policy block names exactly one source: ``checkpoint`` (a path),
``train`` (ARS settings), ``fixture`` (the environment's reference
controller) or ``zero`` (all-zero weights). The disturbance block names
``grid`` and/or ``sampler``; meshing commands use the grid and rollouts use
the sampler.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dynamics import DisturbanceSampler, Environment, QuadraticSurrogate, Walk1D, disturbance_grid
from .errors import InputError
from .fracdim import BoxLadder
from .slip import SlipHopper, SlipParams
from .training import ArsConfig

POLICY_SOURCES = ("checkpoint", "train", "fixture", "zero")
ENVIRONMENTS = ("slip", "walk1d", "quadratic")


def _known(block: dict, allowed, where: str) -> dict:
    extra = set(block) - set(allowed)
    if extra:
        raise InputError(f"unknown keys in {where}: {sorted(extra)}")
    return block


@dataclass
class MeshSettings:
    box_size: float = 0.1
    box_sizes: list[float] = field(default_factory=lambda: [0.4, 0.3, 0.2, 0.1])
    max_states: int = 1_000_000
    n_init: int = 10
    settle_steps: int = 20
    init_noise: float = 0.005
    stats: str = "auto"
    path: str | None = None
    seeds: list[int] | None = None


@dataclass
class AnalysisSettings:
    ladder: dict = field(default_factory=lambda: {"d0": 0.25, "factor": 2.0, "levels": 6})
    mc_trials: int = 1000
    max_steps: int = 100_000
    start: object = "uniform"
    pointset: dict | None = None
    pca_k: int = 3
    lambda_tol: float = 1e-10
    max_iters: int = 100_000

    def box_ladder(self) -> BoxLadder:
        return BoxLadder(**_known(self.ladder, ("d0", "factor", "levels"), "analysis.ladder"))


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "out"
    environment: dict = field(default_factory=lambda: {"kind": "slip"})
    policy: dict = field(default_factory=lambda: {"fixture": {}})
    disturbances: dict = field(default_factory=lambda: {"grid": {"count": 9, "f_min": -15.0, "f_max": 15.0}})
    mesh: MeshSettings = field(default_factory=MeshSettings)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    trend: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.mesh, dict):
            self.mesh = MeshSettings(**_known(self.mesh, [f.name for f in fields(MeshSettings)], "mesh"))
        if isinstance(self.analysis, dict):
            self.analysis = AnalysisSettings(
                **_known(self.analysis, [f.name for f in fields(AnalysisSettings)], "analysis"))
        sources = [k for k in self.policy if k in POLICY_SOURCES]
        if len(sources) != 1 or len(self.policy) != 1:
            raise InputError(f"policy block must name exactly one of {POLICY_SOURCES}, got {sorted(self.policy)}")
        modes = set(self.disturbances) - {"grid", "sampler"}
        if modes or not self.disturbances:
            raise InputError("disturbance block takes 'grid' and/or 'sampler'")
        if self.environment.get("kind") not in ENVIRONMENTS:
            raise InputError(f"environment kind must be one of {ENVIRONMENTS}")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        return cls(**_known(doc, [f.name for f in fields(cls)], "config"))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    @property
    def policy_source(self) -> str:
        return next(iter(self.policy))

    def build_environment(self) -> Environment:
        kind = self.environment["kind"]
        params = dict(self.environment.get("params", {}))
        if kind == "slip":
            return SlipHopper(SlipParams(**params))
        if kind == "walk1d":
            return Walk1D(**params)
        return QuadraticSurrogate(**params)

    def grid(self):
        if "grid" not in self.disturbances:
            raise InputError("this command needs a disturbances.grid block")
        g = _known(self.disturbances["grid"], ("count", "f_min", "f_max", "duration"), "disturbances.grid")
        return disturbance_grid(**g)

    def sampler(self) -> DisturbanceSampler:
        if "sampler" not in self.disturbances:
            raise InputError("this command needs a disturbances.sampler block")
        s = _known(self.disturbances["sampler"], ("magnitude_range", "angle_range", "duration"),
                   "disturbances.sampler")
        return DisturbanceSampler(**{k: tuple(v) if isinstance(v, list) else v for k, v in s.items()})

    def ars_config(self, seed: int | None = None) -> tuple[ArsConfig, str, str | None]:
        """ARS settings, objective and optional warm-start checkpoint of a train block."""
        block = dict(self.policy.get("train", {}))
        objective = block.pop("objective", "standard")
        init = block.pop("init_checkpoint", None)
        noisy = block.pop("noisy", False)
        block.setdefault("seed", self.seed if seed is None else seed)
        cfg = ArsConfig.noisy(**block) if noisy else ArsConfig(**block)
        return cfg, objective, init
