"""Linear policies acting on whitened observations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .mesh import STD_FLOOR, NormalizationStats


class RunningStats:
    """Streaming mean/variance (Chan et al. merge), used for ARS-V2 whitening."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    @property
    def dim(self):
        return self.mean.size

    def push_many(self, states) -> None:
        x = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if x.shape[0] == 0:
            return
        n_b = x.shape[0]
        mean_b = x.mean(axis=0)
        m2_b = ((x - mean_b) ** 2).sum(axis=0)
        n = self.count + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / n)
        self._m2 = self._m2 + m2_b + delta**2 * (self.count * n_b / n)
        self.count = n

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.maximum(np.sqrt(self._m2 / self.count), STD_FLOOR)

    def snapshot(self) -> NormalizationStats:
        return NormalizationStats(self.mean.copy(), self.std)

    def copy(self) -> "RunningStats":
        other = RunningStats(self.dim)
        other.count = self.count
        other.mean = self.mean.copy()
        other._m2 = self._m2.copy()
        return other

    @classmethod
    def from_moments(cls, mean, std, count) -> "RunningStats":
        rs = cls(len(mean))
        rs.count = int(count)
        rs.mean = np.array(mean, dtype=np.float64)
        rs._m2 = np.array(std, dtype=np.float64) ** 2 * rs.count
        return rs


@dataclass
class LinearPolicy:
    """``action = weights @ ((state - obs_mean) / obs_std)``.

    Calling the policy never adds noise; training noise is injected by the
    episode runner.
    """

    weights: np.ndarray
    obs_stats: NormalizationStats
    obs_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        if not np.all(np.isfinite(self.weights)):
            raise InputError("policy weights must be finite")
        if self.weights.shape[1] != self.obs_stats.dim:
            raise InputError(
                f"weights expect {self.weights.shape[1]} observations, stats have {self.obs_stats.dim}")

    @property
    def obs_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def action_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, action_dim: int, obs_dim: int) -> "LinearPolicy":
        return cls(np.zeros((action_dim, obs_dim)), NormalizationStats.identity(obs_dim))

    def whiten(self, state) -> np.ndarray:
        return self.obs_stats.whiten(state)

    def __call__(self, state) -> np.ndarray:
        return self.weights @ self.whiten(state)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "obs_mean": [float(v) for v in self.obs_stats.mean],
            "obs_std": [float(v) for v in self.obs_stats.std],
            "obs_count": int(self.obs_count),
            **self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearPolicy":
        meta = {k: v for k, v in doc.items()
                if k not in ("weights", "obs_mean", "obs_std", "obs_count")}
        return cls(np.array(doc["weights"], dtype=np.float64),
                   NormalizationStats(doc["obs_mean"], doc["obs_std"]),
                   obs_count=int(doc.get("obs_count", 0)), meta=meta)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "LinearPolicy":
        return cls.from_dict(json.loads(Path(path).read_text()))
