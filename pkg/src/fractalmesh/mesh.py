"""Whitened box keying and the hash-table mesh.

States are whitened with per-coordinate statistics, divided by the box size
and rounded half away from zero. The resulting integer lattice vector is the
hash key; IDs are handed out in insertion order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, MeshLookupError, MeshValidationError

FAILURE_ID = -1

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class NormalizationStats:
    """Per-coordinate mean and standard deviation used for whitening."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        std = np.array(self.std, dtype=np.float64).reshape(-1)
        if mean.shape != std.shape:
            raise InputError(f"mean has length {mean.size} but std has length {std.size}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise InputError("normalization stats must be finite")
        if np.any(std <= 0.0):
            raise InputError("every std entry must be strictly positive")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def identity(cls, n: int) -> "NormalizationStats":
        return cls(np.zeros(n), np.ones(n))

    @classmethod
    def from_points(cls, points, floor: float = STD_FLOOR) -> "NormalizationStats":
        """Stats of a point cloud; degenerate coordinates get ``floor`` as std."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[0] == 0:
            raise InputError("cannot compute stats of an empty point set")
        return cls(pts.mean(axis=0), np.maximum(pts.std(axis=0), floor))

    def whiten(self, states) -> np.ndarray:
        return (np.asarray(states, dtype=np.float64) - self.mean) / self.std


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def lattice_keys(points, stats: NormalizationStats, box_size: float) -> np.ndarray:
    """Integer lattice coordinates for each row of ``points``.

    Shape ``(P, n)`` in, ``(P, n)`` int64 out. This is the only place the
    quantization arithmetic lives, so scalar and batch keys agree bitwise.
    """
    if not box_size > 0:
        raise InputError(f"box_size must be positive, got {box_size}")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != stats.dim:
        raise InputError(f"state has dimension {pts.shape[1]}, stats have {stats.dim}")
    scaled = ((pts - stats.mean) / stats.std) / box_size
    return round_half_away(scaled).astype(np.int64)


def compute_key(state, stats: NormalizationStats, box_size: float) -> tuple[int, ...]:
    """Hashable integer key of a single state."""
    state = np.asarray(state, dtype=np.float64).reshape(-1)
    return tuple(int(v) for v in lattice_keys(state[None, :], stats, box_size)[0])


def count_distinct_rows(keys: np.ndarray) -> int:
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    if keys.shape[0] == 0:
        return 0
    rows = keys.view(np.dtype((np.void, keys.dtype.itemsize * keys.shape[1])))
    return int(np.unique(rows).size)


@dataclass
class MeshEntry:
    id: int
    representative: np.ndarray
    transitions: list[int] = field(default_factory=list)


class Mesh:
    """Hash table from lattice keys to mesh entries.

    Parameters
    ----------
    box_size : float
        Side length of each box in whitened units.
    stats : NormalizationStats
        Whitening statistics, normally those of the policy's training states.
    """

    failure_id = FAILURE_ID

    def __init__(self, box_size: float, stats: NormalizationStats):
        if not box_size > 0:
            raise InputError(f"box_size must be positive, got {box_size}")
        self.box_size = float(box_size)
        self.stats = stats
        self.table: dict[tuple[int, ...], MeshEntry] = {}
        self._by_id: list[MeshEntry] = []
        self._keys: list[tuple[int, ...]] = []

    def __len__(self):
        return len(self._by_id)

    def __iter__(self):
        return iter(self._by_id)

    def key(self, state) -> tuple[int, ...]:
        return compute_key(state, self.stats, self.box_size)

    def lookup(self, state) -> int | None:
        entry = self.table.get(self.key(state))
        return None if entry is None else entry.id

    def insert_or_get(self, state) -> tuple[int, bool]:
        state = np.array(state, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(state)):
            raise InputError(f"non-finite state {state!r}")
        key = self.key(state)
        entry = self.table.get(key)
        if entry is not None:
            return entry.id, False
        entry = MeshEntry(len(self._by_id), state)
        self.table[key] = entry
        self._by_id.append(entry)
        self._keys.append(key)
        return entry.id, True

    def entry(self, state_id: int) -> MeshEntry:
        if state_id == FAILURE_ID:
            raise MeshLookupError("the failure state has no coordinates")
        if not 0 <= state_id < len(self._by_id):
            raise MeshLookupError(f"unknown mesh id {state_id}")
        return self._by_id[state_id]

    def representative_state(self, state_id: int) -> np.ndarray:
        return self.entry(state_id).representative.copy()

    def lattice(self, state_id: int) -> tuple[int, ...]:
        self.entry(state_id)
        return self._keys[state_id]

    def representatives(self) -> np.ndarray:
        if not self._by_id:
            return np.empty((0, self.stats.dim))
        return np.array([e.representative for e in self._by_id])

    def validate(self, arity: int | None = None) -> None:
        """Raise ``MeshValidationError`` on the first closure or arity violation."""
        if arity is None and self._by_id:
            arity = len(self._by_id[0].transitions)
        n = len(self._by_id)
        for e in self._by_id:
            if len(e.transitions) != arity:
                raise MeshValidationError(
                    f"entry {e.id} has {len(e.transitions)} transitions, expected {arity}",
                    entry_id=e.id)
            for t in e.transitions:
                if t != FAILURE_ID and not 0 <= t < n:
                    raise MeshValidationError(
                        f"entry {e.id} transitions to unknown id {t}", entry_id=e.id)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "box_size": self.box_size,
            "mean": [float(v) for v in self.stats.mean],
            "std": [float(v) for v in self.stats.std],
            "entries": [
                {
                    "id": e.id,
                    "lattice": list(self._keys[e.id]),
                    "representative": [float(v) for v in e.representative],
                    "transitions": [int(t) for t in e.transitions],
                }
                for e in self._by_id
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Mesh":
        mesh = cls(doc["box_size"], NormalizationStats(doc["mean"], doc["std"]))
        for i, item in enumerate(sorted(doc["entries"], key=lambda d: d["id"])):
            if item["id"] != i:
                raise MeshValidationError(f"mesh ids are not consecutive at {item['id']}",
                                          entry_id=item["id"])
            sid, is_new = mesh.insert_or_get(item["representative"])
            if not is_new:
                raise MeshValidationError(f"entry {i} duplicates the box of entry {sid}",
                                          entry_id=i)
            if list(mesh._keys[sid]) != list(item["lattice"]):
                raise MeshValidationError(f"entry {i} lattice does not match its representative",
                                          entry_id=i)
            mesh._by_id[sid].transitions = [int(t) for t in item["transitions"]]
        return mesh

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "Mesh":
        return cls.from_dict(json.loads(Path(path).read_text()))
