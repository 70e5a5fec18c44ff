"""Box-counting dimension over finite ladders of box sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .mesh import NormalizationStats, count_distinct_rows, lattice_keys

MESHDIM_D0 = 1e-2
MESHDIM_FACTOR = 1.5


@dataclass(frozen=True)
class BoxLadder:
    """Box sizes ``d0 * factor**-j`` for ``j = 0 .. levels-1``."""

    d0: float
    factor: float
    levels: int = 6

    def __post_init__(self):
        if not self.d0 > 0:
            raise InputError(f"d0 must be positive, got {self.d0}")
        if not self.factor > 1:
            raise InputError(f"factor must exceed 1, got {self.factor}")
        if self.levels < 2:
            raise InputError(f"a ladder needs at least 2 levels, got {self.levels}")

    def sizes(self) -> list[float]:
        return [self.d0 * self.factor ** (-j) for j in range(self.levels)]


@dataclass
class DimensionFit:
    dimension: float
    counts: list[tuple[float, int]] = field(default_factory=list)
    r_squared: float = 1.0
    intercept: float = 0.0

    def to_dict(self):
        return {"dimension": self.dimension, "r_squared": self.r_squared}


def count_boxes(points, stats: NormalizationStats, box_size: float) -> int:
    """Number of distinct whitened boxes occupied by ``points``."""
    return count_distinct_rows(lattice_keys(points, stats, box_size))


def box_counts(points, ladder: BoxLadder, stats: NormalizationStats) -> list[tuple[float, int]]:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] == 0:
        raise InputError("box counting needs at least one point")
    return [(d, count_boxes(pts, stats, d)) for d in ladder.sizes()]


def box_dimension(counts) -> DimensionFit:
    """Least-squares slope of log N against log(1/d)."""
    counts = [(float(d), int(n)) for d, n in counts]
    if any(n < 1 for _, n in counts):
        raise InputError("box counts must be positive")
    if any(d <= 0 for d, _ in counts):
        raise InputError("box sizes must be positive")
    x = np.log([1.0 / d for d, _ in counts])
    y = np.log([float(n) for _, n in counts])
    if np.unique(x).size < 2:
        raise InputError("need at least two distinct box sizes")
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    ss_tot = float(yc @ yc)
    resid = yc - slope * xc
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return DimensionFit(max(slope, 0.0), counts, r2, float(y.mean() - slope * x.mean()))


def trajectory_mesh_dim(trajectory, stats: NormalizationStats, d0: float = MESHDIM_D0,
                        factor: float = MESHDIM_FACTOR) -> float:
    """Two-scale mesh dimension of a trajectory, clamped below at 1.

    ``log(N(d0/f) / N(d0)) / log f`` with both counts taken under the
    trajectory's whitening stats.
    """
    pts = np.atleast_2d(np.asarray(trajectory, dtype=np.float64))
    if pts.shape[0] < 2:
        raise InputError("trajectory mesh dimension needs at least two states")
    coarse = count_boxes(pts, stats, d0)
    fine = count_boxes(pts, stats, d0 / factor)
    return max(1.0, math.log(fine / coarse) / math.log(factor))
