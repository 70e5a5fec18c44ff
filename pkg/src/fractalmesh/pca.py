"""Principal-component view of a mesh, with one-step failure flags."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .mesh import FAILURE_ID, Mesh


@dataclass
class PcaProjection:
    """Top-k principal axes of the mesh representatives.

    Attributes
    ----------
    components : (k, n) array
        Unit principal axes, one per row, ordered by variance.
    explained_variance : (k,) array
        Share of total variance along each axis.
    projected : (m, k) array
        Centered representatives expressed in the principal axes.
    failure_flag : (m,) bool array
        True where the state's transition list contains the failure ID.
    mean : (n,) array
    """

    components: np.ndarray
    explained_variance: np.ndarray
    projected: np.ndarray
    failure_flag: np.ndarray
    mean: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca(points, k: int):
    """Return ``(mean, components, explained_variance, projected)`` for a point cloud.

    Axes come from the symmetric eigendecomposition of the sample covariance.
    Each axis is flipped so its largest-magnitude entry is positive (the
    first such entry on exact ties).
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError(f"points must be a non-empty (m, n) array, got shape {X.shape}")
    m, n = X.shape
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}], got {k}")
    if m < k:
        raise InputError(f"need at least k = {k} points, got {m}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(m - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    axes = evecs[:, order[:k]].T
    pivots = np.argmax(np.abs(axes), axis=1)
    signs = np.sign(axes[np.arange(k), pivots])
    axes = axes * np.where(signs == 0, 1.0, signs)[:, None]
    total = evals.sum()
    explained = evals[:k] / total if total > 0 else np.zeros(k)
    return mean, axes, explained, Xc @ axes.T


def pca_project(mesh: Mesh, k: int = 3) -> PcaProjection:
    """Project mesh representatives onto their top-k principal axes."""
    if len(mesh) == 0:
        raise InputError("mesh is empty")
    if k > mesh.stats.dim:
        raise InputError(f"k = {k} exceeds the state dimension {mesh.stats.dim}")
    mean, axes, explained, projected = pca(mesh.representatives(), k)
    flags = np.array([FAILURE_ID in e.transitions for e in mesh], dtype=bool)
    return PcaProjection(axes, explained, projected, flags, mean)
