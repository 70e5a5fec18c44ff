"""Absorbing Markov chain built from a mesh, and its first-passage statistics.

Index 0 of every matrix is the absorbing failure state; mesh state ``i``
lives at index ``i + 1``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import (ConvergenceError, DomainError, InputError, MeshValidationError,
                     RecurrentClassError, UnsupportedSpectrumError)
from .mesh import FAILURE_ID, Mesh

ROW_SUM_TOL = 1e-12


@dataclass
class TransitionMatrix:
    """Row-stochastic CSR matrix with the failure state at index 0."""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        m = sparse.csr_matrix(self.matrix, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        self.matrix = m
        self.check()

    def check(self) -> None:
        m = self.matrix
        if m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InputError(f"transition matrix must be square and non-empty, got {m.shape}")
        if m.nnz and (m.data.min() < 0.0 or m.data.max() > 1.0):
            raise InputError("transition probabilities must lie in [0, 1]")
        sums = np.asarray(m.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise InputError(f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
        row0 = m.getrow(0)
        if row0.nnz != 1 or row0.indices[0] != 0 or row0.data[0] != 1.0:
            raise InputError("row 0 must be the absorbing failure row e0")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_transient(self) -> int:
        return self.size - 1

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def transient_block(self) -> sparse.csr_matrix:
        return self.matrix[1:, 1:].tocsr()

    def failure_column(self) -> np.ndarray:
        return self.matrix[1:, 0].toarray().ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    @classmethod
    def from_dense(cls, dense) -> "TransitionMatrix":
        return cls(sparse.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @classmethod
    def from_transient(cls, Q) -> "TransitionMatrix":
        """Wrap a substochastic block; the missing row mass goes to failure."""
        Q = sparse.csr_matrix(Q, dtype=np.float64)
        exit_p = 1.0 - np.asarray(Q.sum(axis=1)).ravel()
        exit_p[np.abs(exit_p) < ROW_SUM_TOL] = 0.0
        m = Q.shape[0]
        top = sparse.csr_matrix(([1.0], ([0], [0])), shape=(1, m + 1))
        body = sparse.hstack([sparse.csr_matrix(exit_p[:, None]), Q])
        return cls(sparse.vstack([top, body]).tocsr())

    # -- coordinate-list text format --------------------------------------

    def dumps(self) -> str:
        coo = self.matrix.tocoo()
        lines = [f"{self.size} {self.size} {coo.nnz}"]
        lines += [f"{r} {c} {v!r}" for r, c, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "TransitionMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n_rows, n_cols, nnz = (int(v) for v in lines[0].split())
        body = lines[1:]
        if len(body) != nnz:
            raise InputError(f"header announces {nnz} entries, found {len(body)}")
        rows, cols, vals = [], [], []
        for ln in body:
            r, c, v = ln.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
        return cls(sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)))

    @classmethod
    def load(cls, path) -> "TransitionMatrix":
        return cls.loads(Path(path).read_text())


def build_transition_matrix(mesh: Mesh) -> TransitionMatrix:
    """Uniformly weighted transition counts of a completed mesh."""
    n = len(mesh)
    if n == 0:
        raise MeshValidationError("cannot build a transition matrix from an empty mesh")
    arity = len(mesh.entry(0).transitions)
    if arity == 0:
        raise MeshValidationError("entry 0 has no transitions; mesh is incomplete", entry_id=0)
    mesh.validate(arity)
    rows, cols, vals = [0], [0], [1.0]
    for e in mesh:
        for target, count in sorted(Counter(e.transitions).items()):
            rows.append(e.id + 1)
            cols.append(0 if target == FAILURE_ID else target + 1)
            vals.append(count / arity)
    m = sparse.csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))
    return TransitionMatrix(m)


@dataclass
class SpectralResult:
    lambda2: float
    iterations: int
    residual: float


def lambda2(T: TransitionMatrix, tol: float = 1e-10, max_iters: int = 100_000) -> SpectralResult:
    """Dominant eigenvalue of the transient block by power iteration.

    Q is nonnegative, so its spectral radius is itself an eigenvalue with a
    nonnegative eigenvector and a positive start vector converges to it
    unless another eigenvalue shares that modulus.
    """
    Q = T.transient_block()
    m = Q.shape[0]
    if m == 0:
        raise InputError("transition matrix has no transient states")
    v = np.full(m, 1.0 / m)
    lam = 0.0
    residual = np.inf
    history = []
    for it in range(1, max_iters + 1):
        w = Q @ v
        total = w.sum()
        if total == 0.0:
            return SpectralResult(0.0, it, 0.0)
        lam = total
        residual = float(np.linalg.norm(w - lam * v) / np.linalg.norm(v))
        v = w / total
        if residual < tol:
            return SpectralResult(float(lam), it, residual)
        history.append(residual)
        if it % 1000 == 0 and _oscillating(Q, v, history, tol):
            raise UnsupportedSpectrumError(
                f"several eigenvalues share the dominant modulus (residual stuck at {residual:.3g})",
                residual, it)
    if _oscillating(Q, v, history, tol):
        raise UnsupportedSpectrumError(
            f"several eigenvalues share the dominant modulus (residual stuck at {residual:.3g})",
            residual, max_iters)
    raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations "
                           f"(residual {residual:.3g})", residual, max_iters)


def _oscillating(Q, v, history, tol) -> bool:
    # stagnant one-step residual while the two-step map has converged
    if len(history) < 200:
        return False
    recent = history[-100:]
    if min(recent) < 0.5 * max(history[-200:-100]):
        return False
    w2 = Q @ (Q @ v)
    lam_sq = w2.sum() / v.sum()
    if lam_sq == 0.0:
        return False
    res2 = float(np.linalg.norm(w2 - lam_sq * v) / np.linalg.norm(v))
    return res2 < max(100 * tol, 1e-3 * min(recent))


def mfpt_eigen(lambda2_value: float) -> float:
    """Eigenvalue estimate ``1 / (1 - lambda2)`` of the mean steps to failure."""
    if not lambda2_value < 1.0:
        raise DomainError(f"lambda2 = {lambda2_value} >= 1: no transient decay")
    return 1.0 / (1.0 - lambda2_value)


def states_without_exit(T: TransitionMatrix) -> np.ndarray:
    """Transient mesh IDs from which failure is unreachable."""
    Q = T.transient_block()
    reach = T.failure_column() > 0.0
    while True:
        grown = reach | (Q @ reach.astype(np.float64) > 0.0)
        if (grown == reach).all():
            break
        reach = grown
    return np.flatnonzero(~reach)


def absorption_times(T: TransitionMatrix) -> np.ndarray:
    """Expected steps to failure from each transient state, solving ``(I - Q) t = 1``."""
    stuck = states_without_exit(T)
    if stuck.size:
        raise RecurrentClassError(
            f"{stuck.size} states can never reach failure (first: {stuck[:10].tolist()})", stuck)
    Q = T.transient_block()
    m = Q.shape[0]
    A = (sparse.identity(m, format="csc") - Q.tocsc()).tocsc()
    t = np.atleast_1d(spsolve(A, np.ones(m)))
    resid = np.linalg.norm(A @ t - 1.0, ord=np.inf)
    if not np.all(np.isfinite(t)) or resid > 1e-10 * max(1.0, np.abs(t).max()):
        raise RecurrentClassError(f"(I - Q) is numerically singular (residual {resid:.3g})", [])
    return t


def mfpt_exact(T: TransitionMatrix, start=None) -> float:
    """Expected steps to failure from a start distribution over transient states.

    ``start`` may be a length-m probability vector, a list of mesh IDs
    (uniform over them) or ``None`` (uniform over every transient state).
    """
    t = absorption_times(T)
    return float(start_distribution(T.n_transient, start) @ t)


def start_distribution(m: int, start=None) -> np.ndarray:
    if start is None:
        return np.full(m, 1.0 / m)
    arr = np.asarray(start)
    if arr.dtype.kind in "iu":
        if arr.size == 0 or arr.min() < 0 or arr.max() >= m:
            raise InputError(f"start ids must lie in [0, {m})")
        p = np.zeros(m)
        np.add.at(p, arr, 1.0)
        return p / p.sum()
    p = arr.astype(np.float64).ravel()
    if p.size != m or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InputError("start must be a probability vector over the transient states")
    return p


def transition_mass_cdf(T: TransitionMatrix) -> list[tuple[float, float]]:
    """Cumulative share of transition mass held by the busiest states.

    Columns of the transient block are summed, sorted in descending order
    and accumulated; point ``k`` pairs the fraction ``k/m`` of states with
    the fraction of mass they receive.
    """
    m = T.n_transient
    col = np.asarray(T.matrix[:, 1:].sum(axis=0)).ravel()
    frac = np.arange(1, m + 1) / m
    total = col.sum()
    if total == 0.0:
        return [(float(f), float(f)) for f in frac]
    cum = np.minimum(np.cumsum(np.sort(col)[::-1]) / total, 1.0)
    cum[-1] = 1.0
    return [(float(f), float(c)) for f, c in zip(frac, cum)]


def sparsity_pattern(T: TransitionMatrix) -> list[tuple[int, int]]:
    coo = T.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return [(int(coo.row[i]), int(coo.col[i])) for i in order]
