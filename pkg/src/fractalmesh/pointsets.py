"""Planar point sets with known box-counting dimension."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError

MAX_POINTS = 5_000_000

_ROT60 = np.array([[0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, 0.5]])


def koch_vertices(level: int) -> np.ndarray:
    """The ``4**level + 1`` vertices of the level-th Koch iterate on [(0,0), (1,0)]."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for _ in range(level):
        a, b = pts[:-1], pts[1:]
        third = (b - a) / 3.0
        p1 = a + third
        p3 = a + 2.0 * third
        p2 = p1 + third @ _ROT60.T
        new = np.empty((4 * len(a) + 1, 2))
        new[0:-1:4] = a
        new[1::4] = p1
        new[2::4] = p2
        new[3::4] = p3
        new[-1] = pts[-1]
        pts = new
    return pts


def fractal_pointset(kind: str, level: int) -> np.ndarray:
    """Points of a line, filled square or Koch curve at refinement ``level``.

    line: ``2**level + 1`` evenly spaced points on the unit x-axis segment.
    square (alias "filled-square"): the ``(2**level + 1)**2`` grid on the unit square.
    koch: the Koch-curve vertices.
    """
    if level < 0:
        raise InputError(f"level must be >= 0, got {level}")
    kind = "square" if kind == "filled-square" else kind
    counts = {"line": 2**level + 1, "square": (2**level + 1) ** 2, "koch": 4**level + 1}
    if kind not in counts:
        raise InputError(f"unknown point set {kind!r}; expected line, square or koch")
    if counts[kind] > MAX_POINTS:
        raise InputError(f"{kind} level {level} would produce {counts[kind]} points (cap {MAX_POINTS})")
    if kind == "line":
        t = np.linspace(0.0, 1.0, 2**level + 1)
        return np.column_stack([t, np.zeros_like(t)])
    if kind == "square":
        g = np.linspace(0.0, 1.0, 2**level + 1)
        xx, yy = np.meshgrid(g, g)
        return np.column_stack([xx.ravel(), yy.ravel()])
    return koch_vertices(level)
