"""Tetrahedral quadrature rules in barycentric coordinates.

Weights are normalized to sum to one; multiply by the element volume.
"""

from __future__ import annotations

import numpy as np


def _orbit4(b: float) -> np.ndarray:
    """Four points: one coordinate 1-3b, the others b."""
    a = 1.0 - 3.0 * b
    pts = np.full((4, 4), b)
    np.fill_diagonal(pts, a)
    return pts


def _orbit6(c: float) -> np.ndarray:
    """Six points: two coordinates c, two coordinates 1/2 - c."""
    d = 0.5 - c
    pts = []
    for i in range(4):
        for j in range(i + 1, 4):
            p = np.full(4, d)
            p[i] = c
            p[j] = c
            pts.append(p)
    return np.array(pts)


def degree2_rule() -> tuple[np.ndarray, np.ndarray]:
    """Four-point rule, exact through degree 2."""
    b = (5.0 - np.sqrt(5.0)) / 20.0
    points = _orbit4(b)
    weights = np.full(4, 0.25)
    return points, weights


def degree5_rule() -> tuple[np.ndarray, np.ndarray]:
    """14-point rule with positive weights, exact through degree 5."""
    b1 = 0.3108859192633005
    b2 = 0.0927352503108912
    c = 0.0455037041256497
    w1 = 0.1126879257180162
    w2 = 0.0734930431163619
    w3 = 0.0425460207770812
    points = np.vstack([_orbit4(b1), _orbit4(b2), _orbit6(c)])
    weights = np.concatenate([np.full(4, w1), np.full(4, w2), np.full(6, w3)])
    return points, weights
