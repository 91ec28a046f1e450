"""Chebyshev collocation grid on [0, 1] with barycentric interpolation."""
from __future__ import annotations

import functools

import numpy as np


class ChebGrid:
    """Chebyshev points of the second kind mapped to [0, 1], ascending."""

    def __init__(self, K: int):
        if K < 8:
            raise ValueError("need at least 8 collocation nodes")
        self.K = K
        k = np.arange(K)
        self.nodes = 0.5 * (1.0 - np.cos(np.pi * k / (K - 1)))
        w = np.ones(K)
        w[1::2] = -1.0
        w[0] *= 0.5
        w[-1] *= 0.5
        self.bary_w = w

    def eval_matrix(self, pts) -> np.ndarray:
        """Row-stochastic matrix E with (E @ f_at_nodes)[p] = interpolant at pts[p]."""
        pts = np.atleast_1d(np.asarray(pts, dtype=float))
        d = pts[:, None] - self.nodes[None, :]
        exact_row, exact_col = np.nonzero(d == 0.0)
        d[exact_row, exact_col] = 1.0  # placeholder, rows overwritten below
        M = self.bary_w[None, :] / d
        M /= M.sum(axis=1, keepdims=True)
        if exact_row.size:
            M[exact_row, :] = 0.0
            M[exact_row, exact_col] = 1.0
        return M

    def __eq__(self, other):
        return isinstance(other, ChebGrid) and other.K == self.K

    def __hash__(self):
        return hash(("ChebGrid", self.K))


@functools.lru_cache(maxsize=32)
def get_grid(K: int) -> ChebGrid:
    return ChebGrid(K)
