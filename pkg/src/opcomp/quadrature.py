"""Gauss-Legendre rules on [0,1] and composite/tensor variants."""

import numpy as np


def gauss_rule(n):
    """n-point Gauss-Legendre nodes and weights on [0,1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_gauss(n_cells, n_per_cell, lo=0.0, hi=1.0):
    """Composite Gauss rule: n_per_cell points on each of n_cells equal cells."""
    ref_x, ref_w = gauss_rule(n_per_cell)
    width = (hi - lo) / n_cells
    starts = lo + width * np.arange(n_cells)
    nodes = (starts[:, None] + width * ref_x[None, :]).ravel()
    weights = np.tile(width * ref_w, n_cells)
    return nodes, weights


def tensor_rule(nodes, weights, dim):
    """Tensor product of a 1D rule; returns points (N, dim) and weights (N,)."""
    if dim == 1:
        return nodes[:, None], weights
    xg, yg = np.meshgrid(nodes, nodes, indexing="ij")
    pts = np.column_stack([xg.ravel(), yg.ravel()])
    w = np.outer(weights, weights).ravel()
    return pts, w
