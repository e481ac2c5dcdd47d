"""Finite-difference weights and periodic interpolation utilities.

Differentiation matrices come in two flavors: circulant ones for the torus
(wraparound indexing) and banded ones for bounded intervals, where rows near
the edge fall back to one-sided stencils of the same order.
"""

import numpy as np
from scipy import sparse
from scipy.ndimage import map_coordinates, spline_filter


def fd_weights(nodes, x0, m):
    """Weights of the m-th derivative at x0 from samples at `nodes` (Fornberg)."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if n <= m:
        raise ValueError("need more than m nodes for the m-th derivative")
    C = np.zeros((n, m + 1))
    C[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    C[i, k] = c1 * (k * C[i - 1, k - 1] - c5 * C[i - 1, k]) / c2
                C[i, 0] = -c1 * c5 * C[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                C[j, k] = (c4 * C[j, k] - k * C[j, k - 1]) / c3
            C[j, 0] = c4 * C[j, 0] / c3
        c1 = c2
    return C[:, m]


def periodic_diff_matrix(n, h, m=1):
    """Circulant 4th-order differentiation matrix for n periodic nodes.

    Centered stencils: 5 points for m in {1, 2}, 7 points for m = 3.
    """
    half = 2 if m <= 2 else 3
    offsets = np.arange(-half, half + 1)
    w = fd_weights(offsets * h, 0.0, m)
    rows, cols, vals = [], [], []
    idx = np.arange(n)
    for off, wk in zip(offsets, w):
        if wk == 0.0:
            continue
        rows.append(idx)
        cols.append((idx + off) % n)
        vals.append(np.full(n, wk))
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )


def bounded_diff_matrix(n, h, m=1):
    """4th-order differentiation matrix on n equispaced nodes of an interval.

    Interior rows are centered; rows within reach of an edge use one-sided
    stencils of m + 4 points (order 4).
    """
    half = 2 if m <= 2 else 3
    p_side = m + 4
    if n < p_side:
        raise ValueError(f"grid too coarse for a 4th-order stencil: n={n} < {p_side}")
    rows, cols, vals = [], [], []
    # centered block
    offsets = np.arange(-half, half + 1)
    w = fd_weights(offsets * h, 0.0, m)
    interior = np.arange(half, n - half)
    for off, wk in zip(offsets, w):
        rows.append(interior)
        cols.append(interior + off)
        vals.append(np.full(len(interior), wk))
    # one-sided rows
    for i in list(range(half)) + list(range(n - half, n)):
        start = 0 if i < half else n - p_side
        pts = np.arange(start, start + p_side)
        w1 = fd_weights((pts - i) * h, 0.0, m)
        rows.append(pts * 0 + i)
        cols.append(pts)
        vals.append(w1)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )


class TorusInterpolant:
    """Periodic cubic-spline interpolation of values sampled on a torus grid.

    The spline prefilter is computed once so repeated evaluation at many
    points stays cheap.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.dim = self.values.ndim
        self._coef = spline_filter(self.values, order=3, mode="grid-wrap")

    def __call__(self, points):
        """Evaluate at `points`: shape (m,) in 1D or (m, 2) in 2D; wraps mod 1."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        if self.dim == 1:
            coords = (pts.reshape(-1) % 1.0) * self.values.shape[0]
            coords = coords[np.newaxis, :]
        else:
            pts = pts.reshape(-1, 2)
            coords = np.stack(
                [(pts[:, k] % 1.0) * self.values.shape[k] for k in range(2)]
            )
        return map_coordinates(
            self._coef, coords, order=3, mode="grid-wrap", prefilter=False
        )
