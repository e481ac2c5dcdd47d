"""Dirichlet discretization of oscillatory, effective and Bellman operators
on an interval or rectangle, as monotone sparse operators.

Grid functions live on the full node set (boundary included); operators act
on interior unknowns, with the boundary coupling kept as a separate block so
inhomogeneous Dirichlet data can be moved to the right-hand side.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import sparse

from .coeff import BellmanSpec, LinearOperatorSpec
from .effective import EffectiveLinear
from .errors import AssemblyError, InputError
from .torus import GridFunction

_OFFDIAG_TOL = 1e-12


@dataclass(frozen=True)
class DomainGrid:
    """Tensor grid on a product of intervals, with homogeneous-Dirichlet layout.

    `n` counts cells per axis, so each axis carries n+1 nodes of which the
    two end nodes are boundary.
    """

    dim: int
    bounds: tuple
    n: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InputError("dim must be 1 or 2")
        if len(self.bounds) != self.dim or len(self.n) != self.dim:
            raise InputError("bounds/n must have one entry per axis")
        for (lo, hi), nk in zip(self.bounds, self.n):
            if hi <= lo:
                raise InputError("empty axis interval")
            if nk < 4:
                raise InputError("need at least 4 cells per axis")

    @classmethod
    def unit(cls, dim, n):
        n = (n,) * dim if np.isscalar(n) else tuple(n)
        return cls(dim, tuple((0.0, 1.0) for _ in range(dim)), n)

    @property
    def h(self):
        return tuple((hi - lo) / nk for (lo, hi), nk in zip(self.bounds, self.n))

    @property
    def shape(self):
        return tuple(nk + 1 for nk in self.n)

    @property
    def axes(self):
        return tuple(
            np.linspace(lo, hi, nk + 1) for (lo, hi), nk in zip(self.bounds, self.n)
        )

    def points(self):
        """All node coordinates, (N_full, dim), row-major."""
        if self.dim == 1:
            return self.axes[0][:, None]
        g1, g2 = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=1)

    def interior_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        if self.dim == 1:
            mask[1:-1] = True
        else:
            mask[1:-1, 1:-1] = True
        return mask

    def interior_index(self):
        return np.flatnonzero(self.interior_mask().ravel())

    def boundary_index(self):
        return np.flatnonzero(~self.interior_mask().ravel())

    def interior_points(self):
        return self.points()[self.interior_index()]

    def restrict(self, values):
        """Full-node array -> flat interior vector."""
        return np.asarray(values).ravel()[self.interior_index()]

    def embed(self, interior, boundary=None):
        """Flat interior vector -> full-node array (boundary defaults to 0)."""
        full = np.zeros(np.prod(self.shape))
        full[self.interior_index()] = interior
        if boundary is not None:
            full[self.boundary_index()] = boundary
        return full.reshape(self.shape)

    def inner_weights(self):
        """Trapezoidal quadrature weights on the full node set."""
        ws = []
        for hk, nk in zip(self.h, self.n):
            w = np.full(nk + 1, hk)
            w[0] = w[-1] = hk / 2.0
            ws.append(w)
        if self.dim == 1:
            return ws[0]
        return np.outer(ws[0], ws[1])


@dataclass
class DiscreteOperator:
    """Sparse interior operator L_h with its boundary coupling block.

    Sign convention: (matrix @ phi_interior + boundary @ phi_boundary)
    approximates  a D^2 phi + b . D phi + c phi  at interior nodes.
    """

    matrix: sparse.csr_matrix
    boundary: sparse.csr_matrix
    grid: DomainGrid
    eps: float = 0.0            # 0 marks an effective (non-oscillatory) operator
    c_max: float = 0.0
    scheme: dict = dc_field(default_factory=dict)

    def apply(self, phi: GridFunction):
        """Operator value at interior nodes, honoring the boundary values of phi."""
        flat = phi.flat
        vals = self.matrix @ flat[self.grid.interior_index()] + \
            self.boundary @ flat[self.grid.boundary_index()]
        return vals


def assemble_linear(grid: DomainGrid, avals, bvals, cvals, eps=0.0) -> DiscreteOperator:
    """Monotone assembly from nodal coefficient samples on the full node set.

    Second derivatives are centered; the drift term is centered where the
    mesh-Peclet number allows and first-order upwind at the remaining nodes;
    2D cross terms use the diagonal-shift 7-point stencil.
    """
    d = grid.dim
    shape = grid.shape
    N_full = int(np.prod(shape))
    avals = np.asarray(avals, dtype=float).reshape(N_full, d, d)
    bvals = np.asarray(bvals, dtype=float).reshape(N_full, d)
    cvals = np.asarray(cvals, dtype=float).reshape(N_full)
    h = grid.h

    interior = grid.interior_index()
    ni = len(interior)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    row_ids = np.arange(ni)
    if d == 1:
        a = avals[interior, 0, 0]
        cross = np.zeros(ni)
    else:
        a11 = avals[interior, 0, 0]
        a22 = avals[interior, 1, 1]
        a12 = 0.5 * (avals[interior, 0, 1] + avals[interior, 1, 0])
        if np.any(np.abs(a12) > _OFFDIAG_TOL) and abs(h[0] - h[1]) > 1e-14:
            raise AssemblyError("cross terms require equal spacing per axis")
        slack = np.minimum(a11, a22) - np.abs(a12)
        if slack.min() < 0:
            worst = interior[int(np.argmin(slack))]
            raise AssemblyError(
                f"|a12| exceeds min(a11, a22) by {-slack.min():.3e} at node "
                f"{np.unravel_index(worst, shape)}"
            )
        cross = np.abs(a12)

    multi = np.array(np.unravel_index(interior, shape)).T  # (ni, d)
    diag = np.zeros(ni)
    upwind_nodes = 0

    for ax in range(d):
        hk = h[ax]
        if d == 1:
            a_ax = a
        else:
            a_ax = (a11 if ax == 0 else a22) - cross
        b_ax = bvals[interior, ax]
        # drift scheme per node: centered when h|b| < 2 * a_eff
        centered = np.abs(b_ax) * hk < 2.0 * a_ax
        upwind_nodes += int(np.sum(~centered))

        step = np.zeros((1, d), dtype=int)
        step[0, ax] = 1
        east = np.ravel_multi_index((multi + step).T, shape)
        west = np.ravel_multi_index((multi - step).T, shape)

        ce = a_ax / hk ** 2 + np.where(
            centered, b_ax / (2 * hk), np.maximum(b_ax, 0.0) / hk)
        cw = a_ax / hk ** 2 - np.where(
            centered, b_ax / (2 * hk), -np.minimum(b_ax, 0.0) / hk)
        diag += -2 * a_ax / hk ** 2 - np.where(centered, 0.0, np.abs(b_ax) / hk)
        add(row_ids, east, ce)
        add(row_ids, west, cw)

    if d == 2 and np.any(cross > 0):
        hk = h[0]
        ap = np.maximum(a12, 0.0)
        am = np.maximum(-a12, 0.0)
        for (di, dj), coeff in (((1, 1), ap), ((-1, -1), ap),
                                ((1, -1), am), ((-1, 1), am)):
            nb = np.ravel_multi_index(
                (multi[:, 0] + di, multi[:, 1] + dj), shape)
            add(row_ids, nb, coeff / hk ** 2)
        diag += -2 * cross / hk ** 2

    diag += cvals[interior]
    add(row_ids, interior, diag)

    A_full = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ni, N_full),
    )
    boundary_ids = grid.boundary_index()
    matrix = A_full[:, interior].tocsr()
    bmat = A_full[:, boundary_ids].tocsr()

    off = matrix - sparse.diags(matrix.diagonal())
    if off.nnz and off.data.min() < -_OFFDIAG_TOL:
        k = int(np.argmin(off.data))
        r = np.searchsorted(off.indptr, k, side="right") - 1
        raise AssemblyError(
            f"negative off-diagonal {off.data.min():.3e} in row of interior node "
            f"{np.unravel_index(interior[r], shape)}"
        )
    return DiscreteOperator(
        matrix=matrix,
        boundary=bmat,
        grid=grid,
        eps=eps,
        c_max=float(cvals[interior].max()),
        scheme={"upwind_nodes": upwind_nodes, "interior_nodes": ni},
    )


def assemble_oscillatory(spec: LinearOperatorSpec, eps: float,
                         grid: DomainGrid) -> DiscreteOperator:
    """Discretize a(x/eps) D^2 + b(x/eps) . D + c(x/eps) with Dirichlet data."""
    if eps <= 0:
        raise InputError("eps must be positive")
    if spec.dim != grid.dim:
        raise InputError("operator and grid dimensions differ")
    y = (grid.points() / eps) % 1.0
    avals, bvals, cvals = spec.field.sample(y)
    return assemble_linear(grid, avals, bvals, cvals, eps=eps)


def assemble_effective(eff: EffectiveLinear, grid: DomainGrid) -> DiscreteOperator:
    """Constant-coefficient effective operator on the same layout."""
    if eff.dim != grid.dim:
        raise InputError("effective operator and grid dimensions differ")
    N = int(np.prod(grid.shape))
    avals = np.broadcast_to(eff.a_bar, (N, eff.dim, eff.dim))
    bvals = np.broadcast_to(eff.b_bar, (N, eff.dim))
    cvals = np.full(N, eff.c_bar)
    return assemble_linear(grid, avals, bvals, cvals, eps=0.0)


def bellman_operators(spec: BellmanSpec, eps: float, grid: DomainGrid):
    """Frozen linear operator of each control, assembled once."""
    return [assemble_oscillatory(ctl, eps, grid) for ctl in spec.controls]


def apply_bellman(spec: BellmanSpec, eps: float, grid: DomainGrid,
                  phi: GridFunction, ops=None) -> GridFunction:
    """Nodewise max over controls of the frozen operators applied to phi."""
    if ops is None:
        ops = bellman_operators(spec, eps, grid)
    vals = np.max([op.apply(phi) for op in ops], axis=0)
    return GridFunction(grid, grid.embed(vals))


def is_monotone(op: DiscreteOperator, shift: float, tol=1e-9):
    """Check that shift*I - matrix is an M-matrix candidate.

    Returns (ok, info); info carries the worst off-diagonal entry of the
    shifted matrix and the minimal diagonal-dominance excess.
    """
    M = (sparse.identity(op.matrix.shape[0]) * shift - op.matrix).tocsr()
    diag = M.diagonal()
    off = M - sparse.diags(diag)
    worst_off = float(off.data.max()) if off.nnz else 0.0
    worst_idx = None
    if off.nnz:
        k = int(np.argmax(off.data))
        r = np.searchsorted(off.indptr, k, side="right") - 1
        worst_idx = (int(r), int(off.indices[k]))
    row_excess = diag - np.asarray(np.abs(off).sum(axis=1)).ravel()
    ok = bool(diag.min() > 0 and worst_off <= tol and row_excess.min() > -tol)
    info = {
        "worst_offdiag": worst_off,
        "worst_offdiag_at": worst_idx,
        "min_diag": float(diag.min()),
        "min_row_excess": float(row_excess.min()),
    }
    return ok, info


def properness_shift(op: DiscreteOperator) -> float:
    """Shift making shift*I - L_h a nonsingular M-matrix: max(0, max c) + 1."""
    return max(0.0, op.c_max) + 1.0


def dirichlet_solve(op: DiscreteOperator, rhs, boundary_values=None) -> GridFunction:
    """Solve  L_h u = rhs  at interior nodes with the given Dirichlet data.

    `rhs` is a flat interior vector or full-node array; boundary data (full
    boundary-node vector) defaults to zero.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape == op.grid.shape:
        rhs = op.grid.restrict(rhs)
    if boundary_values is not None:
        rhs = rhs - op.boundary @ np.asarray(boundary_values, dtype=float)
    sol = sparse.linalg.spsolve(op.matrix.tocsc(), rhs)
    if not np.all(np.isfinite(sol)):
        from .errors import SolverError
        raise SolverError("Dirichlet solve produced nonfinite values")
    return GridFunction(op.grid, op.grid.embed(sol, boundary_values))
