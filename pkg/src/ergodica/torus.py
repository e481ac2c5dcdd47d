"""Periodic grids, monotone torus discretizations, and ergodic (cell) solvers.

All cell problems share the shape  a(y) D^2 v + f(y) = gamma  on the flat
torus; the pair (v, gamma) is computed from one augmented square solve

    [ A   -1 ] [ v     ]   [ -f ]
    [ m^T  0 ] [ gamma ] = [  0 ],

where A is the monotone discretization of a(y) D^2 and m the mean weights.
The constraint row pins the additive constant; the requested normalization
(mean zero or anchored at the grid origin) is applied afterwards.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .coeff import BellmanSpec, CoefficientField
from .errors import AssemblyError, InputError, IterationError, SolverError
from .stencils import periodic_diff_matrix

MEAN_ZERO = "mean_zero"
ANCHOR = "anchor_at_y0"


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the d-torus: n points per axis, spacing h = 1/n."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InputError("dim must be 1 or 2")
        if self.n < 4:
            raise InputError("need n >= 4 points per axis")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def npoints(self):
        return self.n ** self.dim

    @property
    def shape(self):
        return (self.n,) * self.dim

    def points(self):
        """Node coordinates k*h, flattened to (npoints, dim) in row-major order."""
        axis = np.arange(self.n) * self.h
        if self.dim == 1:
            return axis[:, None]
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=1)


@dataclass
class GridFunction:
    """Values attached to the nodes of a periodic or domain grid."""

    grid: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise InputError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InputError("grid function contains nonfinite values")

    @property
    def flat(self):
        return self.values.ravel()

    def copy(self):
        return GridFunction(self.grid, self.values.copy())


@dataclass
class ErgodicSolution:
    """Solution (chi, gamma) of a torus cell problem, with its normalization tag."""

    chi: GridFunction
    gamma: float
    normalization: str
    residual: float


def _diffusion_from_samples(avals, grid: PeriodicGrid):
    """Monotone sparse discretization of a(y) D^2 from nodal samples of a.

    Cross terms in 2D use the 7-point stencil that shifts mass onto diagonal
    neighbors, which keeps all off-diagonal entries nonnegative provided
    |a12| <= min(a11, a22) at every node.
    """
    n, h = grid.n, grid.h
    inv_h2 = 1.0 / h ** 2
    if grid.dim == 1:
        a = avals[:, 0, 0]
        idx = np.arange(n)
        rows = np.concatenate([idx, idx, idx])
        cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
        vals = np.concatenate([-2 * a, a, a]) * inv_h2
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    a11 = avals[:, 0, 0]
    a22 = avals[:, 1, 1]
    a12 = 0.5 * (avals[:, 0, 1] + avals[:, 1, 0])
    slack = np.minimum(a11, a22) - np.abs(a12)
    if slack.min() < 0:
        worst = int(np.argmin(slack))
        raise AssemblyError(
            f"monotone cross stencil needs |a12| <= min(a11, a22); violated by "
            f"{-slack.min():.3e} at node {np.unravel_index(worst, grid.shape)}"
        )
    N = grid.npoints
    idx = np.arange(N)
    i, j = np.unravel_index(idx, grid.shape)

    def nb(di, dj):
        return np.ravel_multi_index(((i + di) % n, (j + dj) % n), grid.shape)

    ap = np.maximum(a12, 0.0)
    am = np.maximum(-a12, 0.0)
    entries = [
        (nb(1, 0), a11 - np.abs(a12)),
        (nb(-1, 0), a11 - np.abs(a12)),
        (nb(0, 1), a22 - np.abs(a12)),
        (nb(0, -1), a22 - np.abs(a12)),
        (nb(1, 1), ap),
        (nb(-1, -1), ap),
        (nb(1, -1), am),
        (nb(-1, 1), am),
    ]
    diag = -2 * (a11 + a22 - np.abs(a12))
    rows = [idx]
    cols = [idx]
    vals = [diag * inv_h2]
    for cc, vv in entries:
        rows.append(idx)
        cols.append(cc)
        vals.append(vv * inv_h2)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N),
    )


def assemble_torus_diffusion(field: CoefficientField, grid: PeriodicGrid):
    """Sparse monotone operator for y -> a(y) D^2 with periodic wrap."""
    if field.dim != grid.dim:
        raise InputError(f"field dim {field.dim} != grid dim {grid.dim}")
    avals, _, _ = field.sample(grid.points())
    return _diffusion_from_samples(avals, grid)


def _normalize(chi, normalization):
    if normalization == MEAN_ZERO:
        return chi - chi.mean()
    if normalization == ANCHOR:
        return chi - chi.ravel()[0]
    raise InputError(f"unknown normalization {normalization!r}")


def solve_cell(a_op, f, normalization=MEAN_ZERO, tol=1e-11, grid=None):
    """Solve  a_op chi + f = gamma * 1  on the torus.

    `f` may be a GridFunction or a flat array (then `grid` must be given).
    Returns an ErgodicSolution; gamma is the unique ergodic constant, chi is
    normalized per `normalization`.
    """
    if isinstance(f, GridFunction):
        grid = f.grid
        fvec = f.flat
    else:
        if grid is None:
            raise InputError("pass a GridFunction or supply grid=")
        fvec = np.asarray(f, dtype=float).ravel()
    N = a_op.shape[0]
    if fvec.shape[0] != N:
        raise InputError("right-hand side size does not match the operator")
    ones = np.ones((N, 1))
    mean_row = np.full((1, N), 1.0 / N)
    aug = sparse.bmat([[a_op, -ones], [mean_row, None]], format="csc")
    rhs = np.concatenate([-fvec, [0.0]])
    sol = spsolve(aug, rhs)
    if not np.all(np.isfinite(sol)):
        raise SolverError("augmented cell solve produced nonfinite values")
    chi, gamma = sol[:N], float(sol[N])
    res = np.max(np.abs(a_op @ chi + fvec - gamma))
    scale = 1.0 + np.max(np.abs(fvec)) + abs(gamma)
    if res > max(tol * scale * 1e3, 1e-7 * scale):
        raise SolverError(f"cell solve residual {res:.3e} exceeds tolerance")
    chi = _normalize(chi, normalization)
    return ErgodicSolution(
        GridFunction(grid, chi.reshape(grid.shape)), gamma, normalization, float(res)
    )


def solve_cell_with_rhs(a_op, rhs, normalization=MEAN_ZERO, tol=1e-11, grid=None):
    """Cell solve with a precomputed right-hand side (gradient couplings etc.)."""
    return solve_cell(a_op, rhs, normalization=normalization, tol=tol, grid=grid)


def gradient_matrices(grid: PeriodicGrid):
    """4th-order centered first-derivative operators, one per axis, on flat vectors."""
    D = periodic_diff_matrix(grid.n, grid.h, m=1)
    if grid.dim == 1:
        return [D]
    eye = sparse.identity(grid.n, format="csr")
    return [sparse.kron(D, eye, format="csr"), sparse.kron(eye, D, format="csr")]


def _policy_operator(ops, policy):
    """Row-select frozen-policy operator from per-control operators."""
    N = ops[0].shape[0]
    out = None
    for beta, op in enumerate(ops):
        mask = (policy == beta).astype(float)
        if mask.any():
            piece = sparse.diags(mask) @ op
            out = piece if out is None else out + piece
    return out.tocsr()


def solve_nonlinear_cell(spec: BellmanSpec, M, grid: PeriodicGrid, tol=1e-10,
                         normalization=ANCHOR, max_iter=100):
    """Ergodic constant and corrector of  max_beta Tr(a_beta(y)(M + D^2 w)) = c.

    Howard policy iteration: freeze the argmax control field, solve the
    linear cell problem, re-select controls; stops when the control field is
    stationary and the discrete residual is below `tol`. Returns
    (ErgodicSolution, policy array).
    """
    M = np.asarray(M, dtype=float).reshape(spec.dim, spec.dim)
    M = 0.5 * (M + M.T)
    pts = grid.points()
    ops, fs = [], []
    for ctl in spec.controls:
        avals, _, _ = ctl.field.sample(pts)
        ops.append(_diffusion_from_samples(avals, grid))
        fs.append(np.einsum("nij,ji->n", avals, M))
    fs = np.array(fs)  # (n_controls, N)

    policy = np.argmax(fs, axis=0)
    scale = 1.0 + np.max(np.abs(fs))
    seen = {}
    last = None
    for it in range(max_iter):
        a_pol = _policy_operator(ops, policy)
        f_pol = fs[policy, np.arange(grid.npoints)]
        sol = solve_cell(a_pol, f_pol, normalization=normalization, grid=grid)
        w = sol.chi.flat
        values = np.array([op @ w for op in ops]) + fs
        bellman = values.max(axis=0)
        residual = float(np.max(np.abs(bellman - sol.gamma)))
        current = values[policy, np.arange(grid.npoints)]
        # keep the incumbent control unless the improvement is meaningful
        improve = bellman - current
        new_policy = np.where(improve > 1e-12 * scale, np.argmax(values, axis=0), policy)
        if np.array_equal(new_policy, policy) and residual <= max(tol * scale, tol):
            sol.residual = residual
            return sol, policy
        key = new_policy.tobytes()
        if key in seen and last is not None and sol.gamma <= last + 1e-14 * scale:
            raise IterationError(
                f"policy cycle without progress at iteration {it}; "
                f"gamma={sol.gamma:.12g}, residual={residual:.3e}"
            )
        seen[key] = it
        last = sol.gamma
        policy = new_policy
    raise IterationError(f"Howard iteration did not converge in {max_iter} sweeps")
