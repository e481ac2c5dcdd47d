"""Two-scale expansion machinery: interior correctors, boundary correctors,
the pivot problem, eigenfunction alignment, and the nonlinear expansion.

Torus profiles are evaluated along the diagonal y = x/eps by periodic cubic
interpolation; x-derivatives of the slow factors use 4th-order stencils.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .coeff import BellmanSpec, LinearOperatorSpec
from .domain import (
    DiscreteOperator,
    DomainGrid,
    apply_bellman,
    assemble_effective,
    assemble_linear,
    assemble_oscillatory,
    bellman_operators,
    dirichlet_solve,
)
from .effective import CorrectorSet, EffectiveLinear, linearize_effective
from .eigen import EigenPair
from .errors import InputError, SolverError
from .stencils import TorusInterpolant, bounded_diff_matrix
from .torus import (
    GridFunction,
    PeriodicGrid,
    _diffusion_from_samples,
    _policy_operator,
    solve_nonlinear_cell,
)


@dataclass
class DerivativeBundle:
    """A domain function with its derivatives up to a requested order."""

    u: GridFunction
    d1: Dict[tuple, GridFunction]
    d2: Dict[tuple, GridFunction]
    d3: Dict[tuple, GridFunction]
    order: int


def _axis_apply(D, values, axis):
    if values.ndim == 1:
        return D @ values
    if axis == 0:
        return D @ values
    return (D @ values.T).T


def derivative_bundle(u: GridFunction, order: int) -> DerivativeBundle:
    """Differentiate a domain grid function with 4th-order stencils.

    Centered in the interior, one-sided near the boundary. Mixed partials
    are compositions of the per-axis operators, so their symmetry is exact.
    """
    if order > 3:
        raise InputError("order must be <= 3")
    grid = u.grid
    d = grid.dim
    mats = [bounded_diff_matrix(grid.shape[k], grid.h[k], m=1) for k in range(d)]
    vals = u.values

    d1 = {}
    for k in range(d):
        d1[(k,)] = _axis_apply(mats[k], vals, k)
    d2, d3 = {}, {}
    if order >= 2:
        for k in range(d):
            for l in range(k, d):
                d2[(k, l)] = _axis_apply(mats[l], d1[(k,)], l)
                d2[(l, k)] = d2[(k, l)]
    if order >= 3:
        base = {}
        for key in {tuple(sorted(t)) for t in np.ndindex((d,) * 3)}:
            kk, ll, mm = key
            base[key] = _axis_apply(mats[mm], d2[(kk, ll)], mm)
        for t in np.ndindex((d,) * 3):
            d3[t] = base[tuple(sorted(t))]
    wrap = lambda table: {key: GridFunction(grid, arr) for key, arr in table.items()}
    return DerivativeBundle(u=u, d1=wrap(d1), d2=wrap(d2), d3=wrap(d3), order=order)


def _fast_coordinates(grid: DomainGrid, eps: float):
    return (grid.points() / eps) % 1.0


def _interp(sol, pts):
    return TorusInterpolant(sol.chi.values)(pts)


def second_corrector(correctors: CorrectorSet, bundle: DerivativeBundle,
                     eps: float) -> GridFunction:
    """Trace x -> w_2(x, x/eps) of the second-order interior corrector.

    w_2(x, y) = chi^{kl}(y) d2_kl u(x) + eta^k(y) d1_k u(x) + nu(y) u(x).
    """
    grid = bundle.u.grid
    d = grid.dim
    y = _fast_coordinates(grid, eps)
    out = np.zeros(np.prod(grid.shape))
    for k in range(d):
        for l in range(d):
            out += _interp(correctors.chi[(k, l)], y) * bundle.d2[(k, l)].flat
        out += _interp(correctors.eta[k], y) * bundle.d1[(k,)].flat
    out += _interp(correctors.nu, y) * bundle.u.flat
    return GridFunction(grid, out.reshape(grid.shape))


def solve_psi1(eff: EffectiveLinear, bundle: DerivativeBundle,
               grid: DomainGrid, op: Optional[DiscreteOperator] = None) -> GridFunction:
    """First-order slow corrector: L_bar psi_1 = -(a_klm d3 u + b_kl d2 u
    + c_k d1 u + d u), psi_1 = 0 on the boundary."""
    d = grid.dim
    if bundle.order < 3:
        raise InputError("psi_1 needs third derivatives of u")
    rhs = np.zeros(np.prod(grid.shape))
    for k in range(d):
        for l in range(d):
            for m in range(d):
                rhs += eff.a_bar_klm[k, l, m] * bundle.d3[(k, l, m)].flat
            rhs += eff.b_bar_kl[k, l] * bundle.d2[(k, l)].flat
        rhs += eff.c_bar_k[k] * bundle.d1[(k,)].flat
    rhs += eff.d_bar * bundle.u.flat
    if op is None:
        op = assemble_effective(eff, grid)
    return dirichlet_solve(op, -grid.restrict(rhs.reshape(grid.shape)))


def third_corrector(correctors: CorrectorSet, bundle: DerivativeBundle,
                    psi1_bundle: DerivativeBundle, eps: float) -> GridFunction:
    """Trace x -> w_3(x, x/eps), including the psi_1 block."""
    grid = bundle.u.grid
    d = grid.dim
    if bundle.order < 3:
        raise InputError("w_3 needs third derivatives of u")
    y = _fast_coordinates(grid, eps)
    out = np.zeros(np.prod(grid.shape))
    for k in range(d):
        for l in range(d):
            for m in range(d):
                out += _interp(correctors.chi3[(k, l, m)], y) * \
                    bundle.d3[(k, l, m)].flat
            out += _interp(correctors.eta2[(k, l)], y) * bundle.d2[(k, l)].flat
            out += _interp(correctors.chi[(k, l)], y) * psi1_bundle.d2[(k, l)].flat
        out += _interp(correctors.nu1[k], y) * bundle.d1[(k,)].flat
        out += _interp(correctors.eta[k], y) * psi1_bundle.d1[(k,)].flat
    out += _interp(correctors.xi, y) * bundle.u.flat
    out += _interp(correctors.nu, y) * psi1_bundle.u.flat
    return GridFunction(grid, out.reshape(grid.shape))


def boundary_correctors(spec: LinearOperatorSpec, eps: float, grid: DomainGrid,
                        w2_trace: GridFunction,
                        w3_trace: Optional[GridFunction] = None,
                        op: Optional[DiscreteOperator] = None):
    """Solve L^eps z_k = 0 with boundary data -w_k(x, x/eps); returns (z2, z3).

    z3 is None when no third-order trace is supplied (the 2D pipeline).
    """
    if op is None:
        op = assemble_oscillatory(spec, eps, grid)
    bidx = grid.boundary_index()
    zero = np.zeros(len(grid.interior_index()))
    z2 = dirichlet_solve(op, zero, boundary_values=-w2_trace.flat[bidx])
    z3 = None
    if w3_trace is not None:
        z3 = dirichlet_solve(op, zero, boundary_values=-w3_trace.flat[bidx])
    return z2, z3


@dataclass
class ExpansionResult:
    """Full corrector v^eps and its ingredients."""

    psi1: GridFunction
    w2_trace: GridFunction
    z2: GridFunction
    w3_trace: Optional[GridFunction]
    z3: Optional[GridFunction]
    v_eps: GridFunction
    sup_norm_v: float


def full_corrector(psi1: GridFunction, w2_trace: GridFunction, z2: GridFunction,
                   w3_trace: Optional[GridFunction],
                   z3: Optional[GridFunction], eps: float) -> ExpansionResult:
    """v^eps = eps psi_1 + eps^2 (w_2 + z_2) [+ eps^3 (w_3 + z_3)]."""
    v = eps * psi1.values + eps ** 2 * (w2_trace.values + z2.values)
    if w3_trace is not None:
        if z3 is None:
            raise InputError("w3 trace given without its boundary corrector")
        v = v + eps ** 3 * (w3_trace.values + z3.values)
    v_fn = GridFunction(psi1.grid, v)
    return ExpansionResult(
        psi1=psi1, w2_trace=w2_trace, z2=z2, w3_trace=w3_trace, z3=z3,
        v_eps=v_fn, sup_norm_v=float(np.max(np.abs(v))),
    )


def pivot_problem(spec: LinearOperatorSpec, eps: float, grid: DomainGrid,
                  u: GridFunction, lambda_bar: float,
                  op: Optional[DiscreteOperator] = None) -> GridFunction:
    """Solve the auxiliary problem L^eps w^eps = -lambda_bar * u, w^eps = 0 on
    the boundary; w^eps is the pivot between u^eps and u."""
    if op is None:
        op = assemble_oscillatory(spec, eps, grid)
    rhs = -lambda_bar * grid.restrict(u.values)
    return dirichlet_solve(op, rhs)


def align_eigenfunctions(w_eps: GridFunction, u_eps: EigenPair):
    """Alignment factor t_eps and the orthogonal residual z^eps.

    t_eps = (w^eps, u^eps) / ||u^eps||_{L^2}^2 - 1 and
    z^eps = (1 + t_eps) u^eps - w^eps, so (z^eps, u^eps)_h = 0 exactly.
    Inner products use trapezoidal weights.
    """
    grid = w_eps.grid
    wts = grid.inner_weights()
    uu = float(np.sum(wts * u_eps.phi.values ** 2))
    if uu <= 0:
        raise InputError("eigenfunction is identically zero")
    wu = float(np.sum(wts * w_eps.values * u_eps.phi.values))
    t_eps = wu / uu - 1.0
    z = GridFunction(grid, (1.0 + t_eps) * u_eps.phi.values - w_eps.values)
    return t_eps, z


def nonlinear_expansion(spec: BellmanSpec, u_pair: EigenPair, eps: float,
                        grid: DomainGrid, torus_grid: PeriodicGrid,
                        lambda_bar: float, tol=1e-10):
    """Second-order expansion of the convex Bellman eigenproblem (1D).

    Builds w_2(x, y) = w(y; u''(x)) via the nonlinear cell problem (one
    solve per Hessian direction, scaled by positive 1-homogeneity), the
    linearized coefficients, the slow corrector w_1 = psi, and returns
    (w^eps = u + eps w_1 + eps^2 w_2-trace, report).
    """
    if grid.dim != 1:
        raise InputError("the nonlinear expansion is implemented in 1D only")
    u = u_pair.phi
    bundle = derivative_bundle(u, order=2)
    M = bundle.d2[(0, 0)].flat
    npts = len(M)

    sgn = np.where(M < 0, -1, 1)
    sgn[np.abs(M) < 1e-12] = -1  # degenerate Hessian: follow the interior sign
    cell, policy, a_pol, gamma = {}, {}, {}, {}
    pts = torus_grid.points()
    avals_ctl = [ctl.field.sample(pts)[0] for ctl in spec.controls]
    for s in np.unique(sgn):
        sol, pol = solve_nonlinear_cell(spec, np.array([[float(s)]]), torus_grid,
                                        tol=tol)
        cell[s] = sol
        policy[s] = pol
        gamma[s] = sol.gamma
        stacked = np.stack([av[:, 0, 0] for av in avals_ctl])
        a_pol[s] = stacked[pol, np.arange(torus_grid.npoints)]

    # w_2 rows by homogeneity: w(y; M) = |M| w(y; sign M)
    W2 = np.abs(M)[:, None] * np.array([cell[s].chi.flat for s in sgn])

    # consistency of the frozen cell problems with the effective eigenproblem
    c_of_x = np.abs(M) * np.array([gamma[s] for s in sgn])
    interior = grid.interior_index()
    w2F_residual = float(np.max(np.abs(
        c_of_x[interior] + lambda_bar * u.flat[interior])))

    y_diag = _fast_coordinates(grid, eps)[:, 0]
    traces = {s: TorusInterpolant(cell[s].chi.values)(y_diag) for s in cell}
    w2_trace = np.abs(M) * np.array(
        [traces[s][i] for i, s in enumerate(sgn)]
    )

    # Psi_1(x): ergodic constant of a(x, y) v'' + 2 a(x, y) d_x d_y w_2 = Psi
    m = grid.shape[0]
    Dx = bounded_diff_matrix(m, grid.h[0], m=1)
    Wx = Dx @ W2
    from .stencils import periodic_diff_matrix
    Dy = periodic_diff_matrix(torus_grid.n, torus_grid.h, m=1)
    Wxy = Wx @ Dy.T
    psi1_rhs = np.zeros(npts)
    for s in cell:
        rows = np.flatnonzero(sgn == s)
        if len(rows) == 0:
            continue
        avals = np.stack(avals_ctl)[policy[s], np.arange(torus_grid.npoints)]
        A_pol = _diffusion_from_samples(avals, torus_grid)
        N = torus_grid.npoints
        aug = sparse.bmat(
            [[A_pol, -np.ones((N, 1))], [np.full((1, N), 1.0 / N), None]],
            format="csc",
        )
        lu = splu(aug)
        rhs_block = 2.0 * a_pol[s][None, :] * Wxy[rows]
        for r, rhs in zip(rows, rhs_block):
            sol = lu.solve(np.concatenate([-rhs, [0.0]]))
            psi1_rhs[r] = sol[-1]

    # linearized effective diffusion, 0-homogeneous in the Hessian direction
    abar = {s: linearize_effective(spec, np.array([[float(s)]]), torus_grid)[0, 0]
            for s in cell}
    abar_x = np.array([abar[s] for s in sgn])
    op_lin = assemble_linear(
        grid, abar_x[:, None, None], np.zeros((npts, 1)), np.zeros(npts))
    psi = dirichlet_solve(op_lin, -psi1_rhs[interior])

    w_eps_vals = u.values + eps * psi.values + \
        eps ** 2 * w2_trace.reshape(grid.shape)
    w_eps = GridFunction(grid, w_eps_vals)

    bell = apply_bellman(spec, eps, grid, w_eps)
    res = bell.flat[interior] + lambda_bar * u.flat[interior]
    x_int = grid.interior_points()[:, 0]
    core = np.abs(res)[(x_int > 0.1) & (x_int < 0.9)]
    report = {
        "w2F_residual": w2F_residual,
        "expansion_residual_sup": float(np.max(np.abs(res))),
        "expansion_residual_interior": float(core.max()) if core.size else 0.0,
        "psi1": psi,
        "w2_trace": GridFunction(grid, w2_trace.reshape(grid.shape)),
        "Psi1": psi1_rhs,
    }
    return w_eps, report
