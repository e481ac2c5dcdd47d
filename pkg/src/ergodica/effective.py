"""Effective coefficients: first- and third-order constants, and the
homogenized nonlinear map with its derivative matrix.

Each effective constant is the ergodic constant of one torus cell problem.
The first round (chi^kl, eta^k, nu) uses the raw coefficients as data; the
second round feeds on 4th-order gradients of the first-round correctors.
"""

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .coeff import BellmanSpec, LinearOperatorSpec
from .errors import InputError, SolverError
from .torus import (
    ANCHOR,
    ErgodicSolution,
    PeriodicGrid,
    assemble_torus_diffusion,
    gradient_matrices,
    solve_cell,
    solve_cell_with_rhs,
    solve_nonlinear_cell,
)


@dataclass
class CorrectorSet:
    """All torus correctors of a linear operator, anchored at the grid origin."""

    grid: PeriodicGrid
    chi: Dict[tuple, ErgodicSolution]       # (k, l) -> chi^{kl}
    eta: List[ErgodicSolution]              # k -> eta^k
    nu: ErgodicSolution
    chi3: Dict[tuple, ErgodicSolution]      # (k, l, m) -> chi^{klm}
    eta2: Dict[tuple, ErgodicSolution]      # (k, l) -> eta^{kl}
    nu1: List[ErgodicSolution]              # k -> nu^k
    xi: ErgodicSolution


@dataclass
class EffectiveLinear:
    """Constant coefficients of the effective operator, plus third-order constants."""

    a_bar: np.ndarray           # (d, d), symmetrized
    b_bar: np.ndarray           # (d,)
    c_bar: float
    a_bar_klm: np.ndarray       # (d, d, d)
    b_bar_kl: np.ndarray        # (d, d)
    c_bar_k: np.ndarray         # (d,)
    d_bar: float
    asymmetry_defect: float = 0.0

    @property
    def dim(self):
        return self.a_bar.shape[0]

    def as_dict(self):
        return {
            "a_bar": self.a_bar.tolist(),
            "b_bar": self.b_bar.tolist(),
            "c_bar": self.c_bar,
            "a_bar_klm": self.a_bar_klm.tolist(),
            "b_bar_kl": self.b_bar_kl.tolist(),
            "c_bar_k": self.c_bar_k.tolist(),
            "d_bar": self.d_bar,
        }


def build_corrector_set(spec: LinearOperatorSpec, grid: PeriodicGrid) -> CorrectorSet:
    """Solve the full hierarchy of cell problems for a linear operator.

    Order matters: the second-round right-hand sides consume gradients of
    the first-round correctors (centered 4th-order differences).
    """
    d = spec.dim
    if grid.dim != d:
        raise InputError("grid dimension does not match the operator")
    pts = grid.points()
    avals, bvals, cvals = spec.field.sample(pts)
    A = assemble_torus_diffusion(spec.field, grid)
    D = gradient_matrices(grid)

    def solve(f, label):
        try:
            return solve_cell(A, f, normalization=ANCHOR, grid=grid)
        except SolverError as exc:
            raise SolverError(f"cell problem {label} failed: {exc}") from exc

    chi = {
        (k, l): solve(avals[:, k, l], f"chi[{k}{l}]")
        for k in range(d) for l in range(d)
    }
    eta = [solve(bvals[:, k], f"eta[{k}]") for k in range(d)]
    nu = solve(cvals, "nu")

    grad = lambda sol: [Dk @ sol.chi.flat for Dk in D]
    grad_chi = {kl: grad(sol) for kl, sol in chi.items()}
    grad_eta = [grad(sol) for sol in eta]
    grad_nu = grad(nu)

    # 2 a_{*m} . D_y chi^{kl}
    def col_dot(m, g):
        return sum(avals[:, i, m] * g[i] for i in range(d))

    def b_dot(g):
        return sum(bvals[:, i] * g[i] for i in range(d))

    chi3 = {
        (k, l, m): solve(2.0 * col_dot(m, grad_chi[(k, l)]), f"chi[{k}{l}{m}]")
        for k in range(d) for l in range(d) for m in range(d)
    }
    eta2 = {
        (k, l): solve(2.0 * col_dot(k, grad_eta[l]) + b_dot(grad_chi[(k, l)]),
                      f"eta[{k}{l}]")
        for k in range(d) for l in range(d)
    }
    nu1 = [
        solve(2.0 * col_dot(k, grad_nu) + b_dot(grad_eta[k]), f"nu[{k}]")
        for k in range(d)
    ]
    xi = solve(b_dot(grad_nu), "xi")
    return CorrectorSet(grid, chi, eta, nu, chi3, eta2, nu1, xi)


def effective_linear(spec: LinearOperatorSpec, correctors: CorrectorSet,
                     ellipticity_tol=1e-8) -> EffectiveLinear:
    """Package all ergodic constants; a_bar is symmetrized, the defect recorded."""
    d = spec.dim
    gam = np.array([[correctors.chi[(k, l)].gamma for l in range(d)] for k in range(d)])
    a_bar = 0.5 * (gam + gam.T)
    defect = float(np.max(np.abs(gam - gam.T)))
    eigs = np.linalg.eigvalsh(a_bar)
    if eigs.min() < spec.lambda_ell - ellipticity_tol or \
            eigs.max() > spec.Lambda_ell + ellipticity_tol:
        raise SolverError(
            f"effective matrix spectrum [{eigs.min():.6g}, {eigs.max():.6g}] escapes "
            f"the ellipticity interval [{spec.lambda_ell:.6g}, {spec.Lambda_ell:.6g}]"
        )
    return EffectiveLinear(
        a_bar=a_bar,
        b_bar=np.array([sol.gamma for sol in correctors.eta]),
        c_bar=correctors.nu.gamma,
        a_bar_klm=np.array(
            [[[correctors.chi3[(k, l, m)].gamma for m in range(d)]
              for l in range(d)] for k in range(d)]
        ),
        b_bar_kl=np.array(
            [[correctors.eta2[(k, l)].gamma for l in range(d)] for k in range(d)]
        ),
        c_bar_k=np.array([sol.gamma for sol in correctors.nu1]),
        d_bar=correctors.xi.gamma,
        asymmetry_defect=defect,
    )


def effective_nonlinear(spec: BellmanSpec, M, grid: PeriodicGrid, tol=1e-10) -> float:
    """F_bar(M): the ergodic constant of the nonlinear cell problem at M."""
    sol, _ = solve_nonlinear_cell(spec, M, grid, tol=tol)
    return sol.gamma


def linearize_effective(spec: BellmanSpec, M, grid: PeriodicGrid, step=None,
                        tol=1e-10) -> np.ndarray:
    """Centered-difference derivative matrix of F_bar at M, symmetrized.

    Entries satisfy F_bar(M + tY) ~ F_bar(M) + t * sum_ij a_ij Y_ij for
    symmetric Y.
    """
    d = spec.dim
    M = np.asarray(M, dtype=float).reshape(d, d)
    if step is None:
        step = 1e-4 * (1.0 + np.linalg.norm(M))
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            E = np.zeros((d, d))
            E[i, j] = E[j, i] = 1.0
            fp = effective_nonlinear(spec, M + step * E, grid, tol=tol)
            fm = effective_nonlinear(spec, M - step * E, grid, tol=tol)
            g = (fp - fm) / (2.0 * step)
            if not np.isfinite(g):
                raise SolverError("nonfinite derivative of the effective map")
            if i == j:
                out[i, i] = g
            else:
                # perturbing both symmetric entries doubles the sensitivity
                out[i, j] = out[j, i] = 0.5 * g
    return out
