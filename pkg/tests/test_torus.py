import numpy as np
import pytest
from scipy import sparse
from scipy.integrate import quad
from scipy.linalg import null_space

import ergodica as eg
from ergodica.torus import ANCHOR, MEAN_ZERO, assemble_torus_diffusion


def harmonic_mean(a, lo=0.0, hi=1.0):
    return 1.0 / quad(lambda y: 1.0 / a(y), lo, hi, limit=200)[0]


class TestCellSolve1D:
    def test_harmonic_mean_gamma(self):
        # a(y) D^2 chi + a(y) = gamma has gamma = harmonic mean of a
        field = eg.sin_field_1d(delta=0.5)
        grid = eg.PeriodicGrid(1, 512)
        A = assemble_torus_diffusion(field, grid)
        avals = field.a(grid.points())[:, 0, 0]
        sol = eg.solve_cell(A, avals, grid=grid)
        exact = harmonic_mean(lambda y: 1 + 0.5 * np.sin(2 * np.pi * y))
        assert sol.gamma == pytest.approx(exact, abs=1e-10)
        assert sol.gamma == pytest.approx(np.sqrt(3) / 2, abs=1e-10)

    def test_gamma_is_weighted_mean_of_data(self):
        # for a D^2 chi + f = gamma: gamma = int(f/a) / int(1/a)
        field = eg.sin_field_1d(delta=0.4)
        grid = eg.PeriodicGrid(1, 512)
        A = assemble_torus_diffusion(field, grid)
        y = grid.points()[:, 0]
        f = 0.2 + 0.7 * np.cos(2 * np.pi * y) ** 2
        sol = eg.solve_cell(A, f, grid=grid)
        a = lambda t: 1 + 0.4 * np.sin(2 * np.pi * t)
        fa = quad(lambda t: (0.2 + 0.7 * np.cos(2 * np.pi * t) ** 2) / a(t),
                  0, 1, limit=200)[0]
        ia = quad(lambda t: 1.0 / a(t), 0, 1, limit=200)[0]
        assert sol.gamma == pytest.approx(fa / ia, abs=1e-9)

    def test_drift_data_has_zero_gamma(self):
        # f = b(y) = cos(2 pi y): integrand b/a is an exact derivative
        field = eg.sin_field_1d(delta=0.5, b_amp=1.0)
        grid = eg.PeriodicGrid(1, 512)
        A = assemble_torus_diffusion(field, grid)
        bvals = field.b(grid.points())[:, 0]
        sol = eg.solve_cell(A, bvals, grid=grid)
        assert abs(sol.gamma) < 1e-10

    def test_residual_and_normalizations(self):
        field = eg.sin_field_1d(delta=0.5)
        grid = eg.PeriodicGrid(1, 256)
        A = assemble_torus_diffusion(field, grid)
        f = field.a(grid.points())[:, 0, 0]
        anchored = eg.solve_cell(A, f, normalization=ANCHOR, grid=grid)
        mean0 = eg.solve_cell(A, f, normalization=MEAN_ZERO, grid=grid)
        assert anchored.chi.flat[0] == pytest.approx(0.0, abs=1e-14)
        assert np.mean(mean0.chi.flat) == pytest.approx(0.0, abs=1e-13)
        # same gamma, solutions differ by a constant
        assert anchored.gamma == pytest.approx(mean0.gamma, abs=1e-13)
        diff = anchored.chi.flat - mean0.chi.flat
        assert np.ptp(diff) < 1e-12
        assert anchored.residual < 1e-10

    def test_constant_coefficient_zero_corrector(self):
        field = eg.constant_field(1, 1.7)
        grid = eg.PeriodicGrid(1, 128)
        A = assemble_torus_diffusion(field, grid)
        sol = eg.solve_cell(A, np.full(128, 1.7), grid=grid)
        assert sol.gamma == pytest.approx(1.7, abs=1e-13)
        assert np.max(np.abs(sol.chi.flat)) < 1e-12

    def test_dense_nullspace_oracle(self):
        # gamma from the left Perron vector of the discrete operator, n=32
        field = eg.sin_field_1d(delta=0.5)
        grid = eg.PeriodicGrid(1, 32)
        A = assemble_torus_diffusion(field, grid)
        f = field.a(grid.points())[:, 0, 0]
        sol = eg.solve_cell(A, f, grid=grid)
        left = null_space(A.toarray().T)
        assert left.shape[1] == 1
        m = left[:, 0]
        gamma_oracle = (m @ f) / m.sum()
        assert sol.gamma == pytest.approx(gamma_oracle, abs=1e-11)


class TestCellSolve2D:
    def test_separable_diagonal(self):
        # separable diagonal a: each chi^kk depends on y_k only; gamma_kk is
        # the 1D harmonic mean of the corresponding diagonal entry
        field = eg.separable_sin_field_2d(delta=0.5)
        grid = eg.PeriodicGrid(2, 64)
        A = assemble_torus_diffusion(field, grid)
        avals = field.a(grid.points())
        sol00 = eg.solve_cell(A, avals[:, 0, 0], grid=grid)
        sol11 = eg.solve_cell(A, avals[:, 1, 1], grid=grid)
        hm = harmonic_mean(lambda y: 1 + 0.5 * np.sin(2 * np.pi * y))
        assert sol00.gamma == pytest.approx(hm, abs=1e-5)
        assert sol11.gamma == pytest.approx(hm, abs=1e-5)

    def test_offdiagonal_data_integrates_cleanly(self):
        field = eg.separable_sin_field_2d(delta=0.5)
        grid = eg.PeriodicGrid(2, 48)
        A = assemble_torus_diffusion(field, grid)
        y = grid.points()
        f = np.sin(2 * np.pi * y[:, 0]) * np.sin(2 * np.pi * y[:, 1])
        sol = eg.solve_cell(A, f, grid=grid)
        assert sol.residual < 1e-9

    def test_cross_term_monotonicity_guard(self):
        # |a12| > min(a11, a22) breaks the 7-point monotone stencil
        bad = eg.constant_field(2, np.array([[1.0, 1.5], [1.5, 3.0]]))
        grid = eg.PeriodicGrid(2, 16)
        with pytest.raises(eg.AssemblyError):
            assemble_torus_diffusion(bad, grid)

    def test_admissible_cross_term(self):
        field = eg.constant_field(2, np.array([[2.0, 0.5], [0.5, 1.0]]))
        grid = eg.PeriodicGrid(2, 32)
        A = assemble_torus_diffusion(field, grid)
        sol = eg.solve_cell(A, np.full(32 * 32, 0.5), grid=grid)
        assert sol.gamma == pytest.approx(0.5, abs=1e-11)
        assert np.max(np.abs(sol.chi.flat)) < 1e-10


class TestNonlinearCell:
    def test_constant_controls_pick_max(self):
        # constant a's: ergodic constant of max(a_beta * (M + w'')) is
        # max(a_beta * M) with w = 0
        bs = eg.BellmanSpec([
            eg.LinearOperatorSpec(eg.constant_field(1, 1.0), 1, 2),
            eg.LinearOperatorSpec(eg.constant_field(1, 2.0), 1, 2),
        ])
        grid = eg.PeriodicGrid(1, 64)
        sol, policy = eg.solve_nonlinear_cell(bs, np.array([[1.0]]), grid)
        assert sol.gamma == pytest.approx(2.0, abs=1e-11)
        assert set(policy.tolist()) == {1}
        sol, policy = eg.solve_nonlinear_cell(bs, np.array([[-1.0]]), grid)
        assert sol.gamma == pytest.approx(-1.0, abs=1e-11)
        assert set(policy.tolist()) == {0}

    def test_gamma_dominates_each_frozen_policy(self):
        # the optimal ergodic constant is the max over fixed controls
        bs = eg.BellmanSpec([
            eg.LinearOperatorSpec(eg.sin_field_1d(delta=0.5), 0.5, 1.5),
            eg.LinearOperatorSpec(eg.constant_field(1, 1.2), 0.5, 1.5),
        ])
        grid = eg.PeriodicGrid(1, 256)
        sol, _ = eg.solve_nonlinear_cell(bs, np.array([[1.0]]), grid)
        for ctl in bs.controls:
            A = assemble_torus_diffusion(ctl.field, grid)
            f = ctl.field.a(grid.points())[:, 0, 0]
            frozen = eg.solve_cell(A, f, grid=grid)
            assert sol.gamma >= frozen.gamma - 1e-9

    def test_positive_homogeneity(self):
        bs = eg.BellmanSpec([
            eg.LinearOperatorSpec(eg.sin_field_1d(delta=0.5), 0.5, 1.5),
            eg.LinearOperatorSpec(eg.constant_field(1, 1.2), 0.5, 1.5),
        ])
        grid = eg.PeriodicGrid(1, 256)
        g1, _ = eg.solve_nonlinear_cell(bs, np.array([[1.0]]), grid)
        g3, _ = eg.solve_nonlinear_cell(bs, np.array([[3.0]]), grid)
        assert g3.gamma == pytest.approx(3.0 * g1.gamma, abs=1e-8)

    def test_residual_within_tolerance(self):
        bs = eg.BellmanSpec([
            eg.LinearOperatorSpec(eg.sin_field_1d(delta=0.5), 0.5, 1.5),
            eg.LinearOperatorSpec(eg.constant_field(1, 1.2), 0.5, 1.5),
        ])
        grid = eg.PeriodicGrid(1, 256)
        sol, _ = eg.solve_nonlinear_cell(bs, np.array([[1.0]]), grid, tol=1e-10)
        assert sol.residual <= 1e-10


class TestGrids:
    def test_points_layout(self):
        g1 = eg.PeriodicGrid(1, 8)
        assert g1.points().shape == (8, 1)
        assert g1.points()[1, 0] == pytest.approx(1 / 8)
        g2 = eg.PeriodicGrid(2, 4)
        pts = g2.points()
        assert pts.shape == (16, 2)
        # row-major: second point advances the last axis
        assert np.allclose(pts[1], [0.0, 0.25])

    def test_gradient_matrices_accuracy(self):
        g = eg.PeriodicGrid(2, 64)
        D = eg.gradient_matrices(g)
        pts = g.points()
        f = np.sin(2 * np.pi * pts[:, 0]) * np.cos(2 * np.pi * pts[:, 1])
        d0 = 2 * np.pi * np.cos(2 * np.pi * pts[:, 0]) * np.cos(2 * np.pi * pts[:, 1])
        d1 = -2 * np.pi * np.sin(2 * np.pi * pts[:, 0]) * np.sin(2 * np.pi * pts[:, 1])
        assert np.max(np.abs(D[0] @ f - d0)) < 1e-4
        assert np.max(np.abs(D[1] @ f - d1)) < 1e-4
