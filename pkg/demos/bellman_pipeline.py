"""Homogenization of a convex Bellman (sup-form) eigenvalue problem.

Two controls: an oscillatory diffusion a_1 = 1 + 0.5 sin(2 pi y) and a
constant one a_2 = 1.2. The effective operator F_bar is convex and
positively 1-homogeneous, so in 1D it is pinned down by the two values
m_plus = F_bar(1) and kappa = -F_bar(-1). The principal eigenfunction is
concave, so the effective eigenvalue is kappa * pi^2 -- the homogenized
problem picks the *minimal* frozen-policy eigenvalue.
"""

import numpy as np

import ergodica as eg

bs = eg.BellmanSpec([
    eg.LinearOperatorSpec(eg.sin_field_1d(delta=0.5), 0.5, 1.5),
    eg.LinearOperatorSpec(eg.constant_field(1, 1.2), 0.5, 1.5),
])
tg = eg.PeriodicGrid(1, 512)

m_plus = eg.effective_nonlinear(bs, np.array([[1.0]]), tg)
kappa = -eg.effective_nonlinear(bs, np.array([[-1.0]]), tg)
print(f"F_bar(+1) = {m_plus:.9f}   (upper envelope: >= max(sqrt(3)/2, 1.2))")
print(f"F_bar(-1) = {-kappa:.9f}   -> kappa = {kappa:.9f}")
f3 = eg.effective_nonlinear(bs, np.array([[2.5]]), tg)
print(f"1-homogeneity: F_bar(2.5) = {f3:.9f} vs 2.5 F_bar(1) = "
      f"{2.5 * m_plus:.9f}")

# effective eigenvalue from the two-constant-control effective operator
grid = eg.DomainGrid.unit(1, 2048)
eff_bs = eg.BellmanSpec([
    eg.LinearOperatorSpec(eg.constant_field(1, m_plus), 0.5, 1.5),
    eg.LinearOperatorSpec(eg.constant_field(1, kappa), 0.5, 1.5),
])
eff_pair, _ = eg.principal_eigenpair_bellman(eff_bs, 1.0, grid)
print(f"\nlambda_bar = {eff_pair.lam:.9f}   (kappa pi^2 = "
      f"{kappa * np.pi ** 2:.9f})")

print(f"\n{'eps':>8} {'lambda_eps':>14} {'|err|':>10} {'residual':>10}")
for m in (8, 16, 32):
    eps = 1 / m
    pair, policy = eg.principal_eigenpair_bellman(bs, eps, grid)
    _, rep = eg.nonlinear_expansion(bs, eff_pair, eps, grid, tg, eff_pair.lam)
    print(f"{eps:8.5f} {pair.lam:14.9f} "
          f"{abs(pair.lam - eff_pair.lam):10.2e} "
          f"{rep['expansion_residual_interior']:10.2e}")

print("\nthe expansion residual F(x/eps, D^2(u + eps psi + eps^2 w2)) + "
      "lambda_bar u decays like eps,")
print("matching the second-order expansion built from the nonlinear cell "
      "problem and its linearization.")
