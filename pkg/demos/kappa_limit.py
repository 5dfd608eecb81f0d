"""Schrodinger-Debye against cubic NLS as the delay kappa goes to zero.

v0 = lambda |u0|^2 so both systems start from the same equilibrium.
"""
import numpy as np

from sdebye import SDParams, SDState, Torus, evolve
from sdebye.dynamics import evolve_nls
from sdebye.inequalities import random_field, sample_rng
from sdebye.manifold import GridField, synthesize

m = Torus.square(16)
lam, dt, n = 1, 1e-3, 1000
u0 = random_field(m, sample_rng(9, 0), decay=3, max_mode=4)
v0 = GridField(m, lam * np.abs(synthesize(u0).values) ** 2)
ref = evolve_nls(u0, dt, n, lam)

print(f"{'kappa':>6} {'sup_t L2 distance':>18}")
for kappa in (1.0, 0.3, 0.1, 0.03, 0.01):
    tr = evolve(SDState(0.0, u0, v0), dt, n, SDParams(kappa, lam), keep_v=False)
    dist = np.sqrt(np.sum(np.abs(tr.coeffs - ref.coeffs) ** 2, axis=(1, 2))).max()
    print(f"{kappa:6.2f} {dist:18.4e}")
