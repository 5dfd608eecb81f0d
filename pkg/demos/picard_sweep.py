"""Picard iteration of the Duhamel map and how the existence time shrinks.

For small data the iteration contracts geometrically.  Scaling the data up
makes the largest T on which it still converges smaller.
"""
import numpy as np

from sdebye import SDParams, Torus, picard_iterate, sobolev_norm
from sdebye.dynamics import existence_time
from sdebye.inequalities import random_field, sample_rng

m = Torus.square(16)
params = SDParams(1.0, 1)
f = random_field(m, sample_rng(5, 0), decay=3, max_mode=4)
u0 = f * (0.1 / sobolev_norm(f, 1))

res = picard_iterate(u0, m.grid_zeros(), params, 0.5, n_grid=64, tol=1e-14)
print("small data, ||u0||_H1 = 0.1, T = 0.5")
for k, d in enumerate(res.distances, 1):
    print(f"  iteration {k}: X_T distance {d:.3e}")
print(f"  converged={res.converged} rho={res.rho:.2e}\n")

print(f"{'scale':>6} {'||u0||_H1':>10} {'T*':>5}")
for scale in (100, 200, 400):
    u = u0 * scale
    t_star, _ = existence_time(u, m.grid_zeros(), params, n_grid=64, max_iter=60,
                               tol=1e-10 * max(sobolev_norm(u, 1), 1.0))
    print(f"{scale:6d} {sobolev_norm(u, 1):10.2f} {t_star:5.2f}")
