"""Plane wave on the 2pi-periodic torus against its closed-form phase.

u0 = exp(i x), v0 = 0, kappa = lambda = 1.  The solution stays a plane wave
with phase theta(t) = -2t + 1 - exp(-t), so the stepper error is roundoff.
"""
import math

import numpy as np

from sdebye import SDParams, SDState, Torus, eigenmode, evolve, synthesize

m = Torus.square(8)
u0 = eigenmode(m, (1, 0), math.sqrt(m.volume))
x = m.nodes[0]

print(f"{'t':>6} {'theta exact':>14} {'sup error':>10}")


def show(state):
    if round(state.t * 1000) % 100:
        return
    theta = -2 * state.t + 1 - math.exp(-state.t)
    err = np.abs(synthesize(state.u).values - np.exp(1j * (x + theta))).max()
    print(f"{state.t:6.2f} {theta:14.10f} {err:10.2e}")


evolve(SDState(0.0, u0, m.grid_zeros()), 1e-3, 1000, SDParams(1.0, 1), observer=show)
