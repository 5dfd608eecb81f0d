"""Mass and the pseudo-energy identity on smooth random data.

The mass is conserved to roundoff.  The identity residual is pure
time-stepping error, so halving dt should divide it by about four.
"""
import numpy as np

from sdebye import SDParams, SDState, Torus, evolve
from sdebye.inequalities import random_field, sample_rng
from sdebye.manifold import GridField, synthesize
from sdebye.monitors import (
    DiagnosticsRecorder,
    identity_residual,
    integrated_identity_residual,
    relative_mass_drift,
)

m = Torus.square(16)
params = SDParams(1.0, 1)
u0 = random_field(m, sample_rng(3, 0), decay=3, max_mode=6) * 2.0
v0 = GridField(m, np.abs(synthesize(random_field(m, sample_rng(3, 1), decay=3, max_mode=6)).values) ** 2)

print(f"{'dt':>8} {'mass drift':>11} {'max resid':>11} {'integrated':>11} {'ratio':>6}")
prev = None
for dt in (4e-3, 2e-3, 1e-3, 5e-4):
    rec = DiagnosticsRecorder()
    evolve(SDState(0.0, u0, v0), dt, int(round(1 / dt)), params, observer=rec, keep_v=False)
    res = np.abs(identity_residual(rec.rows, params)).max()
    integ = np.abs(integrated_identity_residual(rec.rows, params)).max()
    ratio = f"{prev / res:6.3f}" if prev else ""
    print(f"{dt:8.0e} {relative_mass_drift(rec.rows):11.2e} {res:11.3e} {integ:11.3e} {ratio}")
    prev = res
