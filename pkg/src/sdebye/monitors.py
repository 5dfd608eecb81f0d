"""Per-step diagnostics and checks of the identities and bounds solutions obey.

All ``u`` integrals are taken with the native quadrature of the run grid.
For the spatially discretised system this makes the pseudo-energy identity

    d/dt (int |grad u|^2 + int |u|^2 v) = (1/kappa)(-int |u|^2 v + lambda int |u|^4)

hold exactly, so the residuals below measure time-stepping error only.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dynamics import SDParams, SDState, Trajectory
from .inequalities import GNConstants
from .manifold import GridField, SpectralField, sobolev_norm

__all__ = [
    "CSV_COLUMNS",
    "DiagnosticsRow",
    "DiagnosticsRecorder",
    "InitialNorms",
    "BoundCheckReport",
    "diagnostics",
    "trajectory_diagnostics",
    "identity_residual",
    "integrated_identity_residual",
    "relative_mass_drift",
    "apriori_horizon",
    "apriori_check",
    "growth_envelope_check",
    "v_bounds_check",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
]

CSV_COLUMNS = (
    "t", "mass", "grad_sq", "coupling", "pseudo_energy", "l4_4", "h1_sq",
    "v_l2", "v_linf", "theta_running", "identity_residual",
)
SLACK_RTOL = 1e-9


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    mass: float
    grad_sq: float
    coupling: float
    pseudo_energy: float
    l4_4: float
    h1_sq: float
    v_l2: float
    v_linf: float
    theta_running: float
    # grid sup of |u|; feeds the v bound, not part of the CSV
    u_linf: float = math.nan


def diagnostics(state: SDState, theta_prev: float = 0.0) -> DiagnosticsRow:
    """Quadrature diagnostics of one state.

    ``theta_running`` is ``max(theta_prev, sqrt(h1_sq))``; pass the previous
    row's value to keep a running supremum.
    """
    m = state.manifold
    w = m.weights
    c = state.u.coeffs
    rho = np.abs(m._synthesize(c)) ** 2
    v = state.v.values.real
    mass = float(np.sum(np.abs(c) ** 2))
    grad = float(np.sum(m.eigenvalues * np.abs(c) ** 2))
    coupling = float(np.sum(w * rho * v))
    h1 = mass + grad
    return DiagnosticsRow(
        t=float(state.t),
        mass=mass,
        grad_sq=grad,
        coupling=coupling,
        pseudo_energy=grad + coupling,
        l4_4=float(np.sum(w * rho**2)),
        h1_sq=h1,
        v_l2=float(np.sqrt(np.sum(w * v**2))),
        v_linf=float(np.max(np.abs(v))),
        theta_running=max(theta_prev, math.sqrt(h1)),
        u_linf=float(np.sqrt(rho.max())),
    )


class DiagnosticsRecorder:
    """Observer for :func:`sdebye.dynamics.evolve` that collects rows."""

    def __init__(self):
        self.rows: list[DiagnosticsRow] = []

    def __call__(self, state: SDState) -> None:
        prev = self.rows[-1].theta_running if self.rows else 0.0
        self.rows.append(diagnostics(state, prev))


def trajectory_diagnostics(traj: Trajectory) -> list[DiagnosticsRow]:
    rec = DiagnosticsRecorder()
    for i in range(len(traj)):
        rec(traj.state(i))
    return rec.rows


def _column(rows: Sequence[DiagnosticsRow], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in rows], dtype=float)


def _uniform_dt(t: np.ndarray) -> float:
    steps = np.diff(t)
    if steps.size == 0 or np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise ValueError("diagnostics rows are not on a uniform time grid")
    return float(steps.mean())


def _rhs(rows, params: SDParams) -> np.ndarray:
    return (-_column(rows, "coupling") + params.lam * _column(rows, "l4_4")) / params.kappa


def identity_residual(rows: Sequence[DiagnosticsRow], params: SDParams) -> np.ndarray:
    """Central-difference residual of the pseudo-energy identity at interior rows."""
    if len(rows) < 3:
        raise ValueError("need at least three rows")
    dt = _uniform_dt(_column(rows, "t"))
    pe = _column(rows, "pseudo_energy")
    return (pe[2:] - pe[:-2]) / (2 * dt) - _rhs(rows, params)[1:-1]


def integrated_identity_residual(rows: Sequence[DiagnosticsRow], params: SDParams) -> np.ndarray:
    """``E(t) - E(0) - int_0^t rhs`` with the trapezoid rule, one value per row."""
    t = _column(rows, "t")
    _uniform_dt(t)
    pe = _column(rows, "pseudo_energy")
    return pe - pe[0] - cumulative_trapezoid(_rhs(rows, params), t, initial=0.0)


def relative_mass_drift(rows: Sequence[DiagnosticsRow]) -> float:
    mass = _column(rows, "mass")
    if mass[0] == 0:
        return float(np.max(mass))
    return float(np.max(np.abs(mass - mass[0])) / mass[0])


# --- bound checks ---------------------------------------------------------------


@dataclass(frozen=True)
class InitialNorms:
    u_l2: float
    u_h1: float
    v_l2: float
    v_linf: float
    v_min: float

    @classmethod
    def of(cls, u0: SpectralField, v0: GridField) -> "InitialNorms":
        v = v0.values.real
        w = v0.manifold.weights
        return cls(
            u_l2=sobolev_norm(u0, 0.0),
            u_h1=sobolev_norm(u0, 1.0),
            v_l2=float(np.sqrt(np.sum(w * v**2))),
            v_linf=float(np.max(np.abs(v))),
            v_min=float(np.min(v)),
        )


@dataclass
class BoundCheckReport:
    bound: str
    horizon: float
    times: list[float]
    slack: list[float]
    min_slack: float
    tolerance: float
    passed: bool
    constants: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _constants_of(C) -> tuple[float, dict]:
    if isinstance(C, GNConstants):
        return C.C, {"C": C.C, "A": C.A, "B": C.B, "gn_seed": C.seed,
                     "gn_holdout_seed": C.holdout_seed, "gn_n_fit": C.n_fit,
                     "gn_n_holdout": C.n_holdout}
    return float(C), {"C": float(C), "source": "user supplied"}


def _report(name, t, bound, quantity, horizon, constants, note=""):
    slack = np.asarray(bound, dtype=float) - np.asarray(quantity, dtype=float)
    scale = float(np.max(np.abs(bound), initial=0.0))
    tol = SLACK_RTOL * scale
    if slack.size == 0:
        return BoundCheckReport(name, horizon, [], [], math.nan, tol, False, constants,
                                note or "empty admissible horizon")
    min_slack = float(slack.min())
    return BoundCheckReport(name, horizon, [float(x) for x in t], [float(x) for x in slack],
                            min_slack, tol, bool(min_slack >= -tol), constants, note)


def apriori_horizon(norms: InitialNorms, C: float, kappa: float) -> float:
    """``min(1, kappa / (12 C ||u0||^2))``."""
    denom = 12.0 * C * norms.u_l2**2
    return 1.0 if denom == 0 else min(1.0, kappa / denom)


def apriori_check(rows: Sequence[DiagnosticsRow], norms: InitialNorms, C,
                  kappa: float) -> BoundCheckReport:
    """``||u(t)||_{H^1}^2 <= 2||u0||_{H^1}^2 + 18 C ||u0||^2 ||v0||^2`` up to the admissible horizon."""
    c, consts = _constants_of(C)
    T = apriori_horizon(norms, c, kappa)
    bound_value = 2 * norms.u_h1**2 + 18 * c * norms.u_l2**2 * norms.v_l2**2
    t = _column(rows, "t")
    keep = t <= T * (1 + 1e-12)
    consts = {**consts, "kappa": kappa, "bound": bound_value}
    return _report("apriori_h1", t[keep], np.full(keep.sum(), bound_value),
                   _column(rows, "h1_sq")[keep], T, consts,
                   "" if T > 0 else "empty admissible horizon")


def growth_envelope_check(rows: Sequence[DiagnosticsRow], norms: InitialNorms, C,
                          params: SDParams) -> BoundCheckReport:
    """``||u(t)||_{H^1}^2 <= C0 exp(A0 t)`` for defocusing runs with ``v0 >= 0`` and ``kappa = 1``.

    ``A0 = C ||u0||^2`` and
    ``C0 = ||u0||_{H^1}^2 + (A0/2) ||v0|| + (||u0||_{H^1}^2 / 2) ||v0||``.
    """
    if params.lam != 1:
        raise ValueError("growth envelope requires lambda = +1")
    if params.kappa != 1.0:
        raise ValueError("growth envelope requires kappa = 1")
    if norms.v_min < 0:
        raise ValueError("growth envelope requires v0 >= 0")
    c, consts = _constants_of(C)
    A0 = c * norms.u_l2**2
    h1 = norms.u_h1**2
    C0 = h1 + 0.5 * A0 * norms.v_l2 + 0.5 * h1 * norms.v_l2
    t = _column(rows, "t")
    return _report("growth_envelope", t, C0 * np.exp(A0 * t), _column(rows, "h1_sq"),
                   float(t[-1]) if t.size else 0.0, {**consts, "A0": A0, "C0": C0})


def v_bounds_check(rows: Sequence[DiagnosticsRow], v0_linf: float, kappa: float,
                   p: float = 4.0, u_traj: Trajectory | None = None) -> BoundCheckReport:
    """``||v(t)||_inf <= ||v0||_inf + (1/kappa) ||u||^2_{L^p(0,t; L^inf)} t^{1-2/p}``.

    ``||u(t)||_inf`` comes from the rows, or from ``u_traj`` when given; the
    time integral is the trapezoid rule up to each row.  Both sups are grid
    maxima.
    """
    if not p > 2:
        raise ValueError("p must exceed 2")
    t = _column(rows, "t")
    if u_traj is not None:
        if not np.allclose(u_traj.times, t, rtol=0, atol=1e-12):
            raise ValueError("trajectory and rows are on different time grids")
        u_inf = np.abs(u_traj.grid_values()).reshape(len(u_traj), -1).max(axis=1)
    else:
        u_inf = _column(rows, "u_linf")
    lp = cumulative_trapezoid(u_inf**p, t, initial=0.0) ** (2.0 / p)
    bound = v0_linf + lp * t ** (1.0 - 2.0 / p) / kappa
    return _report("v_linf", t, bound, _column(rows, "v_linf"),
                   float(t[-1]) if t.size else 0.0, {"kappa": kappa, "p": p, "v0_linf": v0_linf},
                   "sup norms are grid maxima")


# --- CSV ------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diagnostics_csv(rows: Sequence[DiagnosticsRow], path, params: SDParams) -> Path:
    """One line per row; ``identity_residual`` is blank at the two endpoints."""
    path = Path(path)
    res = identity_residual(rows, params) if len(rows) >= 3 else np.array([])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i, r in enumerate(rows):
            vals = [_fmt(getattr(r, name)) for name in CSV_COLUMNS[:-1]]
            inner = 1 <= i <= len(rows) - 2 and res.size
            vals.append(_fmt(res[i - 1]) if inner else "")
            w.writerow(vals)
    return path


def read_diagnostics_csv(path) -> dict[str, np.ndarray]:
    """Columns as float arrays; blank cells become NaN."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        data = {k: [] for k in reader.fieldnames}
        for line in reader:
            for k, x in line.items():
                data[k].append(float(x) if x != "" else math.nan)
    return {k: np.array(v) for k, v in data.items()}
