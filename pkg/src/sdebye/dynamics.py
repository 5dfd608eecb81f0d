"""Time evolution of the Schrodinger-Debye system.

    i u_t + Delta u = u v,        kappa v_t + v = lambda |u|^2

``u`` is complex and kept spectrally; ``v`` is real and kept on the
quadrature grid, where its equation is a pointwise ODE.

Sign conventions, fixed once here:

* the free flow ``S(t) = exp(i t Delta)`` multiplies the coefficient of an
  eigenfunction with ``-Delta e = mu e`` by ``exp(-i t mu)``;
* the nonlinear flow ``i u_t = u v`` is ``u <- u exp(-i Theta)`` with
  ``Theta = int v dt``.

With ``Delta`` dropped, ``|u|^2`` is constant in time at every node, so the
nonlinear/relaxation substep has the closed form used by :func:`debye_flow`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .manifold import GridField, Manifold, SpectralField, sobolev_norm

__all__ = [
    "SDParams",
    "SDState",
    "Trajectory",
    "PicardResult",
    "debye_flow",
    "nonlinear_substep",
    "linear_substep",
    "strang_step",
    "nls_step",
    "evolve",
    "evolve_nls",
    "free_trajectory",
    "debye_memory",
    "duhamel_map",
    "xt_norm",
    "xt_distance",
    "picard_iterate",
    "existence_time",
]

V_IMAG_TOL = 1e-12


@dataclass(frozen=True)
class SDParams:
    kappa: float = 1.0
    lam: int = 1

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.lam not in (-1, 1):
            raise ValueError(f"lambda must be -1 or +1, got {self.lam}")
        object.__setattr__(self, "lam", int(self.lam))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def focusing(self) -> bool:
        return self.lam == -1

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "lambda": self.lam}


@dataclass(frozen=True, eq=False)
class SDState:
    """Snapshot ``(t, u, v)``; ``v`` must be real up to ``1e-12``."""

    t: float
    u: SpectralField
    v: GridField

    def __post_init__(self):
        if self.u.manifold != self.v.manifold:
            raise ValueError("u and v live on different manifolds")
        if self.t < 0:
            raise ValueError("time must be nonnegative")
        if np.max(np.abs(self.v.values.imag), initial=0.0) > V_IMAG_TOL:
            raise ValueError("v has a non-negligible imaginary part")

    @property
    def manifold(self) -> Manifold:
        return self.u.manifold

    @classmethod
    def from_arrays(cls, manifold: Manifold, t: float, coeffs, v_values) -> "SDState":
        return cls(float(t), SpectralField(manifold, coeffs), GridField(manifold, v_values))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform time grid with stacked ``u`` coefficients and optional ``v`` values."""

    manifold: Manifold
    times: np.ndarray
    coeffs: np.ndarray
    v: np.ndarray | None = None
    params: SDParams | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("time grid must be a non-empty 1-D array")
        if t.size > 1:
            steps = np.diff(t)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-12 * max(1.0, abs(t[-1])):
                raise ValueError("time grid must be increasing with uniform spacing")
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (t.size, *self.manifold.coeff_shape):
            raise ValueError("coefficient stack does not match the time grid and manifold")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coeffs", c)
        if self.v is not None:
            v = np.asarray(self.v, dtype=float)
            if v.shape != (t.size, *self.manifold.grid_shape):
                raise ValueError("v stack does not match the time grid and manifold")
            object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    def u(self, i: int) -> SpectralField:
        return SpectralField(self.manifold, self.coeffs[i])

    def state(self, i: int) -> SDState:
        if self.v is None:
            raise ValueError("trajectory carries no v snapshots")
        return SDState.from_arrays(self.manifold, self.times[i], self.coeffs[i], self.v[i])

    def grid_values(self) -> np.ndarray:
        return self.manifold._synthesize(self.coeffs)

    def with_coeffs(self, coeffs: np.ndarray) -> "Trajectory":
        return Trajectory(self.manifold, self.times, coeffs, None, self.params)


# --- substeps ----------------------------------------------------------------


def debye_flow(u: np.ndarray, v: np.ndarray, tau: float, params: SDParams):
    """Exact solution of ``i u_t = u v``, ``kappa v_t + v = lambda |u|^2`` at every node.

    Works on raw grid arrays and returns ``(u(tau), v(tau))``.  ``|u|`` is
    left untouched up to the rounding of a unit-modulus phase factor.
    """
    kappa, lam = params.kappa, params.lam
    a = -math.expm1(-tau / kappa)
    rho = np.abs(u) ** 2
    v_new = (1.0 - a) * v + lam * rho * a
    theta = kappa * a * v + lam * rho * (tau - kappa * a)
    return u * np.exp(-1j * theta), v_new


def _free_phase(manifold: Manifold, tau: float) -> np.ndarray:
    return np.where(manifold.mode_mask, np.exp(-1j * tau * manifold.eigenvalues), 0.0)


def _nonlinear(manifold, c, v, tau, params):
    u, v = debye_flow(manifold._synthesize(c), v, tau, params)
    return manifold._analyze(u), v


def nonlinear_substep(state: SDState, tau: float, params: SDParams) -> SDState:
    """Advance the relaxation/phase part by ``tau`` and re-project ``u``.

    The clock is not advanced.
    """
    c, v = _nonlinear(state.manifold, state.u.coeffs, state.v.values.real, tau, params)
    return SDState.from_arrays(state.manifold, state.t, c, v)


def linear_substep(u: SpectralField, tau: float) -> SpectralField:
    """Free Schrodinger flow ``S(tau)`` on the truncated space."""
    return SpectralField(u.manifold, u.coeffs * _free_phase(u.manifold, tau))


def _strang(manifold, c, v, dt, params, phase):
    c, v = _nonlinear(manifold, c, v, 0.5 * dt, params)
    c = c * phase
    return _nonlinear(manifold, c, v, 0.5 * dt, params)


def strang_step(state: SDState, dt: float, params: SDParams) -> SDState:
    """Half nonlinear, full free, half nonlinear; advances ``t`` by ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = state.manifold
    c, v = _strang(m, state.u.coeffs, state.v.values.real, dt, params, _free_phase(m, dt))
    return SDState.from_arrays(m, state.t + dt, c, v)


def _nls_half(manifold, c, tau, lam):
    u = manifold._synthesize(c)
    return manifold._analyze(u * np.exp(-1j * lam * tau * np.abs(u) ** 2))


def nls_step(u: SpectralField, dt: float, lam: int) -> SpectralField:
    """One Strang step of ``i u_t + Delta u = lambda |u|^2 u``."""
    m = u.manifold
    c = _nls_half(m, u.coeffs, 0.5 * dt, lam) * _free_phase(m, dt)
    return SpectralField(m, _nls_half(m, c, 0.5 * dt, lam))


def _check_steps(dt, n_steps, record_every):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 0 or record_every < 1:
        raise ValueError("n_steps must be >= 0 and record_every >= 1")


def evolve(
    state: SDState,
    dt: float,
    n_steps: int,
    params: SDParams,
    record_every: int = 1,
    observer: Callable[[SDState], None] | None = None,
    keep_v: bool = True,
) -> Trajectory:
    """Run ``n_steps`` Strang steps.

    Snapshots are kept every ``record_every`` steps (always including the
    start).  ``observer`` sees every state, recorded or not, which lets
    diagnostics run without storing the whole history.
    """
    _check_steps(dt, n_steps, record_every)
    m = state.manifold
    phase = _free_phase(m, dt)
    c, v = state.u.coeffs, state.v.values.real.copy()
    times, cs, vs = [state.t], [c], [v]
    if observer is not None:
        observer(state)
    for k in range(1, n_steps + 1):
        c, v = _strang(m, c, v, dt, params, phase)
        t = state.t + k * dt
        if observer is not None:
            observer(SDState.from_arrays(m, t, c, v))
        if k % record_every == 0:
            times.append(t)
            cs.append(c)
            vs.append(v)
    return Trajectory(m, np.array(times), np.stack(cs), np.stack(vs) if keep_v else None, params)


def evolve_nls(u0: SpectralField, dt: float, n_steps: int, lam: int,
               record_every: int = 1) -> Trajectory:
    """Cubic NLS reference run, the formal ``kappa -> 0`` limit."""
    _check_steps(dt, n_steps, record_every)
    m = u0.manifold
    phase = _free_phase(m, dt)
    c = u0.coeffs
    times, cs = [0.0], [c]
    for k in range(1, n_steps + 1):
        c = _nls_half(m, _nls_half(m, c, 0.5 * dt, lam) * phase, 0.5 * dt, lam)
        if k % record_every == 0:
            times.append(k * dt)
            cs.append(c)
    return Trajectory(m, np.array(times), np.stack(cs))


# --- integral formulation ------------------------------------------------------


def free_trajectory(u0: SpectralField, times: np.ndarray) -> Trajectory:
    """``t -> S(t) u0`` sampled on ``times``."""
    m = u0.manifold
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * times[:, None] * m.eigenvalues.reshape(1, -1)).reshape(
        (times.size, *m.coeff_shape))
    return Trajectory(m, times, u0.coeffs[None] * phases * m.mode_mask)


def _memory(u_grid: np.ndarray, v0: np.ndarray, dt: float, params: SDParams) -> np.ndarray:
    decay = math.exp(-dt / params.kappa)
    gain = params.lam / params.kappa * 0.5 * dt
    rho = np.abs(u_grid) ** 2
    out = np.empty(rho.shape)
    out[0] = v0
    for j in range(rho.shape[0] - 1):
        out[j + 1] = decay * out[j] + gain * (decay * rho[j] + rho[j + 1])
    return out


def debye_memory(u_traj: Trajectory, v0: GridField, params: SDParams) -> list[GridField]:
    """``v`` along a given ``u`` history from the explicit Debye formula.

    ``v(t) = e^{-t/kappa} v0 + (lambda/kappa) int_0^t e^{-(t-l)/kappa} |u(l)|^2 dl``
    with the memory integral advanced by the trapezoid rule on the
    trajectory grid.
    """
    if v0.manifold != u_traj.manifold:
        raise ValueError("v0 and trajectory live on different manifolds")
    vals = _memory(u_traj.grid_values(), v0.values.real, u_traj.dt, params)
    return [GridField(u_traj.manifold, x) for x in vals]


def _duhamel(traj: Trajectory, u0: np.ndarray, v0: np.ndarray, params: SDParams) -> np.ndarray:
    m = traj.manifold
    u = traj.grid_values()
    v = _memory(u, v0, traj.dt, params)
    G = m._analyze(u * v)
    t = traj.times - traj.times[0]
    mu = m.eigenvalues[None]
    back = np.exp(1j * t.reshape(-1, *([1] * len(m.coeff_shape))) * mu)
    acc = cumulative_trapezoid(back * G, dx=traj.dt, axis=0, initial=0.0) if len(traj) > 1 \
        else np.zeros_like(G)
    return (u0[None] - 1j * acc) * np.conj(back) * m.mode_mask


def duhamel_map(u_traj: Trajectory, u0: SpectralField, v0: GridField,
                params: SDParams) -> Trajectory:
    """``Phi(u)(t) = S(t) u0 - i int_0^t S(t - l) P(u v)(l) dl`` on the trajectory grid.

    ``v`` is rebuilt from ``u`` by :func:`debye_memory`, so ``Phi`` depends on
    ``u`` alone.  Time integrals use the composite trapezoid rule.
    """
    if u0.manifold != u_traj.manifold or v0.manifold != u_traj.manifold:
        raise ValueError("initial data and trajectory live on different manifolds")
    return u_traj.with_coeffs(_duhamel(u_traj, u0.coeffs, v0.values.real, params))


def xt_norm(u_traj: Trajectory, s: float = 1.0, p: float = 4.0) -> float:
    """``max_t ||u(t)||_{H^s} + (int ||u(t)||_inf^p dt)^{1/p}`` on the time grid."""
    if not p > 2:
        raise ValueError("p must exceed 2")
    power = (1.0 + u_traj.manifold.eigenvalues) ** s
    hs = np.sqrt(np.sum(power * np.abs(u_traj.coeffs) ** 2,
                        axis=tuple(range(1, u_traj.coeffs.ndim))))
    if len(u_traj) < 2:
        return float(hs.max())
    u = np.abs(u_traj.grid_values())
    sup = u.reshape(len(u_traj), -1).max(axis=1)
    return float(hs.max() + trapezoid(sup**p, u_traj.times) ** (1.0 / p))


def xt_distance(a: Trajectory, b: Trajectory, s: float = 1.0, p: float = 4.0) -> float:
    if a.manifold != b.manifold or not np.array_equal(a.times, b.times):
        raise ValueError("trajectories are not on the same grid")
    return xt_norm(a.with_coeffs(a.coeffs - b.coeffs), s, p)


# --- Picard iteration ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PicardResult:
    trajectory: Trajectory
    distances: list[float]
    rho: float
    iterations: int
    converged: bool
    radius: float
    T: float
    max_xt_norm: float
    diverged: bool = False
    s: float = 1.0
    p: float = 4.0

    @property
    def in_ball(self) -> bool:
        return self.max_xt_norm <= self.radius

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "n_grid": len(self.trajectory) - 1,
            "s": self.s,
            "p": self.p,
            "iterations": self.iterations,
            "converged": self.converged,
            "diverged": self.diverged,
            "rho": self.rho,
            "distances": list(self.distances),
            "radius": self.radius,
            "max_xt_norm": self.max_xt_norm,
            "in_ball": self.in_ball,
        }


def contraction_factor(distances: Sequence[float], tail: int = 5) -> float:
    """Geometric mean of the last ``tail`` ratios of successive distances."""
    d = [x for x in distances if x > 0]
    if len(distances) >= 2 and distances[-1] == 0 and distances[-2] > 0:
        return 0.0
    ratios = [b / a for a, b in zip(d[:-1], d[1:])][-tail:]
    if not ratios:
        return 0.0
    with np.errstate(divide="ignore"):
        return float(np.exp(np.mean(np.log(ratios))))


def picard_iterate(
    u0: SpectralField,
    v0: GridField,
    params: SDParams,
    T: float,
    n_grid: int = 64,
    max_iter: int = 50,
    tol: float = 1e-12,
    s: float = 1.0,
    p: float = 4.0,
    C: float = 1.0,
) -> PicardResult:
    """Iterate the Duhamel map from the free solution on ``n_grid`` intervals of ``[0, T]``.

    The ball radius is ``R = 2 C ||u0||_{H^s}``; ``C`` has no computable
    value and defaults to 1, so ``in_ball`` is informational.  Iteration
    stops when the ``X_T`` distance between successive iterates drops to
    ``tol``, when it stops being finite or grows past ``1e6`` times its
    first value.
    """
    if not 0 < T <= 1:
        raise ValueError("T must lie in (0, 1]")
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")
    times = np.linspace(0.0, T, n_grid + 1)
    u = free_trajectory(u0, times)
    v0v = v0.values.real
    radius = 2.0 * C * sobolev_norm(u0, s)
    distances: list[float] = []
    max_norm = xt_norm(u, s, p)
    diverged = False
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = u.with_coeffs(_duhamel(u, u0.coeffs, v0v, params)) \
                if np.all(np.isfinite(u.coeffs)) else None
        if nxt is None or not np.all(np.isfinite(nxt.coeffs)):
            diverged = True
            break
        d = xt_distance(nxt, u, s, p)
        distances.append(d)
        u = nxt
        max_norm = max(max_norm, xt_norm(u, s, p))
        if d <= tol:
            break
        if not math.isfinite(d) or d > 1e6 * max(distances[0], tol):
            diverged = True
            break
    rho = math.inf if diverged else contraction_factor(distances)
    converged = bool(distances) and distances[-1] <= tol and rho < 1 and not diverged
    return PicardResult(u, distances, rho, len(distances), converged, radius, T,
                        max_norm, diverged, s, p)


def existence_time(
    u0: SpectralField,
    v0: GridField,
    params: SDParams,
    T_grid: Sequence[float] = tuple(np.round(np.arange(1, 11) / 10, 10)),
    **picard_kw,
) -> tuple[float, list[dict]]:
    """Largest grid ``T`` such that Picard contracts on every grid horizon up to it.

    Scanning stops at the first failure; returns ``(T_star, rows)`` with
    ``T_star = 0`` when even the smallest horizon fails.
    """
    rows = []
    t_star = 0.0
    for T in sorted(T_grid):
        r = picard_iterate(u0, v0, params, float(T), **picard_kw)
        rows.append({"T": float(T), "rho": r.rho, "converged": r.converged,
                     "iterations": r.iterations})
        if not r.converged:
            break
        t_star = float(T)
    return t_star, rows
