"""Independent reference computations used to derive frozen test values.

Nothing here touches the transforms or steppers under test: ODE reductions
go through ``scipy.integrate.solve_ivp``, Fourier sums are evaluated term
by term and spherical harmonics come from ``scipy.special``.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import sph_harm_y


def plane_wave_phase(t_end, kappa=1.0, lam=1, mode_eig=1.0, v0=0.0, rho=1.0):
    """Phase of a single-mode solution: theta' = -mode_eig - v, kappa v' = lam*rho - v."""

    def rhs(t, y):
        theta, v = y
        return [-mode_eig - v, (lam * rho - v) / kappa]

    sol = solve_ivp(rhs, (0.0, t_end), [0.0, v0], rtol=1e-13, atol=1e-15, method="DOP853")
    return sol.y[0, -1], sol.y[1, -1]


def scalar_debye(u0, v0, tau, kappa, lam):
    """Spatially constant data with Laplacian dropped, integrated as a real ODE system."""

    def rhs(t, y):
        u = y[0] + 1j * y[1]
        v = y[2]
        du = -1j * u * v
        return [du.real, du.imag, (lam * abs(u) ** 2 - v) / kappa]

    sol = solve_ivp(rhs, (0.0, tau), [u0.real, u0.imag, v0], rtol=1e-13, atol=1e-15,
                    method="DOP853")
    return complex(sol.y[0, -1], sol.y[1, -1]), sol.y[2, -1]


def constant_forcing_memory(t, kappa=1.0, lam=1):
    """v with |u|^2 = 1 and v0 = 0."""
    sol = solve_ivp(lambda s, y: [(lam - y[0]) / kappa], (0.0, t), [0.0], rtol=1e-13, atol=1e-15)
    return sol.y[0, -1]


def torus_sum(coeffs, periods, cutoff, points):
    """Evaluate sum_m c_m exp(i k.x)/sqrt(vol) at arbitrary points, term by term."""
    periods = np.asarray(periods, dtype=float)
    vol = np.prod(periods)
    out = np.zeros(len(points), dtype=complex)
    for idx in np.ndindex(*coeffs.shape):
        m = np.array(idx) - cutoff
        k = 2 * np.pi * m / periods
        out += coeffs[idx] * np.exp(1j * points @ k)
    return out / np.sqrt(vol)


def sphere_sum(coeffs, cutoff, theta, phi, radius=1.0):
    """Evaluate sum_lm c_lm Y_lm(theta, phi)/r with scipy's harmonics."""
    out = np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
    for l in range(cutoff + 1):
        for m in range(-l, l + 1):
            out += coeffs[l, m + cutoff] * sph_harm_y(l, m, theta, phi)
    return out / radius
