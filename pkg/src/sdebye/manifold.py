"""Functions on compact manifolds through the Laplace-Beltrami eigenbasis.

Two backends are provided:

* :class:`Torus` -- the flat torus ``R^d / (P_1 Z x ... x P_d Z)`` with
  ``d`` in {2, 3}, eigenfunctions ``exp(i k.x) / sqrt(vol)`` and a square
  mode cutoff ``|m_j| <= N``.
* :class:`Sphere2` -- the round 2-sphere of radius ``r``, orthonormal
  spherical harmonics ``Y_lm / r`` with triangular truncation ``l <= L``.

A function lives either as a :class:`SpectralField` (eigen-coefficients)
or as a :class:`GridField` (values at quadrature nodes).  The basis is
orthonormal, so every Parseval-type identity is weight free:
``||f||_{L^2}^2 = sum_k |c_k|^2``.

Quadrature grids are oversampled so that the product of two band-limited
fields is analysed without aliasing (3/2 rule): torus grids have at least
``3N + 1`` nodes per dimension, sphere grids at least ``ceil(3L/2) + 1``
Gauss-Legendre colatitudes and ``3L + 1`` longitudes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft

__all__ = [
    "Manifold",
    "Torus",
    "Sphere2",
    "SpectralField",
    "GridField",
    "manifold_from_dict",
    "analyze",
    "synthesize",
    "apply_multiplier",
    "sobolev_norm",
    "gradient_l2_sq",
    "lp_norm",
    "integrate",
    "multiply_dealiased",
    "resample",
    "eigenmode",
    "field_to_dict",
    "field_from_dict",
    "save_field",
    "load_field",
]


class Manifold:
    """Common interface of the two backends.

    Subclasses provide ``dim``, ``volume``, ``cutoff``, ``grid_shape``,
    ``coeff_shape``, ``eigenvalues``, ``mode_mask``, ``weights`` and the
    raw transforms ``_synthesize`` / ``_analyze``.
    """

    kind: str

    def with_cutoff(self, cutoff: int) -> "Manifold":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def zeros(self) -> "SpectralField":
        return SpectralField(self, np.zeros(self.coeff_shape, dtype=complex))

    def grid_zeros(self) -> "GridField":
        return GridField(self, np.zeros(self.grid_shape, dtype=complex))

    def constant(self, value: complex) -> "GridField":
        return GridField(self, np.full(self.grid_shape, value, dtype=complex))

    def _synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _analyze(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _min_grid(cutoff: int) -> int:
    return 3 * cutoff + 1


@dataclass(frozen=True)
class Torus(Manifold):
    """Flat torus with the given periods and per-dimension mode cap."""

    periods: tuple[float, ...]
    cutoff: int
    grid: tuple[int, ...] | None = None
    kind: str = field(default="torus", init=False)

    def __post_init__(self):
        periods = tuple(float(p) for p in self.periods)
        object.__setattr__(self, "periods", periods)
        if len(periods) not in (2, 3):
            raise ValueError(f"torus dimension must be 2 or 3, got {len(periods)}")
        if any(not (p > 0 and math.isfinite(p)) for p in periods):
            raise ValueError(f"torus periods must be positive, got {periods}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be a positive integer, got {self.cutoff}")
        object.__setattr__(self, "cutoff", int(self.cutoff))
        n_min = _min_grid(self.cutoff)
        if self.grid is None:
            n = scipy.fft.next_fast_len(n_min)
            object.__setattr__(self, "grid", (n,) * len(periods))
        else:
            grid = tuple(int(n) for n in self.grid)
            if len(grid) != len(periods):
                raise ValueError("grid and periods must have the same length")
            if min(grid) < n_min:
                raise ValueError(
                    f"grid {grid} too coarse for cutoff {self.cutoff}: need >= {n_min} nodes"
                )
            object.__setattr__(self, "grid", grid)

    @classmethod
    def square(cls, cutoff: int, dim: int = 2, period: float = 2 * np.pi, grid=None) -> "Torus":
        return cls((period,) * dim, cutoff, grid)

    @property
    def dim(self) -> int:
        return len(self.periods)

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.grid

    @property
    def coeff_shape(self) -> tuple[int, ...]:
        return (2 * self.cutoff + 1,) * self.dim

    @cached_property
    def mode_numbers(self) -> tuple[np.ndarray, ...]:
        """Integer frequency vector components, broadcast over ``coeff_shape``."""
        m = np.arange(-self.cutoff, self.cutoff + 1)
        return tuple(np.meshgrid(*([m] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(2 * np.pi * m / p for m, p in zip(self.mode_numbers, self.periods))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def mode_mask(self) -> np.ndarray:
        return np.ones(self.coeff_shape, dtype=bool)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.grid, self.volume / np.prod(self.grid))

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        axes = [p * np.arange(n) / n for p, n in zip(self.periods, self.grid)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def _fft_index(self):
        m = np.arange(-self.cutoff, self.cutoff + 1)
        return np.ix_(*[m % n for n in self.grid])

    def index_of(self, m) -> tuple[int, ...]:
        m = tuple(int(x) for x in m)
        if len(m) != self.dim or max(abs(x) for x in m) > self.cutoff:
            raise IndexError(f"mode {m} outside cutoff {self.cutoff}")
        return tuple(x + self.cutoff for x in m)

    def with_cutoff(self, cutoff: int) -> "Torus":
        return Torus(self.periods, cutoff)

    def to_dict(self) -> dict:
        return {"kind": "torus", "periods": list(self.periods), "cutoff": self.cutoff,
                "grid": list(self.grid)}

    # transforms act on the trailing axes, leading axes are a batch
    def _synthesize(self, coeffs):
        batch = coeffs.shape[: coeffs.ndim - self.dim]
        full = np.zeros(batch + self.grid, dtype=complex)
        full[(Ellipsis,) + self._fft_index] = coeffs
        scale = np.prod(self.grid) / math.sqrt(self.volume)
        axes = tuple(range(-self.dim, 0))
        return scipy.fft.ifftn(full, axes=axes) * scale

    def _analyze(self, values):
        full = scipy.fft.fftn(values, axes=tuple(range(-self.dim, 0)))
        scale = math.sqrt(self.volume) / np.prod(self.grid)
        return full[(Ellipsis,) + self._fft_index] * scale


def _normalized_legendre(lmax: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre functions.

    Returns ``P[l, m + lmax, j]`` for ``-lmax <= m <= lmax`` such that
    ``P[l, m] * exp(i m phi)`` is the orthonormal (Condon-Shortley phase)
    spherical harmonic on the unit sphere; entries with ``|m| > l`` are 0.
    """
    x = np.asarray(x, dtype=float)
    sint = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((lmax + 1, 2 * lmax + 1, x.size))
    pmm = np.full(x.size, math.sqrt(1.0 / (4 * np.pi)))
    for m in range(lmax + 1):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2 * m)) * sint * pmm
        out[m, lmax + m] = pmm
        if m < lmax:
            p_prev2 = pmm
            p_prev1 = math.sqrt(2 * m + 3) * x * pmm
            out[m + 1, lmax + m] = p_prev1
            for l in range(m + 2, lmax + 1):
                a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
                b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
                p_l = a * (x * p_prev1 - b * p_prev2)
                out[l, lmax + m] = p_l
                p_prev2, p_prev1 = p_prev1, p_l
    for m in range(1, lmax + 1):
        out[:, lmax - m] = (-1) ** m * out[:, lmax + m]
    return out


@dataclass(frozen=True)
class Sphere2(Manifold):
    """Round 2-sphere of given radius, spherical harmonics up to degree ``cutoff``."""

    cutoff: int
    radius: float = 1.0
    n_lat: int | None = None
    n_lon: int | None = None
    kind: str = field(default="sphere2", init=False)

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be a positive integer, got {self.cutoff}")
        L = int(self.cutoff)
        object.__setattr__(self, "cutoff", L)
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive, got {self.radius}")
        lat_min = math.ceil(3 * L / 2) + 1
        lon_min = 3 * L + 1
        n_lat = lat_min if self.n_lat is None else int(self.n_lat)
        n_lon = scipy.fft.next_fast_len(lon_min) if self.n_lon is None else int(self.n_lon)
        if n_lat < lat_min or n_lon < lon_min:
            raise ValueError(
                f"sphere grid ({n_lat}, {n_lon}) too coarse for L={L}: "
                f"need >= ({lat_min}, {lon_min})"
            )
        object.__setattr__(self, "n_lat", n_lat)
        object.__setattr__(self, "n_lon", n_lon)

    dim = 2

    @property
    def volume(self) -> float:
        return 4 * np.pi * self.radius**2

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)

    @property
    def coeff_shape(self) -> tuple[int, int]:
        return (self.cutoff + 1, 2 * self.cutoff + 1)

    @cached_property
    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """``(l, m)`` broadcast over ``coeff_shape``."""
        l = np.arange(self.cutoff + 1)
        m = np.arange(-self.cutoff, self.cutoff + 1)
        return tuple(np.meshgrid(l, m, indexing="ij"))

    @cached_property
    def mode_mask(self) -> np.ndarray:
        l, m = self.degrees
        return np.abs(m) <= l

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        l, _ = self.degrees
        return (l * (l + 1) / self.radius**2).astype(float)

    @cached_property
    def _gauss(self):
        return np.polynomial.legendre.leggauss(self.n_lat)

    @cached_property
    def colatitudes(self) -> np.ndarray:
        return np.arccos(self._gauss[0])

    @cached_property
    def longitudes(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_lon) / self.n_lon

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.colatitudes, self.longitudes, indexing="ij"))

    @cached_property
    def weights(self) -> np.ndarray:
        w_lat = self._gauss[1] * self.radius**2
        return np.outer(w_lat, np.full(self.n_lon, 2 * np.pi / self.n_lon))

    @cached_property
    def _legendre(self) -> np.ndarray:
        return _normalized_legendre(self.cutoff, self._gauss[0])

    @cached_property
    def _lon_index(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1) % self.n_lon

    def index_of(self, lm) -> tuple[int, int]:
        l, m = (int(x) for x in lm)
        if not (0 <= l <= self.cutoff and abs(m) <= l):
            raise IndexError(f"mode (l={l}, m={m}) outside cutoff {self.cutoff}")
        return (l, m + self.cutoff)

    def with_cutoff(self, cutoff: int) -> "Sphere2":
        return Sphere2(cutoff, self.radius)

    def to_dict(self) -> dict:
        return {"kind": "sphere2", "radius": self.radius, "cutoff": self.cutoff,
                "grid": [self.n_lat, self.n_lon]}

    def _synthesize(self, coeffs):
        # F[j, m] = sum_l c[l, m] P[l, m, j]
        fm = np.einsum("...lm,lmj->...jm", coeffs, self._legendre)
        full = np.zeros(coeffs.shape[:-2] + self.grid_shape, dtype=complex)
        full[..., self._lon_index] = fm
        return scipy.fft.ifft(full, axis=-1) * (self.n_lon / self.radius)

    def _analyze(self, values):
        fm = scipy.fft.fft(values, axis=-1)[..., self._lon_index] * (2 * np.pi / self.n_lon)
        fm *= self._gauss[1][:, None]
        coeffs = np.einsum("...jm,lmj->...lm", fm, self._legendre) * self.radius
        return np.where(self.mode_mask, coeffs, 0.0)


def manifold_from_dict(d: dict) -> Manifold:
    kind = d.get("kind")
    if kind == "torus":
        grid = d.get("grid")
        return Torus(tuple(d["periods"]), int(d["cutoff"]), tuple(grid) if grid else None)
    if kind == "sphere2":
        grid = d.get("grid") or (None, None)
        return Sphere2(int(d["cutoff"]), float(d.get("radius", 1.0)), grid[0], grid[1])
    raise ValueError(f"unknown manifold kind {kind!r}")


def _check_finite(a: np.ndarray, what: str):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains NaN or infinite entries")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Eigen-coefficients of a function; ``coeffs`` has ``manifold.coeff_shape``."""

    manifold: Manifold
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.manifold.coeff_shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match {self.manifold.coeff_shape}"
            )
        _check_finite(c, "coefficients")
        mask = self.manifold.mode_mask
        if not mask.all():
            c = np.where(mask, c, 0.0)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.manifold.eigenvalues

    def _same(self, other: "SpectralField"):
        if other.manifold != self.manifold:
            raise ValueError("fields live on different manifolds")

    def __add__(self, other):
        self._same(other)
        return SpectralField(self.manifold, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._same(other)
        return SpectralField(self.manifold, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.manifold, -self.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.manifold, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class GridField:
    """Values at the quadrature nodes of ``manifold``."""

    manifold: Manifold
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != tuple(self.manifold.grid_shape):
            raise ValueError(
                f"grid shape {v.shape} does not match {tuple(self.manifold.grid_shape)}"
            )
        _check_finite(v, "grid values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def weights(self) -> np.ndarray:
        return self.manifold.weights

    def __add__(self, other):
        _same_manifold(self, other)
        return GridField(self.manifold, self.values + other.values)

    def __sub__(self, other):
        _same_manifold(self, other)
        return GridField(self.manifold, self.values - other.values)

    def __mul__(self, scalar):
        return GridField(self.manifold, self.values * scalar)

    __rmul__ = __mul__


def _same_manifold(f, g):
    if f.manifold != g.manifold:
        raise ValueError("fields live on different manifolds")


def analyze(f: GridField) -> SpectralField:
    """Orthogonal projection of grid data onto the truncated eigenbasis."""
    return SpectralField(f.manifold, f.manifold._analyze(f.values))


def synthesize(c: SpectralField) -> GridField:
    """Evaluate the finite eigenfunction sum at the quadrature nodes."""
    return GridField(c.manifold, c.manifold._synthesize(c.coeffs))


def apply_multiplier(c: SpectralField, phi: Callable[[np.ndarray], np.ndarray]) -> SpectralField:
    """Spectral multiplier ``phi(-Delta)``: scale each coefficient by ``phi(lambda_k)``.

    ``phi`` is called once on the whole eigenvalue array and must be
    vectorised.
    """
    factors = np.broadcast_to(np.asarray(phi(c.eigenvalues), dtype=complex), c.coeffs.shape)
    factors = np.where(c.manifold.mode_mask, factors, 0.0)
    if not np.all(np.isfinite(factors)):
        raise ValueError("multiplier is not finite on the truncated spectrum")
    return SpectralField(c.manifold, c.coeffs * factors)


def sobolev_norm(c: SpectralField, s: float) -> float:
    """``||(1 - Delta)^{s/2} f||_{L^2}``."""
    if s < 0:
        raise ValueError(f"only s >= 0 is supported, got {s}")
    power = (1.0 + c.eigenvalues) ** s
    return float(np.sqrt(np.sum(power * np.abs(c.coeffs) ** 2)))


def gradient_l2_sq(c: SpectralField) -> float:
    """``int |grad f|^2 dg``, i.e. ``sum_k lambda_k |c_k|^2``."""
    return float(np.sum(c.eigenvalues * np.abs(c.coeffs) ** 2))


def lp_norm(f: GridField, p: float) -> float:
    """Quadrature ``L^p`` norm; ``p = inf`` is the maximum over grid nodes."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float(np.sum(f.weights * a**p) ** (1.0 / p))


def integrate(f: GridField) -> complex:
    return complex(np.sum(f.weights * f.values))


def multiply_dealiased(f: GridField, g: GridField) -> GridField:
    """Pointwise product.

    The grids are oversampled by 3/2 at construction, so analysing the
    product of two band-limited fields is already free of aliasing.
    """
    _same_manifold(f, g)
    return GridField(f.manifold, f.values * g.values)


def resample(c: SpectralField, target: Manifold) -> SpectralField:
    """Zero-pad or truncate coefficients onto a manifold with another cutoff."""
    src = c.manifold
    if type(src) is not type(target):
        raise ValueError("cannot resample between different manifold kinds")
    if isinstance(src, Torus):
        if src.periods != target.periods:
            raise ValueError("torus periods differ")
        n = min(src.cutoff, target.cutoff)
        out = np.zeros(target.coeff_shape, dtype=complex)
        sl_src = tuple(slice(src.cutoff - n, src.cutoff + n + 1) for _ in range(src.dim))
        sl_dst = tuple(slice(target.cutoff - n, target.cutoff + n + 1) for _ in range(src.dim))
        out[sl_dst] = c.coeffs[sl_src]
        return SpectralField(target, out)
    if src.radius != target.radius:
        raise ValueError("sphere radii differ")
    n = min(src.cutoff, target.cutoff)
    out = np.zeros(target.coeff_shape, dtype=complex)
    out[: n + 1, target.cutoff - n: target.cutoff + n + 1] = c.coeffs[
        : n + 1, src.cutoff - n: src.cutoff + n + 1
    ]
    return SpectralField(target, out)


def eigenmode(manifold: Manifold, index, coeff: complex = 1.0) -> SpectralField:
    """Field with a single nonzero coefficient at ``index``.

    ``index`` is the frequency vector ``m`` on the torus and ``(l, m)`` on
    the sphere.  The coefficient is in the orthonormal convention, so the
    plane wave ``exp(i m.x)`` on a torus has coefficient ``sqrt(vol)``.
    """
    c = np.zeros(manifold.coeff_shape, dtype=complex)
    c[manifold.index_of(index)] = coeff
    return SpectralField(manifold, c)


def _mode_labels(manifold: Manifold) -> np.ndarray:
    if isinstance(manifold, Torus):
        return np.stack([m[manifold.mode_mask] for m in manifold.mode_numbers], axis=1)
    l, m = manifold.degrees
    return np.stack([l[manifold.mode_mask], m[manifold.mode_mask]], axis=1)


def field_to_dict(c: SpectralField) -> dict:
    """JSON-ready form: manifold header plus ``[index..., re, im]`` rows."""
    labels = _mode_labels(c.manifold)
    vals = c.coeffs[c.manifold.mode_mask]
    rows = [[*map(int, lab), float(v.real), float(v.imag)] for lab, v in zip(labels, vals)]
    return {"manifold": c.manifold.to_dict(), "coeffs": rows}


def field_from_dict(d: dict) -> SpectralField:
    manifold = manifold_from_dict(d["manifold"])
    out = np.zeros(manifold.coeff_shape, dtype=complex)
    for row in d["coeffs"]:
        *idx, re, im = row
        out[manifold.index_of(idx)] = complex(re, im)
    return SpectralField(manifold, out)


def save_field(c: SpectralField, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(field_to_dict(c)))
    return path


def load_field(path) -> SpectralField:
    return field_from_dict(json.loads(Path(path).read_text()))
