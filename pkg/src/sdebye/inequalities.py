"""Empirical probes of functional inequalities on the supported manifolds.

All probes draw random smooth fields with a fixed seed and report the
largest observed ratio ``lhs / rhs``.  These are sample maxima: lower
bounds for the sharp constants, never certificates of them.

Sample ``i`` of a probe seeded with ``seed`` is generated from
``numpy.random.default_rng([seed, i])``, so any single sample (notably the
argmax witness) can be regenerated without replaying the others.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.optimize
from scipy.integrate import trapezoid

from .manifold import (
    Manifold,
    SpectralField,
    manifold_from_dict,
    resample,
    sobolev_norm,
)

DECAY_CHOICES = (1.5, 2.0, 3.0)
QUANTILES = (0.5, 0.9, 0.99)
GN_INFLATION = 1.05

__all__ = [
    "AdmissiblePair",
    "InequalityProbeReport",
    "GNConstants",
    "admissible_q",
    "admissible_p",
    "random_field",
    "sample_rng",
    "bilinear_ratio",
    "probe_bilinear_hs",
    "gn_terms",
    "estimate_gn_constants",
    "strichartz_ratio",
    "probe_strichartz",
]


def admissible_q(d: int, p: float) -> float:
    """Spatial exponent ``q`` completing ``(p, q)`` to a d-admissible pair."""
    if d < 2:
        raise ValueError("admissible pairs need d >= 2")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if math.isinf(p):
        return 2.0
    denom = d * p - 4
    if denom <= 0:
        # only (p, d) = (2, 2) reaches here: the excluded endpoint (2, inf, 2)
        raise ValueError(f"(p={p}, d={d}) gives q = inf, the excluded endpoint")
    return 2 * d * p / denom


def admissible_p(d: int, q: float) -> float:
    """Inverse of :func:`admissible_q`."""
    if q <= 2:
        return math.inf
    return 4 * q / (d * (q - 2))


@dataclass(frozen=True)
class AdmissiblePair:
    d: int
    p: float
    q: float
    s: float | None = None

    def __post_init__(self):
        if self.p < 2 or self.q < 2:
            raise ValueError(f"need p, q >= 2, got ({self.p}, {self.q})")
        if (self.p, self.q, self.d) == (2, math.inf, 2):
            raise ValueError("(2, inf, 2) is excluded")
        lhs = (0.0 if math.isinf(self.p) else 2 / self.p) + (
            0.0 if math.isinf(self.q) else self.d / self.q
        )
        if abs(lhs - self.d / 2) > 1e-12:
            raise ValueError(f"2/p + d/q = {lhs} != d/2 = {self.d / 2}")

    @classmethod
    def from_p(cls, d: int, p: float, s: float | None = None) -> "AdmissiblePair":
        return cls(d, p, admissible_q(d, p), s)

    @property
    def gamma_p(self) -> float:
        return 1 - 1 / self.p

    @property
    def sigma(self) -> float | None:
        return None if self.s is None else self.s - 1 / self.p


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def random_field(
    manifold: Manifold,
    rng: np.random.Generator,
    decay: float | None = None,
    max_mode: int | None = None,
) -> SpectralField:
    """Random smooth field with unit L^2 norm.

    Coefficients are i.i.d. complex Gaussians damped by
    ``(1 + lambda_k)^(-decay/2)``; ``decay`` is drawn from
    ``DECAY_CHOICES`` when not given.  ``max_mode`` further zeroes every
    mode whose index (``max |m_j|`` on a torus, ``l`` on a sphere) exceeds it.
    """
    if decay is None:
        decay = float(rng.choice(DECAY_CHOICES))
    shape = manifold.coeff_shape
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c = z * (1.0 + manifold.eigenvalues) ** (-decay / 2)
    c = np.where(manifold.mode_mask, c, 0.0)
    if max_mode is not None:
        c = np.where(_mode_size(manifold) <= max_mode, c, 0.0)
    norm = np.sqrt(np.sum(np.abs(c) ** 2))
    return SpectralField(manifold, c / norm)


def _mode_size(manifold: Manifold) -> np.ndarray:
    if manifold.kind == "torus":
        return np.max(np.abs(np.stack(manifold.mode_numbers)), axis=0)
    return manifold.degrees[0]


def _lifted(manifold: Manifold) -> Manifold:
    # doubled cutoff: products of two fields (and |u|^4) are integrated exactly there
    return manifold.with_cutoff(2 * manifold.cutoff)


@dataclass
class InequalityProbeReport:
    inequality: str
    n_samples: int
    seed: int
    max_ratio: float
    witness: dict
    quantiles: list[tuple[float, float]]
    manifold: dict
    params: dict
    skipped: int = 0
    ratios: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("ratios")
        d["quantiles"] = [list(q) for q in self.quantiles]
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _report(name, ratios, seed, manifold, params, witness_extra, skipped) -> InequalityProbeReport:
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("every sample was degenerate")
    i = int(np.argmax(ratios))
    qs = [(q, float(np.quantile(ratios, q))) for q in QUANTILES]
    witness = {"sample": witness_extra[i][0], "seed": [int(seed), witness_extra[i][0]],
               **witness_extra[i][1]}
    return InequalityProbeReport(
        inequality=name,
        n_samples=int(ratios.size),
        seed=int(seed),
        max_ratio=float(ratios[i]),
        witness=witness,
        quantiles=qs,
        manifold=manifold.to_dict(),
        params=params,
        skipped=skipped,
        ratios=ratios,
    )


# --- bilinear H^s estimate ---------------------------------------------------


def bilinear_ratio(f: SpectralField, g: SpectralField, s: float) -> float:
    """``||fg||_{H^s} / (||f||_{H^s} ||g||_inf + ||f||_inf ||g||_{H^s})``.

    The product is formed on the doubled-cutoff manifold, where it is
    represented exactly; the ``L^inf`` norms are grid maxima there.
    Returns ``nan`` when the denominator vanishes.
    """
    fine = _lifted(f.manifold)
    fv = fine._synthesize(resample(f, fine).coeffs)
    gv = fine._synthesize(resample(g, fine).coeffs)
    fg = SpectralField(fine, fine._analyze(fv * gv))
    num = sobolev_norm(fg, s)
    den = sobolev_norm(f, s) * np.abs(gv).max() + np.abs(fv).max() * sobolev_norm(g, s)
    if den == 0:
        return math.nan
    return float(num / den)


def probe_bilinear_hs(manifold: Manifold, s: float, n: int, seed: int) -> InequalityProbeReport:
    """Max of :func:`bilinear_ratio` over ``n`` random smooth field pairs."""
    if n < 1:
        raise ValueError("need at least one sample")
    if s <= 0:
        raise ValueError("the bilinear estimate is stated for s > 0")
    ratios, extra, skipped = [], [], 0
    for i in range(n):
        rng = sample_rng(seed, i)
        f = random_field(manifold, rng)
        g = random_field(manifold, rng)
        r = bilinear_ratio(f, g, s)
        if not math.isfinite(r):
            skipped += 1
            continue
        ratios.append(r)
        extra.append((i, {}))
    return _report("bilinear_hs", ratios, seed, manifold, {"s": s}, extra, skipped)


# --- Gagliardo-Nirenberg -----------------------------------------------------


def gn_terms(c: SpectralField) -> tuple[float, float, float]:
    """``(||u||_4^4, ||grad u||_2^2, ||u||_2^2)`` with exact quadrature."""
    terms = _gn_terms_batch(c.manifold, c.coeffs[None])
    return tuple(float(t[0]) for t in terms)


def _gn_terms_batch(manifold: Manifold, coeffs: np.ndarray):
    fine = _lifted(manifold)
    n = manifold.cutoff
    padded = np.zeros(coeffs.shape[:1] + fine.coeff_shape, dtype=complex)
    if manifold.kind == "torus":
        sl = tuple(slice(fine.cutoff - n, fine.cutoff + n + 1) for _ in range(manifold.dim))
    else:
        sl = (slice(0, n + 1), slice(fine.cutoff - n, fine.cutoff + n + 1))
    padded[(slice(None),) + sl] = coeffs
    values = fine._synthesize(padded)
    axes = tuple(range(1, values.ndim))
    l4 = np.sum(fine.weights * np.abs(values) ** 4, axis=axes)
    a2 = np.abs(coeffs) ** 2
    axes = tuple(range(1, a2.ndim))
    grad = np.sum(manifold.eigenvalues * a2, axis=axes)
    mass = np.sum(a2, axis=axes)
    return l4, grad, mass


def _gn_sample_terms(manifold: Manifold, n: int, seed: int, chunk: int = 256):
    out = []
    for start in range(0, n, chunk):
        block = np.stack([
            random_field(manifold, sample_rng(seed, i)).coeffs
            for i in range(start, min(n, start + chunk))
        ])
        out.append(np.stack(_gn_terms_batch(manifold, block), axis=1))
    return np.concatenate(out, axis=0)


def _gn_excess(manifold: Manifold, B: float):
    """Objective ``-(||u||_4^4/||u||^2 - B||u||^2)/||grad u||^2`` and its gradient.

    Real parametrisation ``x = [Re c, Im c]``; ``|u|^2 u`` is projected on
    the doubled grid, which is alias-free for a cubic term.
    """
    fine = _lifted(manifold)
    lam = manifold.eigenvalues

    def fun(x):
        c = (x[: x.size // 2] + 1j * x[x.size // 2:]).reshape(manifold.coeff_shape)
        u = SpectralField(manifold, c)
        v = fine._synthesize(resample(u, fine).coeffs)
        l4 = np.sum(fine.weights * np.abs(v) ** 4)
        mass = np.sum(np.abs(c) ** 2)
        grad = np.sum(lam * np.abs(c) ** 2)
        cubic = resample(SpectralField(fine, fine._analyze(np.abs(v) ** 2 * v)), manifold).coeffs
        top = l4 / mass - B * mass
        d_top = 2 * cubic / mass - l4 * c / mass**2 - B * c
        d = d_top / grad - top * lam * c / grad**2
        return -top / grad, -2 * np.concatenate([d.real.ravel(), d.imag.ravel()])

    return fun


def _refine(manifold: Manifold, c: np.ndarray, B: float) -> float:
    x0 = np.concatenate([c.real.ravel(), c.imag.ravel()])
    res = scipy.optimize.minimize(
        _gn_excess(manifold, B), x0, jac=True, method="L-BFGS-B",
        options={"maxiter": 2000, "ftol": 1e-13, "gtol": 1e-10},
    )
    return float(-res.fun)


@dataclass
class GNConstants:
    """A valid-on-samples pair for ``||u||_4^4 <= (A||grad u||^2 + B||u||^2)||u||^2``."""

    A: float
    B: float
    margin: float
    n_fit: int
    n_holdout: int
    seed: int
    holdout_seed: int
    violations: int
    manifold: dict
    A_sampled: float = math.nan
    n_refined: int = 0

    @property
    def C(self) -> float:
        return max(self.A, self.B)

    def ratio(self, l4_4, grad_sq, mass):
        return l4_4 / ((self.A * grad_sq + self.B * mass) * mass)

    def to_dict(self) -> dict:
        return {**asdict(self), "C": self.C}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "GNConstants":
        d = dict(d)
        d.pop("C", None)
        return cls(**d)

    @classmethod
    def load(cls, path) -> "GNConstants":
        return cls.from_dict(json.loads(Path(path).read_text()))


def estimate_gn_constants(
    manifold: Manifold,
    n_fit: int = 2000,
    n_holdout: int = 10_000,
    seed: int = 1,
    holdout_seed: int | None = None,
    n_refine: int = 4,
) -> GNConstants:
    """Fit ``(A, B)`` in the 2-D Gagliardo-Nirenberg inequality.

    ``B`` is pinned by constant fields (``B >= 1/vol``) and inflated by 5%.
    ``A`` is the smallest value that makes every fit sample satisfy the
    inequality at that ``B``, inflated by 5%.  Random fields are poor
    near-extremisers, so the ``n_refine`` fit samples with the largest
    required ``A`` are pushed uphill by L-BFGS before taking the maximum.
    The resulting pair is replayed on ``n_holdout`` fresh samples.
    """
    if manifold.dim != 2:
        raise ValueError("the L^4 Gagliardo-Nirenberg form used here is two-dimensional")
    if holdout_seed is None:
        holdout_seed = seed + 1
    B = GN_INFLATION / manifold.volume
    l4, grad, mass = _gn_sample_terms(manifold, n_fit, seed).T
    need = (l4 / mass - B * mass) / grad
    a_sampled = max(0.0, float(np.max(need)))
    a_refined = a_sampled
    for i in np.argsort(need)[::-1][:n_refine]:
        start = random_field(manifold, sample_rng(seed, int(i))).coeffs
        a_refined = max(a_refined, _refine(manifold, start, B))
    A = GN_INFLATION * a_refined
    l4, grad, mass = _gn_sample_terms(manifold, n_holdout, holdout_seed).T
    ratios = l4 / ((A * grad + B * mass) * mass)
    return GNConstants(
        A=A,
        B=B,
        margin=float(1.0 - ratios.max()),
        n_fit=n_fit,
        n_holdout=n_holdout,
        seed=seed,
        holdout_seed=holdout_seed,
        violations=int(np.sum(ratios > 1.0)),
        manifold=manifold.to_dict(),
        A_sampled=GN_INFLATION * a_sampled,
        n_refined=int(min(n_refine, n_fit)),
    )


# --- Strichartz estimate with loss -------------------------------------------


def _mixed_norm(manifold: Manifold, coeffs: np.ndarray, pair: AdmissiblePair, T: float,
                n_time: int) -> float:
    t = np.linspace(0.0, T, n_time)
    phases = np.exp(-1j * t[(slice(None),) + (None,) * coeffs.ndim] * manifold.eigenvalues)
    values = manifold._synthesize(phases * coeffs)
    axes = tuple(range(1, values.ndim))
    lq = np.sum(manifold.weights * np.abs(values) ** pair.q, axis=axes) ** (1 / pair.q)
    return float(trapezoid(lq**pair.p, t) ** (1 / pair.p))


def strichartz_ratio(u0: SpectralField, pair: AdmissiblePair, T: float,
                     n_time: int = 257) -> float:
    """``||e^{it Delta} u0||_{L^p([0,T], L^q)} / ||u0||_{H^{1/p}}`` (``nan`` for u0 = 0)."""
    den = sobolev_norm(u0, 1 / pair.p)
    if den == 0:
        return math.nan
    return _mixed_norm(u0.manifold, u0.coeffs, pair, T, n_time) / den


def probe_strichartz(
    manifold: Manifold,
    pair: AdmissiblePair,
    T: float,
    n: int,
    seed: int,
    n_time: int = 257,
) -> InequalityProbeReport:
    """Max of :func:`strichartz_ratio` over ``n`` random smooth initial data."""
    if math.isinf(pair.q):
        raise ValueError("the estimate needs q < inf")
    if not 0 < T <= 1:
        raise ValueError(f"need 0 < T <= 1, got {T}")
    if n_time < 256:
        raise ValueError("use at least 256 time nodes")
    ratios, extra, skipped = [], [], 0
    for i in range(n):
        u0 = random_field(manifold, sample_rng(seed, i))
        r = strichartz_ratio(u0, pair, T, n_time)
        if not math.isfinite(r):
            skipped += 1
            continue
        ratios.append(r)
        extra.append((i, {}))
    params = {"d": pair.d, "p": pair.p, "q": pair.q, "T": T, "n_time": n_time}
    return _report("strichartz", ratios, seed, manifold, params, extra, skipped)


def reevaluate_witness(report: InequalityProbeReport) -> float:
    """Recompute the ratio of the witness sample recorded in ``report``."""
    manifold = manifold_from_dict(report.manifold)
    seed, i = report.witness["seed"]
    rng = sample_rng(seed, i)
    if report.inequality == "bilinear_hs":
        f = random_field(manifold, rng)
        g = random_field(manifold, rng)
        return bilinear_ratio(f, g, report.params["s"])
    if report.inequality == "strichartz":
        pr = report.params
        pair = AdmissiblePair(pr["d"], pr["p"], pr["q"])
        return strichartz_ratio(random_field(manifold, rng), pair, pr["T"], pr["n_time"])
    raise ValueError(f"unknown inequality {report.inequality!r}")
