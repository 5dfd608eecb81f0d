"""Spectral simulation and verification tools for the Schrodinger-Debye system on compact manifolds."""

__version__ = "0.1.0"

from .manifold import (  # noqa: E402
    GridField,
    Manifold,
    SpectralField,
    Sphere2,
    Torus,
    analyze,
    apply_multiplier,
    eigenmode,
    gradient_l2_sq,
    integrate,
    lp_norm,
    multiply_dealiased,
    resample,
    sobolev_norm,
    synthesize,
)
from .dynamics import (  # noqa: E402
    PicardResult,
    SDParams,
    SDState,
    Trajectory,
    duhamel_map,
    evolve,
    picard_iterate,
    strang_step,
    xt_norm,
)

__all__ = [
    "__version__",
    "GridField",
    "Manifold",
    "SpectralField",
    "Sphere2",
    "Torus",
    "analyze",
    "apply_multiplier",
    "eigenmode",
    "gradient_l2_sq",
    "integrate",
    "lp_norm",
    "multiply_dealiased",
    "resample",
    "sobolev_norm",
    "synthesize",
    "PicardResult",
    "SDParams",
    "SDState",
    "Trajectory",
    "duhamel_map",
    "evolve",
    "picard_iterate",
    "strang_step",
    "xt_norm",
]
