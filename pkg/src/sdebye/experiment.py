"""Config-driven scenario runs: simulate, picard, inequality probes and the kappa sweep.

A run is described by one YAML document::

    schema_version: 1
    seed: 7
    manifold: {kind: torus, cutoff: 32}          # or {kind: sphere2, cutoff: 16, radius: 1}
    params: {kappa: 1.0, lambda: 1}
    initial:
      u0: {type: random, decay: 3, max_mode: 6, norm: {l2: 2.0}}
      v0: {type: zero}
    simulate: {dt: 0.001, t_end: 1.0}          # exactly one scenario block
    monitors: [mass, identity, apriori, growth_envelope, v_bounds]
    gn_constants: {fit: {n_fit: 2000, n_holdout: 10000, seed: 1, holdout_seed: 2}}

Every run writes the fully resolved config to ``config.yaml`` in its
output directory; parsing that file reproduces the run exactly.
"""
from __future__ import annotations

import copy
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
import yaml

from . import __version__
from .dynamics import (
    SDParams,
    SDState,
    evolve,
    evolve_nls,
    existence_time,
    picard_iterate,
)
from .inequalities import (
    AdmissiblePair,
    GNConstants,
    admissible_q,
    estimate_gn_constants,
    probe_bilinear_hs,
    probe_strichartz,
    random_field,
    sample_rng,
)
from .manifold import (
    GridField,
    Manifold,
    SpectralField,
    Sphere2,
    Torus,
    analyze,
    eigenmode,
    save_field,
    sobolev_norm,
    synthesize,
)
from .monitors import (
    DiagnosticsRecorder,
    InitialNorms,
    apriori_check,
    growth_envelope_check,
    integrated_identity_residual,
    identity_residual,
    relative_mass_drift,
    v_bounds_check,
    write_diagnostics_csv,
)

__all__ = [
    "SCHEMA_VERSION",
    "SCENARIOS",
    "ConfigError",
    "RunConfig",
    "RunArtifacts",
    "load_config",
    "build_manifold",
    "build_initial",
    "workers",
    "run_simulate",
    "run_picard",
    "run_inequalities",
    "run_kappa_limit",
    "run",
]

SCHEMA_VERSION = 1
SCENARIOS = ("simulate", "picard", "inequalities", "kappa_limit")
MONITORS = ("mass", "identity", "apriori", "growth_envelope", "v_bounds")
WORKERS_ENV = "SDEBYE_WORKERS"

# stream ids for sample_rng(seed, stream)
_U0_STREAM, _V0_STREAM = 0, 1


class ConfigError(ValueError):
    """Raised for any malformed or inconsistent run configuration."""


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _pmap(fn: Callable, items: Iterable) -> list:
    """Order-preserving map, threaded when the worker env var asks for it."""
    items = list(items)
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --- config -------------------------------------------------------------------

_DEFAULTS = {
    "simulate": {"dt": 1e-3, "t_end": 1.0, "record_every": 0, "p": 4.0},
    "picard": {"T": 0.5, "n_grid": 64, "max_iter": 50, "tol": 1e-12, "s": 1.0, "p": 4.0,
               "C": 1.0, "compare_splitting": True, "sweep": None},
    "kappa_limit": {"kappas": [1.0, 0.3, 0.1, 0.03], "T": 1.0, "dt": 1e-3},
    "inequalities": {},
}
_SWEEP_DEFAULTS = {"scales": [1, 2, 4], "vary": "u",
                   "T_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
                   "n_grid": 64, "max_iter": 60, "rtol": 1e-10}


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _number(d: dict, key: str, where: str, positive=True) -> float:
    x = d.get(key)
    _require(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x),
             f"{where}.{key} must be a finite number")
    if positive:
        _require(x > 0, f"{where}.{key} must be positive")
    return float(x)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A validated run description; ``raw`` holds the resolved key-value tree."""

    raw: dict
    source: Path | None = None

    @property
    def scenario(self) -> str:
        return next(k for k in SCENARIOS if k in self.raw)

    @property
    def block(self) -> dict:
        return self.raw[self.scenario]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def params(self) -> SDParams:
        p = self.raw["params"]
        return SDParams(p["kappa"], p["lambda"])

    @property
    def monitors(self) -> list[str]:
        return list(self.raw.get("monitors", []))

    @classmethod
    def from_dict(cls, d: Any, source: Path | None = None) -> "RunConfig":
        return cls(_resolve(d, source), source)

    @classmethod
    def from_yaml(cls, text: str, source: Path | None = None) -> "RunConfig":
        try:
            d = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from None
        return cls.from_dict(d, source)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.raw == other.raw


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return RunConfig.from_yaml(text, path)


def _resolve(d: Any, source: Path | None) -> dict:
    _require(isinstance(d, dict), "config must be a mapping")
    d = copy.deepcopy(d)
    _require(d.get("schema_version") == SCHEMA_VERSION,
             f"schema_version must be {SCHEMA_VERSION}")
    present = [k for k in SCENARIOS if k in d]
    _require(len(present) == 1, f"exactly one scenario block of {SCENARIOS} is required, "
                                f"found {present or 'none'}")
    known = {"schema_version", "seed", "manifold", "params", "initial", "monitors",
             "gn_constants", *SCENARIOS}
    unknown = sorted(set(d) - known)
    _require(not unknown, f"unknown top-level keys: {unknown}")
    _require(isinstance(d.get("seed"), int) and not isinstance(d["seed"], bool),
             "seed must be an integer")
    scenario = present[0]

    d["manifold"] = build_manifold(d.get("manifold")).to_dict()
    p = d.setdefault("params", {"kappa": 1.0, "lambda": 1})
    _require(isinstance(p, dict), "params must be a mapping")
    p.setdefault("kappa", 1.0)
    p.setdefault("lambda", 1)
    p["kappa"] = _number(p, "kappa", "params")
    _require(p["lambda"] in (-1, 1), "params.lambda must be -1 or +1")
    p["lambda"] = int(p["lambda"])

    init = d.setdefault("initial", {})
    _require(isinstance(init, dict), "initial must be a mapping")
    init.setdefault("u0", {"type": "zero"})
    default_v = {"type": "well_prepared"} if scenario == "kappa_limit" else {"type": "zero"}
    init.setdefault("v0", default_v)
    _check_field_spec(init["u0"], "initial.u0", real=False)
    _check_field_spec(init["v0"], "initial.v0", real=True)

    block = d[scenario] if d[scenario] is not None else {}
    _require(isinstance(block, dict), f"{scenario} must be a mapping")
    d[scenario] = block = {**_DEFAULTS[scenario], **block}
    _check_scenario(scenario, block, init)

    mons = d.setdefault("monitors", [])
    _require(isinstance(mons, list) and all(m in MONITORS for m in mons),
             f"monitors must be a list drawn from {MONITORS}")
    if scenario != "simulate":
        _require(not mons, "monitors are only used by the simulate scenario")

    gn = d.get("gn_constants")
    needs_gn = scenario == "simulate" and ({"apriori", "growth_envelope"} & set(mons))
    if gn is None and needs_gn:
        gn = {"fit": {}}
    if gn is not None:
        d["gn_constants"] = _check_gn(gn, source)
    return d


def _check_field_spec(spec: Any, where: str, real: bool):
    _require(isinstance(spec, dict) and "type" in spec, f"{where} needs a type")
    kind = spec["type"]
    kinds = ("zero", "constant", "modes", "random") + (("well_prepared",) if real else ())
    _require(kind in kinds, f"{where}.type must be one of {kinds}")
    if kind == "constant":
        _require("value" in spec, f"{where}.value is required")
        _complex(spec["value"], f"{where}.value")
    elif kind == "modes":
        modes = spec.get("modes")
        _require(isinstance(modes, list) and modes, f"{where}.modes must be a non-empty list")
        for row in modes:
            _require(isinstance(row, dict) and "index" in row and "value" in row,
                     f"{where}.modes entries need index and value")
            _complex(row["value"], f"{where}.modes value")
        spec.setdefault("basis", "orthonormal")
        _require(spec["basis"] in ("orthonormal", "plane_wave"),
                 f"{where}.basis must be orthonormal or plane_wave")
    elif kind == "random":
        spec.setdefault("decay", 3.0)
        spec.setdefault("max_mode", None)
        _number(spec, "decay", where)
        norm = spec.setdefault("norm", {"l2": 1.0})
        _require(isinstance(norm, dict) and len(norm) == 1 and next(iter(norm)) in ("l2", "h1"),
                 f"{where}.norm must be {{l2: x}} or {{h1: x}}")
        _number(norm, next(iter(norm)), f"{where}.norm", positive=False)
        if real:
            spec.setdefault("nonnegative", False)
    if "seed" in spec:
        _require(isinstance(spec["seed"], int), f"{where}.seed must be an integer")


def _complex(x, where) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    _require(isinstance(x, list) and len(x) == 2 and all(isinstance(y, (int, float)) for y in x),
             f"{where} must be a number or [re, im]")
    return complex(x[0], x[1])


def _check_scenario(name: str, b: dict, init: dict):
    where = name
    if name == "simulate":
        dt, t_end = _number(b, "dt", where), _number(b, "t_end", where)
        n = t_end / dt
        _require(abs(n - round(n)) <= 1e-9 * max(1.0, n), "simulate.dt must divide t_end")
        _require(isinstance(b["record_every"], int) and b["record_every"] >= 0,
                 "simulate.record_every must be a nonnegative integer (0: no snapshots)")
        _require(_number(b, "p", where) > 2, "simulate.p must exceed 2")
    elif name == "picard":
        T = _number(b, "T", where)
        _require(T <= 1, "picard.T must not exceed 1")
        _require(isinstance(b["n_grid"], int) and b["n_grid"] >= 16, "picard.n_grid must be >= 16")
        _require(isinstance(b["max_iter"], int) and b["max_iter"] >= 1, "picard.max_iter must be >= 1")
        for k in ("tol", "C"):
            _number(b, k, where)
        _number(b, "s", where, positive=False)
        _require(_number(b, "p", where) > 2, "picard.p must exceed 2")
        if b.get("sweep") is not None:
            sw = {**_SWEEP_DEFAULTS, **b["sweep"]}
            _require(sw["vary"] in ("u", "v"), "picard.sweep.vary must be u or v")
            _require(all(x > 0 for x in sw["scales"]), "picard.sweep.scales must be positive")
            _require(all(0 < x <= 1 for x in sw["T_grid"]), "picard.sweep.T_grid must lie in (0, 1]")
            b["sweep"] = sw
    elif name == "kappa_limit":
        ks = b["kappas"]
        _require(isinstance(ks, list) and ks and all(isinstance(k, (int, float)) and k > 0 for k in ks),
                 "kappa_limit.kappas must be a list of positive numbers")
        _require(all(a > b_ for a, b_ in zip(ks, ks[1:])), "kappa_limit.kappas must decrease")
        dt, T = _number(b, "dt", where), _number(b, "T", where)
        n = T / dt
        _require(abs(n - round(n)) <= 1e-9 * max(1.0, n), "kappa_limit.dt must divide T")
        _require(init["v0"]["type"] == "well_prepared",
                 "kappa_limit requires initial.v0 of type well_prepared")
    else:
        known = {"admissible", "bilinear", "strichartz", "gn"}
        _require(set(b) <= known and b, f"inequalities needs one or more of {sorted(known)}")
        if "bilinear" in b:
            bl = {"s": 1.0, "n": 500, "seeds": [42, 43], **b["bilinear"]}
            _number(bl, "s", "inequalities.bilinear")
            b["bilinear"] = bl
        if "strichartz" in b:
            st = {"p": 4.0, "T": 1.0, "n": 200, "seed": 7, "n_time": 257, **b["strichartz"]}
            _require(_number(st, "T", "inequalities.strichartz") <= 1, "strichartz T must be <= 1")
            b["strichartz"] = st
        if "gn" in b:
            b["gn"] = {"n_fit": 2000, "n_holdout": 10000, "seed": 1, "holdout_seed": 2,
                       **(b["gn"] or {})}
        if "admissible" in b:
            b["admissible"] = {"dims": [2, 3], "p": [2.5, 3, 4, 8], **(b["admissible"] or {})}


def _check_gn(gn: Any, source: Path | None) -> dict:
    _require(isinstance(gn, dict) and len(gn) == 1 and next(iter(gn)) in ("file", "fit"),
             "gn_constants must be {file: path} or {fit: {...}}")
    if "file" in gn:
        path = Path(gn["file"])
        if not path.is_absolute() and source is not None:
            path = source.parent / path
        _require(path.exists(), f"gn_constants file {path} does not exist")
        return {"file": str(path)}
    fit = {"n_fit": 2000, "n_holdout": 10000, "seed": 1, "holdout_seed": 2, "n_refine": 4,
           **(gn["fit"] or {})}
    return {"fit": fit}


# --- builders -------------------------------------------------------------------


def build_manifold(spec: Any) -> Manifold:
    """Manifold from ``{kind: torus|sphere2, cutoff, ...}``."""
    _require(isinstance(spec, dict), "manifold must be a mapping")
    kind = spec.get("kind")
    cutoff = spec.get("cutoff")
    _require(isinstance(cutoff, int) and cutoff >= 1, "manifold.cutoff must be a positive integer")
    try:
        if kind == "torus":
            if "periods" in spec:
                periods = tuple(spec["periods"])
            else:
                periods = (spec.get("period", 2 * math.pi),) * int(spec.get("dim", 2))
            grid = spec.get("grid")
            return Torus(periods, cutoff, tuple(grid) if grid else None)
        if kind == "sphere2":
            grid = spec.get("grid") or (None, None)
            return Sphere2(cutoff, spec.get("radius", 1.0), grid[0], grid[1])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid manifold: {exc}") from None
    raise ConfigError(f"manifold.kind must be torus or sphere2, got {kind!r}")


def _spectral(m: Manifold, spec: dict, seed: int, stream: int) -> SpectralField:
    kind = spec["type"]
    if kind == "zero":
        return m.zeros()
    if kind == "constant":
        return analyze(m.constant(_complex(spec["value"], "value")))
    if kind == "modes":
        scale = math.sqrt(m.volume) if spec["basis"] == "plane_wave" else 1.0
        c = m.zeros()
        for row in spec["modes"]:
            try:
                c = c + eigenmode(m, row["index"], _complex(row["value"], "value") * scale)
            except (IndexError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad mode {row['index']}: {exc}") from None
        return c
    rng = sample_rng(spec.get("seed", seed), stream)
    f = random_field(m, rng, decay=spec["decay"], max_mode=spec["max_mode"])
    (which, target), = spec["norm"].items()
    return f * (target / sobolev_norm(f, 0.0 if which == "l2" else 1.0))


def build_initial(cfg: RunConfig) -> tuple[SpectralField, GridField]:
    """Initial ``(u0, v0)``; ``v0`` is real on the grid."""
    m = build_manifold(cfg.raw["manifold"])
    init = cfg.raw["initial"]
    u0 = _spectral(m, init["u0"], cfg.seed, _U0_STREAM)
    vs = init["v0"]
    if vs["type"] == "well_prepared":
        v = cfg.params.lam * np.abs(synthesize(u0).values) ** 2
    elif vs["type"] == "random" and vs.get("nonnegative"):
        spec = {**vs, "norm": {"l2": 1.0}}
        w = np.abs(synthesize(_spectral(m, spec, cfg.seed, _V0_STREAM)).values) ** 2
        (which, target), = vs["norm"].items()
        ref = GridField(m, w)
        size = (np.sqrt(np.sum(m.weights * w**2)) if which == "l2"
                else sobolev_norm(analyze(ref), 1.0))
        v = w * (target / size)
    elif vs["type"] == "random":
        f = _spectral(m, vs, cfg.seed, _V0_STREAM)
        re = analyze(GridField(m, synthesize(f).values.real))
        (which, target), = vs["norm"].items()
        v = synthesize(re).values.real * (target / sobolev_norm(re, 0.0 if which == "l2" else 1.0))
    else:
        v = synthesize(_spectral(m, vs, cfg.seed, _V0_STREAM)).values
        _require(np.max(np.abs(v.imag)) <= 1e-12, "initial.v0 must be real")
        v = v.real
    return u0, GridField(m, v)


@lru_cache(maxsize=8)
def _fit_gn(manifold_json: str, n_fit: int, n_holdout: int, seed: int, holdout_seed: int,
            n_refine: int) -> GNConstants:
    m = build_manifold(json.loads(manifold_json))
    return estimate_gn_constants(m, n_fit, n_holdout, seed, holdout_seed, n_refine)


def gn_constants_for(cfg: RunConfig) -> GNConstants | None:
    gn = cfg.raw.get("gn_constants")
    if gn is None:
        return None
    if "file" in gn:
        try:
            return GNConstants.load(gn["file"])
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"cannot load gn_constants file: {exc}") from None
    f = gn["fit"]
    man = json.dumps(cfg.raw["manifold"], sort_keys=True)
    return _fit_gn(man, f["n_fit"], f["n_holdout"], f["seed"], f["holdout_seed"], f["n_refine"])


# --- artifacts ------------------------------------------------------------------


@dataclass
class RunArtifacts:
    out_dir: Path
    config_echo: Path
    diagnostics_csv: Path | None = None
    bound_reports: dict[str, Path] = field(default_factory=dict)
    probe_reports: dict[str, Path] = field(default_factory=dict)
    tables: dict[str, Path] = field(default_factory=dict)
    snapshots: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failed_bounds: list[str] = field(default_factory=list)
    version: str = __version__
    wall_time: float = 0.0

    def paths(self) -> list[Path]:
        out = [self.config_echo, *self.bound_reports.values(), *self.probe_reports.values(),
               *self.tables.values(), *self.snapshots]
        if self.diagnostics_csv is not None:
            out.append(self.diagnostics_csv)
        return out

    def to_dict(self) -> dict:
        rel = lambda p: str(Path(p).relative_to(self.out_dir))
        return {
            "version": self.version,
            "wall_time": self.wall_time,
            "config": rel(self.config_echo),
            "diagnostics_csv": rel(self.diagnostics_csv) if self.diagnostics_csv else None,
            "bound_reports": {k: rel(v) for k, v in self.bound_reports.items()},
            "probe_reports": {k: rel(v) for k, v in self.probe_reports.items()},
            "tables": {k: rel(v) for k, v in self.tables.items()},
            "snapshots": [rel(p) for p in self.snapshots],
            "failed_bounds": self.failed_bounds,
            "summary": self.summary,
        }


def _start(cfg: RunConfig, out_dir, scenario: str) -> RunArtifacts:
    if cfg.scenario != scenario:
        raise ConfigError(f"config describes a {cfg.scenario} run, not {scenario}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = out / "config.yaml"
    echo.write_text(cfg.to_yaml())
    return RunArtifacts(out, echo)


def _finish(art: RunArtifacts, t0: float) -> RunArtifacts:
    art.wall_time = time.perf_counter() - t0
    (art.out_dir / "artifacts.json").write_text(json.dumps(art.to_dict(), indent=2))
    return art


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2))
    return path


# --- scenarios ------------------------------------------------------------------


def run_simulate(cfg: RunConfig, out_dir) -> RunArtifacts:
    """Step the system, write diagnostics and the requested bound reports."""
    t0 = time.perf_counter()
    art = _start(cfg, out_dir, "simulate")
    b = cfg.block
    params = cfg.params
    u0, v0 = build_initial(cfg)
    n_steps = int(round(b["t_end"] / b["dt"]))
    rec = DiagnosticsRecorder()
    every = b["record_every"]
    traj = evolve(SDState(0.0, u0, v0), b["dt"], n_steps, params,
                  record_every=every if every > 0 else max(n_steps, 1),
                  observer=rec, keep_v=False)
    rows = rec.rows
    art.diagnostics_csv = write_diagnostics_csv(rows, art.out_dir / "diagnostics.csv", params)
    if every > 0:
        snap = art.out_dir / "snapshots"
        snap.mkdir(exist_ok=True)
        for i, t in enumerate(traj.times):
            art.snapshots.append(save_field(traj.u(i), snap / f"u_{i * every:06d}.json"))

    norms = InitialNorms.of(u0, v0)
    summary: dict[str, Any] = {"n_steps": n_steps, "grid": list(u0.manifold.grid_shape),
                               "linf_note": "L^inf values are grid maxima"}
    gn = gn_constants_for(cfg) if {"apriori", "growth_envelope"} & set(cfg.monitors) else None
    rep_dir = art.out_dir / "reports"
    for name in cfg.monitors:
        rep_dir.mkdir(exist_ok=True)
        path = rep_dir / f"{name}.json"
        if name == "mass":
            drift = relative_mass_drift(rows)
            summary["mass_drift"] = drift
            _write_json(path, {"monitor": "mass", "relative_drift": drift})
        elif name == "identity":
            if len(rows) < 3:
                _write_json(path, {"monitor": "identity", "skipped": True,
                                   "reason": "fewer than three rows"})
            else:
                res = identity_residual(rows, params)
                integ = integrated_identity_residual(rows, params)
                summary["identity_max_residual"] = float(np.max(np.abs(res)))
                summary["identity_max_integrated"] = float(np.max(np.abs(integ)))
                _write_json(path, {"monitor": "identity",
                                   "max_abs_residual": summary["identity_max_residual"],
                                   "max_abs_integrated_residual": summary["identity_max_integrated"]})
        else:
            try:
                if name == "apriori":
                    rep = apriori_check(rows, norms, gn, params.kappa)
                elif name == "growth_envelope":
                    rep = growth_envelope_check(rows, norms, gn, params)
                else:
                    rep = v_bounds_check(rows, norms.v_linf, params.kappa, b["p"])
            except ValueError as exc:
                _write_json(path, {"bound": name, "skipped": True, "reason": str(exc)})
            else:
                rep.to_json(path)
                summary[f"{name}_passed"] = rep.passed
                if not rep.passed:
                    art.failed_bounds.append(name)
        art.bound_reports[name] = path
    if gn is not None:
        rep_dir.mkdir(exist_ok=True)
        gn.to_json(rep_dir / "gn_constants.json")
        art.bound_reports["gn_constants"] = rep_dir / "gn_constants.json"
    art.summary = summary
    return _finish(art, t0)


def _splitting_discrepancy(u0, v0, params, T, n_grid, pk) -> float:
    res = picard_iterate(u0, v0, params, T, n_grid=n_grid, **pk)
    split = evolve(SDState(0.0, u0, v0), T / n_grid, n_grid, params, keep_v=False)
    diff = split.coeffs - res.trajectory.coeffs
    return float(np.sqrt(np.sum(np.abs(diff) ** 2, axis=tuple(range(1, diff.ndim)))).max())


def run_picard(cfg: RunConfig, out_dir) -> RunArtifacts:
    """Picard fixed point, optional splitting cross-check and existence-time sweep."""
    t0 = time.perf_counter()
    art = _start(cfg, out_dir, "picard")
    b = cfg.block
    params = cfg.params
    u0, v0 = build_initial(cfg)
    pk = {k: b[k] for k in ("max_iter", "tol", "s", "p", "C")}
    res = picard_iterate(u0, v0, params, b["T"], n_grid=b["n_grid"], **pk)
    summary = res.to_dict()
    summary["u0_hs_norm"] = sobolev_norm(u0, b["s"])
    if b["compare_splitting"]:
        levels = [b["n_grid"], 2 * b["n_grid"]]
        disc = _pmap(lambda n: _splitting_discrepancy(u0, v0, params, b["T"], n, pk), levels)
        summary["splitting_discrepancy"] = {str(n): d for n, d in zip(levels, disc)}
        summary["splitting_ratio"] = disc[0] / disc[1] if disc[1] > 0 else None
    art.probe_reports["picard"] = _write_json(art.out_dir / "picard.json", summary)

    sw = b.get("sweep")
    if sw:
        def one(scale):
            u, v = (u0 * scale, v0) if sw["vary"] == "u" else (u0, v0 * scale)
            tol = sw["rtol"] * max(sobolev_norm(u, b["s"]), 1.0)
            t_star, rows = existence_time(u, v, params, sw["T_grid"], n_grid=sw["n_grid"],
                                          max_iter=sw["max_iter"], tol=tol, s=b["s"], p=b["p"])
            return {"scale": scale, "T_star": t_star, "scans": rows}
        table = _pmap(one, sw["scales"])
        t_stars = [r["T_star"] for r in table]
        art.tables["existence_sweep"] = _write_json(
            art.out_dir / "existence_sweep.json",
            {"vary": sw["vary"], "rows": table,
             "non_increasing": all(a >= c for a, c in zip(t_stars, t_stars[1:]))})
    art.summary = summary
    return _finish(art, t0)


def run_inequalities(cfg: RunConfig, out_dir) -> RunArtifacts:
    """Run the requested probes and write one JSON report per probe."""
    t0 = time.perf_counter()
    art = _start(cfg, out_dir, "inequalities")
    b = cfg.block
    m = build_manifold(cfg.raw["manifold"])
    summary: dict[str, Any] = {}
    if "admissible" in b:
        a = b["admissible"]
        rows = []
        for d in a["dims"]:
            for p in a["p"]:
                try:
                    q = admissible_q(d, p)
                except ValueError as exc:
                    rows.append({"d": d, "p": p, "q": None, "error": str(exc)})
                    continue
                rows.append({"d": d, "p": p, "q": q, "relation": 2 / p + d / q - d / 2,
                             "gamma_p": AdmissiblePair(d, p, q).gamma_p})
        art.tables["admissible"] = _write_json(art.out_dir / "admissible.json", rows)
    if "bilinear" in b:
        bl = b["bilinear"]
        reps = _pmap(lambda s: probe_bilinear_hs(m, bl["s"], bl["n"], s), bl["seeds"])
        for seed, rep in zip(bl["seeds"], reps):
            path = art.out_dir / f"bilinear_seed{seed}.json"
            rep.to_json(path)
            art.probe_reports[f"bilinear_{seed}"] = path
        summary["bilinear_max"] = {str(s): r.max_ratio for s, r in zip(bl["seeds"], reps)}
    if "strichartz" in b:
        st = b["strichartz"]
        pair = AdmissiblePair.from_p(m.dim, st["p"])
        rep = probe_strichartz(m, pair, st["T"], st["n"], st["seed"], st["n_time"])
        path = art.out_dir / "strichartz.json"
        rep.to_json(path)
        art.probe_reports["strichartz"] = path
        summary["strichartz_max"] = rep.max_ratio
    if "gn" in b:
        g = b["gn"]
        gn = estimate_gn_constants(m, g["n_fit"], g["n_holdout"], g["seed"], g["holdout_seed"])
        path = art.out_dir / "gn_constants.json"
        gn.to_json(path)
        art.probe_reports["gn"] = path
        summary["gn"] = {"A": gn.A, "B": gn.B, "C": gn.C, "violations": gn.violations}
        if gn.violations:
            art.failed_bounds.append("gn_holdout")
    art.summary = summary
    return _finish(art, t0)


def run_kappa_limit(cfg: RunConfig, out_dir) -> RunArtifacts:
    """Distance between Schrodinger-Debye runs and the cubic NLS reference as kappa shrinks.

    ``v0 = lambda |u0|^2`` puts the relaxation variable on its equilibrium
    from the start, so no initial layer pollutes the comparison.  Distances
    are reported without any claimed rate.
    """
    t0 = time.perf_counter()
    art = _start(cfg, out_dir, "kappa_limit")
    b = cfg.block
    u0, v0 = build_initial(cfg)
    lam = cfg.params.lam
    n = int(round(b["T"] / b["dt"]))
    ref = evolve_nls(u0, b["dt"], n, lam)

    def one(kappa):
        tr = evolve(SDState(0.0, u0, v0), b["dt"], n, SDParams(kappa, lam), keep_v=False)
        diff = tr.coeffs - ref.coeffs
        dist = np.sqrt(np.sum(np.abs(diff) ** 2, axis=tuple(range(1, diff.ndim))))
        return {"kappa": float(kappa), "sup_l2_distance": float(dist.max()),
                "terminal_l2_distance": float(dist[-1])}

    rows = _pmap(one, b["kappas"])
    art.tables["kappa_limit"] = _write_json(
        art.out_dir / "kappa_limit.json",
        {"T": b["T"], "dt": b["dt"], "lambda": lam, "rows": rows,
         "note": "v0 = lambda |u0|^2 (well-prepared); distances only, no rate is asserted"})
    art.summary = {"rows": rows}
    return _finish(art, t0)


_RUNNERS = {"simulate": run_simulate, "picard": run_picard,
            "inequalities": run_inequalities, "kappa_limit": run_kappa_limit}


def run(cfg: RunConfig, out_dir) -> RunArtifacts:
    return _RUNNERS[cfg.scenario](cfg, out_dir)
