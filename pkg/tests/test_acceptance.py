"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; the lines are repeated in
the terminal summary.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from _oracles import plane_wave_phase
from conftest import ACCEPTANCE_LINES
from sdebye.dynamics import SDParams, SDState, evolve, linear_substep
from sdebye.experiment import build_initial, load_config, run
from sdebye.inequalities import estimate_gn_constants, random_field, sample_rng
from sdebye.manifold import GridField, SpectralField, Sphere2, Torus, analyze, sobolev_norm, synthesize
from sdebye.monitors import (
    DiagnosticsRecorder,
    InitialNorms,
    apriori_check,
    apriori_horizon,
    growth_envelope_check,
    identity_residual,
    integrated_identity_residual,
    relative_mass_drift,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
UNIT = SDParams(1.0, 1)


def verdict(number, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def rows_of(state, dt, n, params, every=1):
    rec = DiagnosticsRecorder()
    evolve(state, dt, n, params, record_every=every, observer=rec, keep_v=False)
    return rec.rows


@pytest.fixture(scope="module")
def smooth_rows():
    cfg = load_config(CONFIGS / "smooth.yaml")
    u0, v0 = build_initial(cfg)
    s = SDState(0.0, u0, v0)
    return {dt: rows_of(s, dt, int(round(1.0 / dt)), cfg.params) for dt in (2e-3, 1e-3, 5e-4)}, cfg.params


@pytest.fixture(scope="module")
def gn16():
    t0 = time.perf_counter()
    gn = estimate_gn_constants(Torus.square(16), 2000, 10_000, seed=1, holdout_seed=2)
    return gn, time.perf_counter() - t0


def test_criterion_01_plane_wave():
    cfg = load_config(CONFIGS / "plane_wave.yaml")
    u0, v0 = build_initial(cfg)
    x = u0.manifold.nodes[0]
    worst = [0.0]

    def obs(s):
        theta = -2 * s.t + 1 - math.exp(-s.t)
        worst[0] = max(worst[0], float(np.abs(synthesize(s.u).values - np.exp(1j * (x + theta))).max()))

    t0 = time.perf_counter()
    evolve(SDState(0.0, u0, v0), 1e-3, 1000, cfg.params, record_every=1000, observer=obs, keep_v=False)
    elapsed = time.perf_counter() - t0
    ode_theta, _ = plane_wave_phase(1.0)
    closed_ok = abs(ode_theta - (-2 + 1 - math.exp(-1))) < 1e-10
    verdict(1, "plane-wave oracle", worst[0] <= 1e-9 and elapsed < 5 and closed_ok,
            f"sup node error {worst[0]:.2e} (<= 1e-9), runtime {elapsed:.2f}s (< 5s)")


def test_criterion_02_mass(smooth_rows):
    rows, _ = smooth_rows
    smooth = relative_mass_drift(rows[1e-3])
    cfg = load_config(CONFIGS / "plane_wave.yaml")
    u0, v0 = build_initial(cfg)
    single = relative_mass_drift(rows_of(SDState(0.0, u0, v0), 1e-3, 1000, cfg.params))
    verdict(2, "mass conservation", smooth <= 1e-7 and single <= 1e-12,
            f"smooth N=32 drift {smooth:.2e} (<= 1e-7), single mode {single:.2e} (<= 1e-12)")


def test_criterion_03_identity(smooth_rows):
    rows, params = smooth_rows
    worst = [float(np.max(np.abs(identity_residual(rows[dt], params)))) for dt in (2e-3, 1e-3, 5e-4)]
    ratios = [worst[0] / worst[1], worst[1] / worst[2]]
    integ = float(np.max(np.abs(integrated_identity_residual(rows[5e-4], params))))
    ok = all(3.4 <= r <= 4.6 for r in ratios) and integ <= 1e-6
    verdict(3, "pseudo-energy identity", ok,
            f"halving ratios {ratios[0]:.3f}, {ratios[1]:.3f} (in [3.4, 4.6]), "
            f"integral residual {integ:.2e} (<= 1e-6)")


def test_criterion_04_gn(gn16):
    gn, elapsed = gn16
    ok = gn.violations == 0 and gn.B >= 1 / (4 * math.pi**2) and elapsed < 60
    verdict(4, "GN constants", ok,
            f"A={gn.A:.4f} B={gn.B:.5f} holdout violations {gn.violations}, runtime {elapsed:.1f}s")


def test_criterion_05_apriori_ensemble(gn16):
    gn, _ = gn16
    m = Torus.square(16)
    worst, horizons, failed = math.inf, [], 0
    lams = []
    for i in range(20):
        rng = sample_rng(11, i)
        lam = 1 if i % 2 == 0 else -1
        lams.append(lam)
        u0 = random_field(m, rng, decay=3, max_mode=6) * rng.uniform(0.5, 4.0)
        w = np.abs(synthesize(random_field(m, rng, decay=3, max_mode=6)).values) ** 2
        v0 = GridField(m, rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 10.0) * w)
        norms = InitialNorms.of(u0, v0)
        T = apriori_horizon(norms, gn.C, 1.0)
        n = max(2, math.ceil(T / 1e-3))
        rep = apriori_check(rows_of(SDState(0.0, u0, v0), T / n, n, SDParams(1.0, lam)),
                            norms, gn, 1.0)
        horizons.append(T)
        failed += not rep.passed
        worst = min(worst, rep.min_slack / rep.constants["bound"])
    ok = failed == 0 and set(lams) == {-1, 1}
    verdict(5, "a-priori H1 bound", ok,
            f"20 runs, {failed} failed, min relative slack {worst:.3f}, "
            f"horizons {min(horizons):.3g}..{max(horizons):.3g}")


def test_criterion_06_growth_envelope(gn16):
    gn, _ = gn16
    m = Torus.square(16)
    worst, failed = math.inf, 0
    for i in range(5):
        rng = sample_rng(12, i)
        u0 = random_field(m, rng, decay=3, max_mode=6) * rng.uniform(0.5, 3.0)
        w = np.abs(synthesize(random_field(m, rng, decay=3, max_mode=6)).values) ** 2
        v0 = GridField(m, rng.uniform(0.1, 5.0) * w)
        rep = growth_envelope_check(rows_of(SDState(0.0, u0, v0), 1e-3, 5000, UNIT),
                                    InitialNorms.of(u0, v0), gn, UNIT)
        failed += not rep.passed
        worst = min(worst, rep.min_slack)
    verdict(6, "growth envelope", failed == 0,
            f"5 runs to t=5, {failed} failed, min slack {worst:.3e}")


def test_criterion_07_picard(tmp_path):
    art = run(load_config(CONFIGS / "picard_small.yaml"), tmp_path)
    res = json.loads((tmp_path / "picard.json").read_text())
    sweep = json.loads((tmp_path / "existence_sweep.json").read_text())
    t_stars = [r["T_star"] for r in sweep["rows"]]
    ratio = res["splitting_ratio"]
    ok = (res["converged"] and res["rho"] < 1 and res["iterations"] <= 15
          and 3.4 <= ratio <= 4.6 and sweep["non_increasing"] and t_stars[0] > t_stars[-1])
    verdict(7, "Picard mode", ok,
            f"{res['iterations']} iterations, rho {res['rho']:.2e}, splitting ratio {ratio:.3f}, "
            f"existence times {t_stars}")
    assert art.summary["u0_hs_norm"] == pytest.approx(0.1)


def test_criterion_08_kappa_limit(tmp_path):
    art = run(load_config(CONFIGS / "kappa_limit.yaml"), tmp_path)
    rows = json.loads(art.tables["kappa_limit"].read_text())["rows"]
    assert [r["kappa"] for r in rows] == [1.0, 0.3, 0.1, 0.03]
    first, last = rows[0]["terminal_l2_distance"], rows[-1]["terminal_l2_distance"]
    ok = last < first and rows[-1]["sup_l2_distance"] < rows[0]["sup_l2_distance"]
    verdict(8, "kappa limit", ok,
            "sup distances " + ", ".join(f"{r['sup_l2_distance']:.4g}" for r in rows)
            + f"; terminal {first:.4g} -> {last:.4g}")


def test_criterion_09_sphere(tmp_path):
    s = Sphere2(16)
    rng = np.random.default_rng(7)
    c = np.where(s.mode_mask, rng.standard_normal(s.coeff_shape) + 1j * rng.standard_normal(s.coeff_shape), 0)
    f = SpectralField(s, c)
    round_trip = float(np.abs(analyze(synthesize(f)).coeffs - c).max())
    h1 = sobolev_norm(f, 1)
    prop = max(abs(sobolev_norm(linear_substep(f, t), 1) - h1) / h1 for t in (0.1, 1.0, 7.3))

    cfg = load_config(CONFIGS / "sphere_constant.yaml")
    u0, v0 = build_initial(cfg)
    worst = [0.0]

    def obs(st):
        theta = -st.t + 1 - math.exp(-st.t)
        worst[0] = max(worst[0], float(np.abs(synthesize(st.u).values - np.exp(1j * theta)).max()))

    evolve(SDState(0.0, u0, v0), 1e-3, 1000, cfg.params, record_every=1000, observer=obs, keep_v=False)
    art = run(cfg, tmp_path)
    ok = round_trip <= 1e-10 and prop <= 1e-12 and worst[0] <= 1e-9 and art.summary["mass_drift"] <= 1e-12
    verdict(9, "sphere backend", ok,
            f"round trip {round_trip:.2e}, H1 drift {prop:.2e}, constant-field error {worst[0]:.2e}")


def _numeric_fields(path):
    return [line.split(",") for line in Path(path).read_text().splitlines()[1:]]


def test_criterion_10_determinism(tmp_path):
    same = []
    for name in ("plane_wave.yaml", "smooth.yaml", "sphere_constant.yaml"):
        a = run(load_config(CONFIGS / name), tmp_path / name / "a")
        b = run(load_config(tmp_path / name / "a" / "config.yaml"), tmp_path / name / "b")
        same.append(_numeric_fields(a.diagnostics_csv) == _numeric_fields(b.diagnostics_csv))
        for key, path in a.bound_reports.items():
            same.append(path.read_text() == b.bound_reports[key].read_text())
    k = [run(load_config(CONFIGS / "kappa_limit.yaml"), tmp_path / f"k{i}") for i in range(2)]
    same.append(k[0].tables["kappa_limit"].read_text() == k[1].tables["kappa_limit"].read_text())
    g = [estimate_gn_constants(Torus.square(8), 200, 500, seed=4, holdout_seed=5) for _ in range(2)]
    same.append(g[0] == g[1])
    verdict(10, "determinism", all(same), f"{sum(same)}/{len(same)} replayed artifacts identical")
