import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from sdebye import cli
from sdebye.experiment import (
    ConfigError,
    RunConfig,
    build_initial,
    load_config,
    run,
    workers,
)
from sdebye.inequalities import GNConstants, admissible_q
from sdebye.manifold import load_field, sobolev_norm, synthesize

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def base(**over):
    d = {"schema_version": 1, "seed": 0, "manifold": {"kind": "torus", "cutoff": 8},
         "simulate": {"dt": 0.01, "t_end": 0.2}}
    d.update(over)
    return d


def csv_numbers(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh)]


@pytest.fixture
def tiny_gn(tmp_path):
    path = tmp_path / "gn.json"
    GNConstants(1e-6, 1e-6, 0.0, 0, 0, 0, 0, 0, {"kind": "torus"}).to_json(path)
    return path


# --- config validation ---------------------------------------------------------------


@pytest.mark.parametrize("bad", [
    {"schema_version": 2},
    {"seed": "x"},
    {"seed": True},
    {"manifold": {"kind": "klein", "cutoff": 4}},
    {"manifold": {"kind": "torus", "cutoff": 0}},
    {"manifold": {"kind": "torus", "cutoff": 4, "dim": 4}},
    {"manifold": {"kind": "sphere2", "cutoff": 4, "radius": -1}},
    {"params": {"kappa": 0}},
    {"params": {"lambda": 2}},
    {"simulate": {"dt": 0.03, "t_end": 0.1}},
    {"simulate": {"dt": -0.01, "t_end": 0.1}},
    {"simulate": {"dt": 0.01, "t_end": 0.1, "p": 2}},
    {"monitors": ["energy"]},
    {"initial": {"u0": {"type": "well_prepared"}}},
    {"initial": {"u0": {"type": "modes", "modes": []}}},
    {"initial": {"u0": {"type": "random", "norm": {"h2": 1}}}},
    {"initial": {"v0": {"type": "constant", "value": [0, 1]}}},
    {"extra": 1},
    {"picard": {"T": 0.5}},
    {"gn_constants": {"file": "/nonexistent/gn.json"}},
])
def test_invalid_configs(tmp_path, bad):
    with pytest.raises(ConfigError):
        cfg = RunConfig.from_dict(base(**bad))
        build_initial(cfg)


@pytest.mark.parametrize("bad", [
    {"picard": {"T": 1.5}},
    {"picard": {"n_grid": 8}},
    {"kappa_limit": {"kappas": [0.1, 1.0]}},
    {"kappa_limit": {"T": 1.0, "dt": 0.3}},
    {"inequalities": {}},
    {"inequalities": {"strichartz": {"T": 2.0}}},
])
def test_invalid_scenario_blocks(bad):
    d = base(**bad)
    del d["simulate"]
    with pytest.raises(ConfigError):
        RunConfig.from_dict(d)


def test_kappa_limit_needs_well_prepared_data():
    d = base(kappa_limit={}, initial={"v0": {"type": "zero"}})
    del d["simulate"]
    with pytest.raises(ConfigError):
        RunConfig.from_dict(d)


def test_monitors_only_for_simulate():
    d = base(picard={}, monitors=["mass"])
    del d["simulate"]
    with pytest.raises(ConfigError):
        RunConfig.from_dict(d)


def test_missing_file_and_bad_yaml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    p = tmp_path / "bad.yaml"
    p.write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_defaults_are_filled_and_echo_round_trips(tmp_path):
    cfg = RunConfig.from_dict(base(monitors=["apriori"]))
    assert cfg.raw["params"] == {"kappa": 1.0, "lambda": 1}
    assert cfg.raw["initial"]["u0"] == {"type": "zero"}
    assert cfg.raw["gn_constants"]["fit"]["seed"] == 1
    assert RunConfig.from_yaml(cfg.to_yaml()) == cfg


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_parse_and_echo(name):
    cfg = load_config(CONFIGS / name)
    again = RunConfig.from_yaml(cfg.to_yaml())
    assert again == cfg


def test_initial_data_builders():
    cfg = RunConfig.from_dict(base(initial={
        "u0": {"type": "random", "max_mode": 3, "norm": {"h1": 0.5}},
        "v0": {"type": "random", "nonnegative": True, "norm": {"l2": 2.0}}}))
    u0, v0 = build_initial(cfg)
    m = u0.manifold
    assert sobolev_norm(u0, 1) == pytest.approx(0.5)
    assert np.all(v0.values.real >= 0)
    assert math.sqrt(np.sum(m.weights * v0.values.real**2)) == pytest.approx(2.0)

    cfg = RunConfig.from_dict(base(params={"lambda": -1}, initial={
        "u0": {"type": "modes", "basis": "plane_wave", "modes": [{"index": [1, 0], "value": [0, 1]}]},
        "v0": {"type": "well_prepared"}}))
    u0, v0 = build_initial(cfg)
    assert np.abs(synthesize(u0).values - 1j * np.exp(1j * m.nodes[0])).max() < 1e-13
    assert np.abs(v0.values + 1).max() < 1e-13


def test_workers_env(monkeypatch):
    monkeypatch.delenv("SDEBYE_WORKERS", raising=False)
    assert workers() == 1
    monkeypatch.setenv("SDEBYE_WORKERS", "3")
    assert workers() == 3
    monkeypatch.setenv("SDEBYE_WORKERS", "many")
    with pytest.raises(ConfigError):
        workers()


# --- simulate ------------------------------------------------------------------------


def test_simulate_zero_data(tmp_path):
    cfg = RunConfig.from_dict(base(monitors=["mass", "identity", "v_bounds"]))
    art = run(cfg, tmp_path)
    rows = csv_numbers(art.diagnostics_csv)
    assert len(rows) == 22
    for row in rows[1:]:
        assert [float(x) for x in row[1:7]] == [0.0] * 6
    assert json.loads(art.bound_reports["v_bounds"].read_text())["passed"]
    assert all(p.exists() for p in art.paths())
    assert (tmp_path / "artifacts.json").exists()


def test_simulate_plane_wave_snapshots(tmp_path):
    art = run(load_config(CONFIGS / "plane_wave.yaml"), tmp_path)
    assert len(art.snapshots) == 11
    m = load_field(art.snapshots[0]).manifold
    for i, path in enumerate(art.snapshots):
        t = i * 0.1
        theta = -2 * t + 1 - math.exp(-t)
        u = synthesize(load_field(path)).values
        assert np.abs(u - np.exp(1j * (m.nodes[0] + theta))).max() <= 1e-9
    assert art.summary["mass_drift"] <= 1e-12


def test_simulate_skips_monitor_with_violated_preconditions(tmp_path, tiny_gn):
    cfg = RunConfig.from_dict(base(params={"lambda": -1}, monitors=["growth_envelope"],
                                   gn_constants={"file": str(tiny_gn)}))
    art = run(cfg, tmp_path)
    rep = json.loads(art.bound_reports["growth_envelope"].read_text())
    assert rep["skipped"] and "lambda" in rep["reason"]
    assert not art.failed_bounds


def test_simulate_is_deterministic(tmp_path):
    d = base(seed=11, initial={"u0": {"type": "random", "max_mode": 4, "norm": {"l2": 2.0}},
                                "v0": {"type": "random", "max_mode": 4}},
             monitors=["mass", "identity"])
    a = run(RunConfig.from_dict(d), tmp_path / "a")
    b = run(load_config(tmp_path / "a" / "config.yaml"), tmp_path / "b")
    assert a.diagnostics_csv.read_bytes() == b.diagnostics_csv.read_bytes()


def test_rejects_wrong_scenario(tmp_path):
    from sdebye.experiment import run_picard
    with pytest.raises(ConfigError):
        run_picard(RunConfig.from_dict(base()), tmp_path)


# --- other scenarios ------------------------------------------------------------------


def test_picard_zero_data(tmp_path):
    d = base(picard={"n_grid": 16, "compare_splitting": False})
    del d["simulate"]
    art = run(RunConfig.from_dict(d), tmp_path)
    res = json.loads(art.probe_reports["picard"].read_text())
    assert res["iterations"] == 1 and res["converged"]


def test_picard_small_sweep(tmp_path):
    d = base(manifold={"kind": "torus", "cutoff": 8}, seed=5,
             initial={"u0": {"type": "random", "max_mode": 4, "norm": {"h1": 10.0}}},
             picard={"T": 0.5, "n_grid": 32, "compare_splitting": False,
                     "sweep": {"scales": [1, 2, 4], "n_grid": 32}})
    del d["simulate"]
    art = run(RunConfig.from_dict(d), tmp_path)
    table = json.loads(art.tables["existence_sweep"].read_text())
    assert table["non_increasing"]
    assert [r["scale"] for r in table["rows"]] == [1, 2, 4]


def test_kappa_limit_zero_data(tmp_path):
    d = base(kappa_limit={"T": 0.1, "dt": 0.01})
    del d["simulate"]
    art = run(RunConfig.from_dict(d), tmp_path)
    rows = json.loads(art.tables["kappa_limit"].read_text())["rows"]
    assert [r["kappa"] for r in rows] == [1.0, 0.3, 0.1, 0.03]
    assert all(r["sup_l2_distance"] == 0 for r in rows)


def test_kappa_limit_plane_wave_dual_oracle(tmp_path):
    # both flows keep the plane wave; NLS phase is -(1 + 1) t, SD phase with v0 = 1 is -2t too
    d = base(kappa_limit={"T": 0.5, "dt": 0.01, "kappas": [1.0, 0.1]},
             initial={"u0": {"type": "modes", "basis": "plane_wave",
                             "modes": [{"index": [1, 0], "value": 1.0}]}})
    del d["simulate"]
    art = run(RunConfig.from_dict(d), tmp_path)
    rows = json.loads(art.tables["kappa_limit"].read_text())["rows"]
    assert all(r["sup_l2_distance"] <= 1e-10 for r in rows)


def test_inequalities_admissible_table(tmp_path):
    d = base(inequalities={"admissible": {"dims": [2, 3], "p": [2.5, 3, 4, 8]}})
    del d["simulate"]
    art = run(RunConfig.from_dict(d), tmp_path)
    rows = json.loads(art.tables["admissible"].read_text())
    assert len(rows) == 8
    for r in rows:
        assert r["q"] == pytest.approx(admissible_q(r["d"], r["p"]))
        assert abs(r["relation"]) <= 1e-12


# --- CLI -----------------------------------------------------------------------------


def write_cfg(tmp_path, d, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return p


def test_cli_success(tmp_path, capsys):
    p = write_cfg(tmp_path, base(monitors=["mass"]))
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["diagnostics_csv"] == "diagnostics.csv"


def test_cli_config_error(tmp_path, capsys):
    p = write_cfg(tmp_path, base(schema_version=9))
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "schema_version" in capsys.readouterr().err
    p = write_cfg(tmp_path, base(), "d.yaml")
    assert cli.main(["picard", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_cli_strict_bound_failure(tmp_path, tiny_gn):
    d = base(seed=0, initial={"u0": {"type": "random", "max_mode": 4, "norm": {"l2": 3.0}}},
             simulate={"dt": 0.01, "t_end": 1.0}, monitors=["growth_envelope"],
             gn_constants={"file": str(tiny_gn)})
    p = write_cfg(tmp_path, d)
    args = ["simulate", "--config", str(p), "--out", str(tmp_path / "o")]
    assert cli.main(args) == 0
    assert cli.main(args + ["--strict"]) == 3


def test_cli_relative_gn_file(tmp_path, tiny_gn):
    d = base(monitors=["apriori"], gn_constants={"file": tiny_gn.name})
    p = write_cfg(tmp_path, d)
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 0


def test_cli_workers_give_same_tables(tmp_path, monkeypatch):
    d = base(kappa_limit={"T": 0.2, "dt": 0.01},
             initial={"u0": {"type": "random", "max_mode": 3, "norm": {"l2": 1.0}}})
    del d["simulate"]
    p = write_cfg(tmp_path, d)
    tables = []
    for n in ("1", "4"):
        monkeypatch.setenv("SDEBYE_WORKERS", n)
        out = tmp_path / f"w{n}"
        assert cli.main(["kappa-limit", "--config", str(p), "--out", str(out)]) == 0
        tables.append((out / "kappa_limit.json").read_text())
    assert tables[0] == tables[1]
