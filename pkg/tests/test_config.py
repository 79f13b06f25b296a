import numpy as np
import pytest

import dptomo as dp
from dptomo.core.config import DEFAULT_NOISE_SIGMAS

minimal = """
experiment: represent
state_specs:
  - fock:1
"""


def test_defaults():
    config = dp.validate_config(minimal)
    assert config.experiment == "represent"
    assert config.state_specs == ("fock:1",)
    assert config.space == dp.HilbertSpec(modes=1, truncation=12)
    assert config.grids == (dp.GridSpec(kind="square", N=6, d=0.15),)
    assert config.measurement is None
    assert config.solver == dp.SolverConfig()
    assert config.n_rep_list == (1000, 10000, 100000, 1000000)
    assert config.noise_sigmas[0] == 0
    assert len(config.noise_sigmas) == len(DEFAULT_NOISE_SIGMAS)
    assert (config.trials, config.master_seed, config.threads) == (1, 0, 1)
    assert config.output_path == "represent.csv"
    assert not config.raw and not config.dump_states


def test_two_mode_defaults():
    config = dp.validate_config("experiment: witness_table")
    assert config.space == dp.HilbertSpec(modes=2, truncation=10)
    assert config.state_specs == tuple(dp.zoo.suites.TWO_MODE)
    # 7 x 7 nodes per mode, M = K = 7^4
    assert config.grids[0].N == 7
    assert config.grids[0].N ** 4 == 2401

    config = dp.validate_config({"state_specs": ["bell_psi"]})
    assert config.space.modes == 2


def test_error_names_field_and_line():
    text = """
experiment: reconstruct_sweep
state_specs: ["fock:1"]
n_rep_list: [1000, -5]
"""
    with pytest.raises(dp.ConfigError) as e:
        dp.validate_config(text)
    assert e.value.field == "n_rep_list"
    assert e.value.line == 4
    assert "line 4" in str(e.value)


def test_nested_error_line():
    text = """
state_specs: ["fock:1"]
grid:
  kind: square
  N: 0
"""
    with pytest.raises(dp.ConfigError) as e:
        dp.validate_config(text)
    assert e.value.field == "grid.N"
    assert e.value.line == 5


@pytest.mark.parametrize(
    "text,field",
    [
        ("colour: blue", "colour"),
        ("experiment: tomography", "experiment"),
        ("state_specs: ['fock:1']\ntrials: 0", "trials"),
        ("state_specs: ['fock:1']\ntrials: two", "trials"),
        ("state_specs: ['fock:1']\nraw: 1", "raw"),
        ("state_specs: ['fock:1']\nmaster_seed: -1", "master_seed"),
        ("state_specs: ['fock:1']\nnoise_sigmas: [0.1, -0.1]", "noise_sigmas"),
        ("state_specs: ['fock:1']\nnoise_sigmas: []", "noise_sigmas"),
        ("state_specs: ['fock:1']\ngrid: {N: []}", "grid.N"),
        ("state_specs: ['fock:1']\ngrid: {kind: hexagonal}", "grid.kind"),
        ("state_specs: ['fock:1']\ngrid: {spacing: 0.1}", "grid.spacing"),
        ("state_specs: ['fock:1']\nsolver: {coeff_bound: 0}", "solver"),
        ("state_specs: ['fock:1']\nsolver: {max_iterations: 1.5}", "solver.max_iterations"),
        ("state_specs: ['fock:1']\nspace: {modes: 3}", "space.modes"),
        ("state_specs: ['fock:1', bell_psi]", "state_specs"),
        ("state_specs: [fock]", "state_specs"),
        ("state_specs: []", "state_specs"),
        ("experiment: witness_table\nstate_specs: ['fock:1']", "space.modes"),
        ("grid: {kind: helical, dphi: 3 meter}", "grid.dphi"),
    ],
)
def test_invalid_fields(text, field):
    with pytest.raises(dp.ConfigError) as e:
        dp.validate_config(text)
    assert e.value.field == field


def test_grid_sweeps():
    config = dp.validate_config(
        {
            "experiment": "represent_sweep",
            "state_specs": ["fock:1"],
            "grid": {"N": [3, 4], "d": [0.1, 0.2]},
        }
    )
    assert [(g.N, g.d) for g in config.grids] == [(3, 0.1), (3, 0.2), (4, 0.1), (4, 0.2)]

    config = dp.validate_config(
        {
            "experiment": "represent_sweep",
            "state_specs": ["fock:1"],
            "grid": [{"kind": "square", "N": 3}, {"kind": "helical", "N": 9}],
        }
    )
    assert [(g.kind, g.N) for g in config.grids] == [("square", 3), ("helical", 9)]
    assert config.grids[1].dr == 0.016

    with pytest.raises(dp.ConfigError, match="single grid"):
        dp.validate_config({"state_specs": ["fock:1"], "grid": {"N": [3, 4]}})


@pytest.mark.parametrize("dphi", ["pi/4", "45 degree", 0.7853981633974483])
def test_angles(dphi):
    config = dp.validate_config({"grid": {"kind": "helical", "dphi": dphi}})
    assert config.grids[0].dphi == pytest.approx(np.pi / 4)


def test_json_text():
    text = '{"experiment": "purity_table", "state_specs": ["bell_phi"], "trials": 2}'
    config = dp.validate_config(text)
    assert config.experiment == "purity_table"
    assert config.trials == 2


def test_yaml_round_trip():
    config = dp.validate_config(
        {
            "experiment": "reconstruct_sweep",
            "state_specs": ["coherent:0.5", "mix01:p=0.3"],
            "grid": {"kind": "helical", "N": 9, "dr": 0.05, "dphi": "pi/3"},
            "measurement": {"N": 4, "d": 0.3},
            "solver": {"coeff_bound": 50, "max_iterations": 300},
            "n_rep_list": [0, 100],
            "trials": 3,
            "master_seed": 9,
        }
    )
    assert dp.validate_config(config.yaml()) == config
    assert dp.validate_config(config.json()) == config


def test_override():
    config = dp.validate_config(minimal)
    assert config.override(master_seed=None) is config
    changed = config.override(experiment="purity_table", master_seed=5, threads=2)
    assert changed.experiment == "purity_table"
    assert changed.master_seed == 5
    assert changed.threads == 2
    assert changed.state_specs == config.state_specs
    with pytest.raises(dp.ConfigError):
        config.override(threads=0)


def test_measurement_warns_outside_reconstruction():
    with pytest.warns(UserWarning, match="no effect"):
        dp.validate_config({"state_specs": ["fock:1"], "measurement": {"N": 4}})


def test_load_config(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(minimal)
    assert dp.load_config(path) == dp.validate_config(minimal)

    config = dp.load_config("zoo:helical_mixed")
    assert config.experiment == "represent_sweep"
    assert config.grids[0].kind == "helical"

    with pytest.raises(dp.ConfigError):
        dp.load_config("zoo:nothing")
    with pytest.raises(dp.ConfigError):
        dp.load_config(tmp_path / "missing.yaml")

    path.write_text("experiment: [unclosed")
    with pytest.raises(dp.ConfigError):
        dp.load_config(path)


@pytest.mark.parametrize("name", sorted(dp.zoo.presets.PRESETS))
def test_presets_validate(name):
    config = dp.load_config(f"zoo:{name}")
    assert config.experiment in dp.core.config.EXPERIMENTS


def test_exponent_floats():
    config = dp.validate_config('{"solver": {"primal_tol": 1e-7, "dual_tol": 1E-9}}')
    assert config.solver.primal_tol == 1e-7
    assert config.solver.dual_tol == 1e-9

    config = dp.validate_config("noise_sigmas: [0, 1e-4, 5e-2]\nsolver: {coeff_bound: 1e3}")
    assert config.noise_sigmas == (0.0, 1e-4, 5e-2)
    assert config.solver.coeff_bound == 1000

    # json.dumps writes 1e-07
    config = config.override(solver=dict(primal_tol=1e-7, dual_tol=1e-7))
    assert '"primal_tol": 1e-07' in config.json()
    assert dp.validate_config(config.json()) == config


def test_grid_must_fit_the_truncation():
    text = """
state_specs: ["fock:1"]
space: {modes: 1, truncation: 6}
grid: {kind: square, N: 3, d: 0.3}
"""
    with pytest.raises(dp.ConfigError, match="truncation") as e:
        dp.validate_config(text)
    assert e.value.field == "grid"
    assert e.value.line == 4

    fits = text.replace("truncation: 6", "truncation: 8")
    assert dp.validate_config(fits).grids[0].N == 3

    with pytest.raises(dp.ConfigError) as e:
        dp.validate_config(
            {
                "experiment": "reconstruct_sweep",
                "state_specs": ["fock:1"],
                "space": {"truncation": 8},
                "measurement": {"N": 9, "d": 0.5},
            }
        )
    assert e.value.field == "measurement"
