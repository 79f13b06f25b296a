import pandas as pd
import pytest

from dptomo.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, main

tiny = """
experiment: represent
state_specs: ["fock:1", "superpos01"]
space: {modes: 1, truncation: 8}
grid: {kind: square, N: 3, d: 0.3}
solver: {max_iterations: 300}
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(tiny)
    return path


def test_bad_config(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("experiment: represent\ntrials: 0\n")
    assert main(["represent", str(path), "--no-log-file"]) == EXIT_CONFIG
    assert main(["represent", str(tmp_path / "missing.yaml"), "--no-log-file"]) == EXIT_CONFIG


def test_grid(config_file, tmp_path):
    output = tmp_path / "grid.csv"
    assert main(["grid", str(config_file), "--output", str(output)]) == EXIT_OK
    layout = pd.read_csv(output)
    assert list(layout.columns) == ["xi", "mode", "re", "im"]
    assert len(layout) == 9


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_run(config_file, tmp_path, capsys):
    output = tmp_path / "out" / "represent.csv"
    code = main(
        [
            "represent",
            str(config_file),
            "--output",
            str(output),
            "--raw",
            "--plot-data",
            str(tmp_path / "plots"),
            "--chart",
            str(tmp_path / "chart.json"),
            "--no-log-file",
        ]
    )
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    results = pd.read_csv(output)
    assert list(results["state"]) == ["fock:1", "superpos01"]
    assert (tmp_path / "out" / "represent.raw.csv").exists()
    assert (tmp_path / "chart.json").exists()
    assert any((tmp_path / "plots").iterdir())
    assert "superpos01" in capsys.readouterr().out


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_subcommand_overrides_experiment(config_file, tmp_path):
    output = tmp_path / "purity.csv"
    args = ["purity-table", str(config_file), "--output", str(output), "--no-log-file"]
    code = main(args + ["--seed", "4", "--threads", "2"])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    assert "target_purity" in pd.read_csv(output).columns


def test_grid_too_large_for_the_truncation(tmp_path):
    path = tmp_path / "wide.yaml"
    path.write_text(tiny.replace("truncation: 8", "truncation: 6"))
    output = tmp_path / "grid.csv"
    assert main(["grid", str(path), "--output", str(output)]) == EXIT_CONFIG
    assert main(["represent", str(path), "--no-log-file"]) == EXIT_CONFIG
    assert not output.exists()
