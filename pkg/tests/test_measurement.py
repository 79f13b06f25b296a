import numpy as np
import pytest

import dptomo as dp
from dptomo.core.seeding import derive_seed, generator, stream_key, uniforms

space = dp.HilbertSpec(modes=1, truncation=25)
grid = dp.GridSpec(N=3, d=0.3)


def test_projecting_onto_own_setting():
    meas = dp.MeasurementSet.from_grid(grid, space)
    assert meas.K == len(meas) == 9
    for j, sigma in enumerate(meas.povm):
        assert dp.probabilities(sigma, meas).values[j] == pytest.approx(1, abs=1e-12)


def test_coherent_probabilities():
    # |<beta|alpha>|^2 = exp(-|alpha - beta|^2)
    meas = dp.MeasurementSet.from_grid(grid, space)
    betas = np.array([s[0].value for s in meas.settings])
    pattern = dp.probabilities(dp.named_state("coherent:0.3", space), meas)
    assert pattern.kind == "probability"
    assert pattern.n_rep == 0
    assert np.allclose(pattern.values, np.exp(-np.abs(0.3 - betas) ** 2), atol=1e-8)

    # |<beta|1>|^2 = |beta|^2 exp(-|beta|^2), which vanishes at the origin
    pattern = dp.probabilities(dp.named_state("fock:1", space), meas)
    assert pattern.values[4] == pytest.approx(0, abs=1e-12)
    expected = np.abs(betas) ** 2 * np.exp(-np.abs(betas) ** 2)
    assert np.allclose(pattern.values, expected, atol=1e-8)

    with pytest.raises(ValueError):
        dp.probabilities(dp.named_state("fock:1"), meas)


def test_sampling_edges_and_determinism():
    exact = dp.DataPattern(np.array([0.0, 0.3, 1.0]))
    sampled = dp.sample_pattern(exact, 50, seed=7)
    assert sampled.kind == "frequency"
    assert sampled.n_rep == 50
    assert sampled.seed == 7
    assert sampled.values[0] == 0
    assert sampled.values[2] == 1
    assert np.array_equal(sampled.values, dp.sample_pattern(exact, 50, seed=7).values)

    # each value depends only on its own setting
    other = dp.sample_pattern(dp.DataPattern(np.array([0.5, 0.3, 0.2])), 50, seed=7)
    assert other.values[1] == sampled.values[1]

    with pytest.raises(ValueError):
        dp.sample_pattern(sampled, 50, seed=7)
    with pytest.raises(ValueError):
        dp.sample_pattern(exact, 0, seed=7)


def test_sampling_mean():
    p = np.array([0.0, 0.1, 0.5, 0.9, 1.0])
    n_rep, seeds = 100, 1000
    exact = dp.DataPattern(p)
    draws = np.array([dp.sample_pattern(exact, n_rep, seed).values for seed in range(seeds)])
    sigma = np.sqrt(p * (1 - p) / (n_rep * seeds))
    assert np.all(np.abs(draws.mean(axis=0) - p) <= 4 * sigma + 1e-12)
    # and the spread of single draws matches the binomial
    spread = np.sqrt(p * (1 - p) / n_rep)
    assert np.allclose(draws.std(axis=0), spread, rtol=0.15, atol=1e-12)


def test_sampling_large_n_rep():
    p = np.array([0.05, 0.5, 0.95])
    n_rep = 1_000_000
    exact = dp.DataPattern(p)
    sigma = np.sqrt(p * (1 - p) / n_rep)
    for seed in range(100):
        values = dp.sample_pattern(exact, n_rep, seed).values
        assert np.all(np.abs(values - p) <= 5 * sigma)


def test_probe_patterns():
    basis = dp.ProbeBasis.coherent(grid, space)
    meas = dp.MeasurementSet.matching(basis)
    exact = dp.probe_patterns(basis, meas, 0, seed=1)
    assert len(exact) == basis.M
    for xi, pattern in enumerate(exact):
        assert np.allclose(pattern.values, basis.gram[:, xi], atol=1e-10)

    sampled = dp.probe_patterns(basis, meas, 200, seed=1)
    assert all(p.kind == "frequency" and p.n_rep == 200 for p in sampled)
    assert len({p.seed for p in sampled}) == basis.M
    assert sampled[3].seed == derive_seed(1, "probe", 3)

    with pytest.raises(ValueError):
        dp.probe_patterns(basis, meas, -1, seed=1)


def test_signal_pattern_seeding():
    meas = dp.MeasurementSet.from_grid(grid, space)
    rho = dp.named_state("even_cat:0.5", space)
    exact = dp.signal_pattern(rho, meas, 0, seed=3)
    assert exact.kind == "probability"
    sampled = dp.signal_pattern(rho, meas, 1000, seed=3)
    assert sampled.seed == derive_seed(3, "signal")
    assert np.array_equal(sampled.values, dp.signal_pattern(rho, meas, 1000, seed=3).values)
    assert not np.array_equal(sampled.values, dp.signal_pattern(rho, meas, 1000, seed=4).values)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(values=[0.5, 1.2]),
        dict(values=[0.5, float("nan")]),
        dict(values=[[0.5]]),
        dict(values=[0.5], kind="counts"),
        dict(values=[0.5], n_rep=10),
        dict(values=[0.5], kind="frequency"),
        dict(values=[0.123], kind="frequency", n_rep=10),
    ],
)
def test_bad_patterns(kwargs):
    with pytest.raises(ValueError):
        dp.DataPattern(**kwargs)


def test_pattern_csv(tmp_path):
    pattern = dp.sample_pattern(dp.DataPattern(np.array([0.2, 0.7])), 40, seed=11)
    path = pattern.to_csv(tmp_path / "pattern.csv")
    assert "np." not in path.read_text()
    read = dp.read_pattern_csv(path)
    assert np.array_equal(read.values, pattern.values)
    assert (read.kind, read.n_rep, read.seed) == ("frequency", 40, 11)
    assert not read.values.flags.writeable


def test_uniform_streams():
    key = stream_key(42, "pattern")
    assert key == stream_key(42, "pattern")
    assert key != stream_key(42, "patterns")
    assert stream_key(1, "a") != stream_key("1", "a")

    values = uniforms(key, 10000)
    assert np.all((values > 0) & (values < 1))
    assert abs(values.mean() - 0.5) < 0.02
    # any prefix of a stream can be recomputed on its own
    assert np.array_equal(uniforms(key, 17), values[:17])

    assert 0 <= derive_seed(42, "probe", 0) < 2 ** 63
    assert generator(5, "noise").normal() == generator(5, "noise").normal()

    with pytest.raises(TypeError):
        stream_key(0.5)
    with pytest.raises(TypeError):
        stream_key(True)
