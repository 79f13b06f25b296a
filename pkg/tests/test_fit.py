import numpy as np
import pytest

import dptomo as dp

qubit = dp.HilbertSpec(modes=1, truncation=2)
patient = dp.SolverConfig(max_iterations=20000)


def bloch_state(theta, phi):
    vector = [np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)]
    return dp.PureState.normalized(qubit, vector).density()


def test_positivity_bound_optimum():
    # sigma = |0>, |+>, |+i>: the mixture has Bloch vector (x1, x2, x0), so the closest
    # mixture to |1><1| is x = (-1/3, 2/3, 2/3), which sits on the Bloch sphere
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [1, 1], [1, 1j]])
    fit = dp.fit_state(dp.named_state("fock:1", qubit), basis, patient)
    assert fit.converged
    assert np.allclose(fit.coefficients, [-1 / 3, 2 / 3, 2 / 3], atol=1e-4)
    assert fit.objective == pytest.approx(2 / 3, abs=1e-5)
    assert fit.coefficients.sum() == pytest.approx(1, abs=1e-6)
    assert fit.min_eigenvalue > -1e-6


def test_coefficient_bound_optimum():
    # sigma = |0>, |1>, |+>: Bloch vector (x2, 0, x0 - x1); the bound caps x2 at 0.5
    theta, phi = np.pi / 3, np.pi / 4
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [0, 1], [1, 1]])
    cfg = dp.SolverConfig(coeff_bound=0.5, max_iterations=20000)
    fit = dp.fit_state(bloch_state(theta, phi), basis, cfg)

    x_bloch, y_bloch = np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi)
    expected = ((0.5 - x_bloch) ** 2 + y_bloch ** 2) / 2
    assert fit.converged
    assert np.allclose(fit.coefficients, [0.5, 0, 0.5], atol=1e-4)
    assert fit.objective == pytest.approx(expected, abs=1e-5)
    assert np.max(np.abs(fit.coefficients)) <= 0.5 + 1e-6


def test_recovers_a_probe():
    space = dp.HilbertSpec(modes=1, truncation=10)
    basis = dp.ProbeBasis.coherent(dp.GridSpec(N=2, d=1.0), space)
    fit = dp.fit_state(basis.projectors[0], basis, patient)
    assert fit.objective < 1e-6
    assert np.allclose(fit.coefficients, [1, 0, 0, 0], atol=1e-3)
    assert all(np.diff(fit.history) <= 0)

    rho = dp.assemble(fit.coefficients, basis)
    assert dp.fidelity(basis.projectors[0], rho) == pytest.approx(1, abs=1e-3)


def test_exact_pattern_matches_state_fit():
    space = dp.HilbertSpec(modes=1, truncation=10)
    basis = dp.ProbeBasis.coherent(dp.GridSpec(N=2, d=1.0), space)
    x_true = np.array([0.1, 0.2, 0.3, 0.4])
    rho = dp.assemble(x_true, basis)

    represented = dp.fit_state(rho, basis, patient)
    assert represented.objective < 1e-8
    assert np.allclose(represented.coefficients, x_true, atol=1e-3)

    meas = dp.MeasurementSet.matching(basis)
    probes = dp.probe_patterns(basis, meas, 0, 0)
    signal = dp.signal_pattern(rho, meas, 0, 0)
    reconstructed = dp.fit_pattern(signal, probes, basis, patient)
    assert reconstructed.objective < 1e-8
    assert np.allclose(reconstructed.coefficients, x_true, atol=1e-3)


def test_not_converged_returns_best_iterate():
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [1, 1], [1, 1j]])
    cfg = dp.SolverConfig(max_iterations=1)
    with pytest.warns(UserWarning, match="did not converge"):
        fit = dp.fit_state(dp.named_state("fock:1", qubit), basis, cfg)
    assert not fit.converged
    assert fit.iterations == 1
    # the feasible starting point is the only checked iterate
    assert np.allclose(fit.coefficients, 1 / 3)
    assert fit.constraint_violation < 1e-12


def test_assemble_clips():
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [0, 1], [1, 1]])
    rho = dp.assemble(np.array([1.2, -0.2, 0.0]), basis)
    assert rho.raw_min_eigenvalue == pytest.approx(-0.2)
    assert np.allclose(rho.entries, np.diag([1, 0]))
    assert rho.min_eigenvalue >= 0


def test_validation():
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [0, 1], [1, 1]])
    with pytest.raises(ValueError):
        dp.fit_state(dp.named_state("fock:1"), basis)

    meas = dp.MeasurementSet.matching(basis)
    probes = dp.probe_patterns(basis, meas, 0, 0)
    signal = dp.signal_pattern(dp.named_state("fock:1", qubit), meas, 0, 0)
    with pytest.raises(ValueError, match="probe patterns"):
        dp.fit_pattern(signal, probes[:2], basis)

    with pytest.raises(ValueError):
        dp.SolverConfig(coeff_bound=0)
    with pytest.raises(ValueError):
        dp.SolverConfig(max_iterations=0)


def test_fit_csv(tmp_path):
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [1, 1], [1, 1j]])
    fit = dp.fit_state(dp.named_state("fock:1", qubit), basis, patient)
    read = dp.read_fit_csv(fit.to_csv(tmp_path / "fit.csv"))
    assert np.array_equal(read.coefficients, fit.coefficients)
    assert read.objective == fit.objective
    assert read.converged == fit.converged
    assert read.M == 3


def test_matches_exhaustive_search():
    # x0 and x1 on a 1e-3 lattice, x2 = 1 - x0 - x1, every coefficient in [-0.5, 0.5]
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [0, 1], [1, 1]])
    target = bloch_state(2 * np.pi / 5, 1.0)
    T = np.array(target.entries)
    cfg = dp.SolverConfig(coeff_bound=0.5, max_iterations=20000)
    fit = dp.fit_state(target, basis, cfg)

    P = [np.outer(v, v.conj()) for v in basis.vectors.T]
    grid = np.round(np.arange(-500, 501) * 1e-3, 12)
    best = np.inf
    for x0 in grid:
        x1 = grid
        x2 = 1 - x0 - x1
        keep = np.abs(x2) <= 0.5 + 1e-12
        mixtures = (
            x0 * P[0][None, :, :]
            + x1[keep, None, None] * P[1][None, :, :]
            + x2[keep, None, None] * P[2][None, :, :]
        )
        det = (mixtures[:, 0, 0] * mixtures[:, 1, 1] - np.abs(mixtures[:, 0, 1]) ** 2).real
        objective = np.sum(np.abs(mixtures - T) ** 2, axis=(1, 2))[det >= 0]
        if objective.size:
            best = min(best, objective.min())

    assert fit.objective <= best + 1e-5
    uniform = np.sum(np.abs(basis.mixture(np.full(3, 1 / 3)) - T) ** 2)
    assert fit.objective <= uniform


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_coherent_grid_fit_leaves_the_uniform_start():
    space = dp.HilbertSpec.default(1)
    basis = dp.ProbeBasis.coherent(dp.GridSpec(kind="square", N=6, d=0.15), space)
    target = dp.named_state("coherent:0.5", space)
    uniform = np.full(basis.M, 1 / basis.M)
    uniform_fidelity = dp.fidelity(target, dp.assemble(uniform, basis))

    fit = dp.fit_state(target, basis)
    assert np.max(np.abs(fit.coefficients - uniform)) > 1e-2
    assert fit.objective < np.sum(np.abs(basis.mixture(uniform) - target.entries) ** 2)
    assert fit.history[-1] < fit.history[0]
    fidelity = dp.fidelity(target, dp.assemble(fit.coefficients, basis))
    assert fidelity > uniform_fidelity
    assert fidelity >= 0.99

    meas = dp.MeasurementSet.matching(basis)
    probes = dp.probe_patterns(basis, meas, 0, 0)
    signal = dp.signal_pattern(target, meas, 0, 0)
    reconstructed = dp.fit_pattern(signal, probes, basis)
    assert np.max(np.abs(reconstructed.coefficients - uniform)) > 1e-2
    F = np.array([p.values for p in probes]).T
    assert reconstructed.objective < np.sum((F @ uniform - signal.values) ** 2)


def test_csv_holds_plain_numbers(tmp_path):
    basis = dp.ProbeBasis.from_vectors(qubit, [[1, 0], [0, 1], [1, 1]])
    fit = dp.FitResult(
        coefficients=np.array([0.25, 0.25, 0.5]),
        objective=np.float64(0.125),
        iterations=3,
        converged=True,
        constraint_violation=np.float64(0.0),
        min_eigenvalue=np.float64(0.1),
    )
    path = fit.to_csv(tmp_path / "fit.csv")
    assert "np." not in path.read_text()
    read = dp.read_fit_csv(path)
    assert np.array_equal(read.coefficients, fit.coefficients)
    assert read.objective == 0.125
    assert read.M == basis.M
