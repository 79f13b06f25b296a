"""
Constrained convex fitting of probe mixtures.

Both the representation of a known state and the reconstruction from data patterns
minimize a convex quadratic `x^T H x - 2 q^T x + c` over real coefficients subject to

    sum(x) = 1,    |x_xi| <= coeff_bound,    sum_xi x_xi sigma_xi >= 0.

The problem is solved with ADMM, splitting off a box-and-hyperplane copy `y` of `x`
and a PSD copy `Z` of the mixture:

- x-update: one linear solve with the cached Cholesky factor of `2H + rho (I + G)`,
  where `G` is the probe Gram matrix;
- y-update: Dykstra projection onto {sum(y) = 1} ∩ box;
- Z-update: projection onto the PSD cone through a Hermitian eigendecomposition.

Both copies are over-relaxed. The returned point is the checked `y` iterate with
the lowest bound on the objective of its assembled state, or the first iterate
that meets every tolerance.
"""
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, List, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .fock import DensityMatrix
from .probes import ProbeBasis

if TYPE_CHECKING:
    from .measurement import DataPattern

# iterations between best-iterate checks
CHECK_INTERVAL = 10
# iterations between penalty adaptations
ADAPT_INTERVAL = 50
DYKSTRA_ITERATIONS = 100
# over-relaxation of the x and mixture copies in the y- and Z-updates
RELAXATION = 1.6


@dataclass(frozen=True)
class SolverConfig(object):
    """
    Settings of the ADMM solver.

    Attributes:
    - `coeff_bound`: The cap on |x_xi|.
    - `max_iterations`: The ADMM iteration limit.
    - `primal_tol`: Tolerance on the primal residual and the constraint violation.
    - `dual_tol`: Tolerance on the dual residual.
    - `admm_penalty`: The initial ADMM penalty, adapted by residual balancing.
    - `regularization`: Tikhonov term added to the Gram matrix in the x-update.
    """

    coeff_bound: float = 1000.0
    max_iterations: int = 5000
    primal_tol: float = 1e-7
    dual_tol: float = 1e-7
    admm_penalty: float = 1.0
    regularization: float = 1e-12

    def __post_init__(self):
        for name in ("coeff_bound", "primal_tol", "dual_tol", "admm_penalty"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"Solver setting {name} must be positive. Got {value}.")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1. Got {self.max_iterations}.")
        if self.regularization < 0:
            raise ValueError("regularization must not be negative.")


@dataclass(frozen=True)
class FitResult(object):
    """
    The outcome of a constrained fit.

    Attributes:
    - `coefficients`: The real coefficient vector x of length M.
    - `objective`: The achieved objective (squared HS distance or E[x]).
    - `iterations`: ADMM iterations performed.
    - `converged`: Whether the residuals and constraints met the tolerances.
    - `constraint_violation`: max(|sum(x) - 1|, -min eig(sum x sigma), max(0, max|x| - bound)).
    - `min_eigenvalue`: Smallest eigenvalue of the mixture before any clipping.
    - `penalty`: The final ADMM penalty.
    - `regularization`: The Tikhonov term used in the x-update.
    - `history`: The best merit (objective bound after `assemble`) at each check, non-increasing.
    """

    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool
    constraint_violation: float
    min_eigenvalue: float
    penalty: float = 1.0
    regularization: float = 0.0
    history: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def M(self) -> int:
        return self.coefficients.shape[0]

    def to_csv(self, path: Union[str, os.PathLike]) -> Path:
        """Writes `xi,x` rows after a `# key=value` diagnostics header."""
        path = Path(path)
        with open(path, "w") as f:
            f.write(f"# objective={float(self.objective)!r}\n")
            f.write(f"# iterations={self.iterations}\n")
            f.write(f"# converged={self.converged}\n")
            f.write(f"# constraint_violation={float(self.constraint_violation)!r}\n")
            f.write(f"# min_eigenvalue={float(self.min_eigenvalue)!r}\n")
            f.write("xi,x\n")
            for xi, x in enumerate(self.coefficients):
                f.write(f"{xi},{float(x)!r}\n")
        return path


def read_fit_csv(path: Union[str, os.PathLike]) -> FitResult:
    diagnostics = {}
    coefficients: List[float] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line.startswith("#"):
                key, value = line[1:].strip().split("=", 1)
                diagnostics[key] = value
            elif line and line != "xi,x":
                coefficients.append(float(line.split(",")[1]))
    x = np.array(coefficients)
    x.flags.writeable = False
    return FitResult(
        coefficients=x,
        objective=float(diagnostics["objective"]),
        iterations=int(diagnostics["iterations"]),
        converged=diagnostics["converged"] == "True",
        constraint_violation=float(diagnostics["constraint_violation"]),
        min_eigenvalue=float(diagnostics["min_eigenvalue"]),
    )


def assemble(x: np.ndarray, basis: ProbeBasis) -> DensityMatrix:
    """
    Builds rho = sum_xi x_xi sigma_xi as a density matrix.

    Negative eigenvalues are clipped to zero and the trace is renormalized to one.
    The smallest eigenvalue before clipping is kept as `raw_min_eigenvalue` on the
    returned matrix.

    Arguments:
    - `x`: The M real coefficients.
    - `basis`: The probe basis.
    """
    rho = DensityMatrix.physical(basis.space, basis.mixture(x))
    if rho.raw_min_eigenvalue < -1e-10:
        logger.trace(f"Clipped eigenvalue {rho.raw_min_eigenvalue:.3g} while assembling")
    return rho


def _project_psd(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    eigenvalues = np.clip(eigenvalues, 0, None)
    return (eigenvectors * eigenvalues) @ eigenvectors.conj().T


def _project_constraints(v: np.ndarray, bound: float) -> np.ndarray:
    """Dykstra projection of v onto {sum(y) = 1} ∩ [-bound, bound]^M."""
    M = v.shape[0]
    y = v.copy()
    p = np.zeros(M)
    q = np.zeros(M)
    for _ in range(DYKSTRA_ITERATIONS):
        t = y + p
        h = t + (1 - t.sum()) / M
        p = t - h
        t = h + q
        y_next = np.clip(t, -bound, bound)
        q = t - y_next
        done = np.max(np.abs(y_next - y)) < 1e-15
        y = y_next
        if done:
            break
    return y


class _Problem(object):
    """
    The quadratic x^T H x - 2 q^T x + c over a probe basis.

    `residual` evaluates the same objective in its unexpanded form, which does not
    cancel catastrophically when the coefficients are large. `clip_scale` bounds how
    far one unit of trace norm moved by `assemble` can shift the residual.
    """

    def __init__(
        self,
        H: np.ndarray,
        q: np.ndarray,
        basis: ProbeBasis,
        residual: Callable[[np.ndarray], float],
        clip_scale: float = 1.0,
    ):
        self.H = (H + H.T) / 2
        self.q = q
        self.basis = basis
        self.residual = residual
        self.clip_scale = clip_scale

    def objective(self, x: np.ndarray) -> float:
        return float(self.residual(x))

    def violation(self, x: np.ndarray, bound: float) -> Tuple[float, float, float]:
        """
        Returns:
        - The constraint violation, the smallest mixture eigenvalue and the excess:
          the trace norm of the negative part plus the linear violations.
        """
        eigenvalues = np.linalg.eigvalsh(self.basis.mixture(x))
        min_eigenvalue = float(eigenvalues[0])
        linear = max(abs(x.sum() - 1), max(0.0, np.max(np.abs(x)) - bound))
        violation = max(linear, -min_eigenvalue)
        excess = float(-eigenvalues[eigenvalues < 0].sum()) + linear
        return violation, min_eigenvalue, excess

    def merit(self, objective: float, excess: float) -> float:
        """
        An upper bound on the objective after `assemble` makes the mixture physical.

        Clipping and renormalizing move the mixture by at most twice the negative
        part's trace norm.
        """
        return (np.sqrt(objective) + 2 * self.clip_scale * excess) ** 2


def _factor(problem: _Problem, penalty: float, regularization: float):
    M = problem.basis.M
    gram = problem.basis.gram + regularization * np.eye(M)
    matrix = 2 * problem.H + penalty * (np.eye(M) + gram)
    try:
        return cho_factor(matrix)
    except LinAlgError:
        raise ValueError(
            f"Gram matrix of {problem.basis!r} is singular beyond regularization "
            f"{regularization:g}."
        )


def _admm(problem: _Problem, cfg: SolverConfig) -> FitResult:
    basis = problem.basis
    M = basis.M
    bound = cfg.coeff_bound
    penalty = cfg.admm_penalty
    feasible_tol = 10 * cfg.primal_tol

    # the uniform mixture is feasible and seeds the best-iterate tracking
    x = np.full(M, 1 / M)
    y = x.copy()
    u = np.zeros(M)
    Z = _project_psd(basis.mixture(x))
    W = np.zeros_like(Z)

    best_x = x.copy()
    best_violation, best_min_eig, excess = problem.violation(best_x, bound)
    best_objective = problem.objective(best_x)
    best_merit = problem.merit(best_objective, excess)
    history = [best_merit]

    factor = _factor(problem, penalty, cfg.regularization)
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        rhs = 2 * problem.q + penalty * (y - u) + penalty * basis.expectations(Z - W)
        x = cho_solve(factor, rhs)
        Ax = basis.mixture(x)
        x_relaxed = RELAXATION * x + (1 - RELAXATION) * y
        Ax_relaxed = RELAXATION * Ax + (1 - RELAXATION) * Z

        y_old, Z_old = y, Z
        y = _project_constraints(x_relaxed + u, bound)
        Z = _project_psd(Ax_relaxed + W)
        u = u + x_relaxed - y
        W = W + Ax_relaxed - Z

        primal = np.sqrt(np.sum((x - y) ** 2) + np.sum(np.abs(Ax - Z) ** 2))
        dual = penalty * np.linalg.norm((y - y_old) + basis.expectations(Z - Z_old))
        primal_scale = max(np.linalg.norm(x), np.linalg.norm(y), np.linalg.norm(Z))
        dual_scale = penalty * np.linalg.norm(u + basis.expectations(W))
        primal_ok = primal <= cfg.primal_tol * (1 + primal_scale)
        dual_ok = dual <= cfg.dual_tol * (1 + dual_scale)

        if primal_ok and dual_ok or iteration % CHECK_INTERVAL == 0:
            violation, min_eig, excess = problem.violation(y, bound)
            objective = problem.objective(y)
            merit = problem.merit(objective, excess)
            converged = bool(primal_ok and dual_ok and violation <= feasible_tol)
            if converged or merit < best_merit:
                best_x, best_objective, best_merit = y.copy(), objective, merit
                best_violation, best_min_eig = violation, min_eig
            history.append(best_merit)
            logger.trace(
                f"ADMM {iteration}: objective {objective:.6g}, primal {primal:.3g}, "
                f"dual {dual:.3g}, violation {violation:.3g}, penalty {penalty:g}"
            )
            if converged:
                break

        # residual balancing
        if iteration % ADAPT_INTERVAL == 0:
            if primal > 10 * dual:
                penalty *= 2
                u, W = u / 2, W / 2
                factor = _factor(problem, penalty, cfg.regularization)
            elif dual > 10 * primal:
                penalty /= 2
                u, W = u * 2, W * 2
                factor = _factor(problem, penalty, cfg.regularization)

    best_x.flags.writeable = False
    result = FitResult(
        coefficients=best_x,
        objective=best_objective,
        iterations=iteration,
        converged=converged,
        constraint_violation=best_violation,
        min_eigenvalue=best_min_eig,
        penalty=penalty,
        regularization=cfg.regularization,
        history=tuple(np.minimum.accumulate(history)),
    )
    if converged:
        logger.debug(
            f"Fit converged in {iteration} iterations, objective {best_objective:.6g}"
        )
    else:
        msg = f"Fit did not converge within {cfg.max_iterations} iterations; "
        msg += f"returning best iterate (objective {best_objective:.3g}, "
        msg += f"violation {best_violation:.3g})."
        logger.warning(msg)
        warnings.warn(msg)
    return result


def fit_state(
    target: DensityMatrix, basis: ProbeBasis, cfg: SolverConfig = SolverConfig()
) -> FitResult:
    """
    Represents a known state as a constrained mixture of probes.

    Minimizes the squared Hilbert-Schmidt distance ||target - sum_xi x_xi sigma_xi||^2
    subject to unit sum, the coefficient bound and positivity of the mixture.

    Arguments:
    - `target`: The state to represent.
    - `basis`: The probe basis, on the same space as `target`.
    - `cfg`: Solver settings.

    Returns:
    - A `FitResult`. When ADMM does not converge, the best iterate is returned with
      `converged=False`.

    Raises:
    - `ValueError`: When the spaces differ or the Gram matrix cannot be factored.
    """
    if target.space != basis.space:
        raise ValueError(f"Target on {target.space} does not match {basis!r}.")
    T = np.array(target.entries)

    def residual(x: np.ndarray) -> float:
        return float(np.sum(np.abs(basis.mixture(x) - T) ** 2))

    logger.debug(f"Fitting {target!r} with {basis}")
    problem = _Problem(np.array(basis.gram), basis.expectations(T), basis, residual)
    return _admm(problem, cfg)


def fit_pattern(
    signal_pattern: "DataPattern",
    probe_patterns: Sequence["DataPattern"],
    basis: ProbeBasis,
    cfg: SolverConfig = SolverConfig(),
) -> FitResult:
    """
    Reconstructs a signal from its data pattern.

    Minimizes E[x] = sum_j (f_j - sum_xi x_xi f^xi_j)^2 under the same constraints as
    `fit_state`, with positivity evaluated on the probe projectors.

    Arguments:
    - `signal_pattern`: The `DataPattern` of the signal.
    - `probe_patterns`: One `DataPattern` per probe, in basis order.
    - `basis`: The probe basis.
    - `cfg`: Solver settings.

    Raises:
    - `ValueError`: When the number of probe patterns differs from M or pattern lengths disagree.
    """
    if len(probe_patterns) != basis.M:
        msg = f"Got {len(probe_patterns)} probe patterns for {basis.M} probes."
        raise ValueError(msg)
    K = len(signal_pattern.values)
    lengths = {len(p.values) for p in probe_patterns}
    if lengths != {K}:
        raise ValueError(
            f"Pattern lengths disagree: signal has {K} settings, probes have {sorted(lengths)}."
        )

    F = np.stack([np.asarray(p.values, dtype=float) for p in probe_patterns], axis=1)
    f = np.asarray(signal_pattern.values, dtype=float)

    def residual(x: np.ndarray) -> float:
        return float(np.sum((F @ x - f) ** 2))

    logger.debug(f"Fitting a {K}-setting data pattern with {basis}")
    # a projector changes each setting by at most the trace norm of the change
    problem = _Problem(F.T @ F, F.T @ f, basis, residual, clip_scale=np.sqrt(K))
    return _admm(problem, cfg)
