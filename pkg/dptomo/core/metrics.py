from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy.linalg import eigh, svdvals

from .fock import PSD_FLOOR, DensityMatrix

# eigenvalues below this are unphysical rather than rounding noise
UNPHYSICAL_FLOOR = -1e-8
# relative size below which an eigenvalue is treated as numerically zero
RANK_TOL = 64 * np.finfo(float).eps


class UnphysicalStateError(ValueError):
    """A matrix handed to a metric has a clearly negative eigenvalue."""


@dataclass(frozen=True)
class MetricReport(object):
    """
    Quality of an approximation `approx` of a `target` state.

    Attributes:
    - `fidelity`: Uhlmann fidelity F(target, approx) in [0, 1].
    - `purity`: Tr(approx^2).
    - `hs_distance`: Hilbert-Schmidt distance between the two states.
    - `min_eigenvalue`: The smallest eigenvalue of `approx`.
    """

    fidelity: float
    purity: float
    hs_distance: float
    min_eigenvalue: float


def _check_spaces(a: DensityMatrix, b: DensityMatrix) -> None:
    if a.space != b.space:
        raise ValueError(f"Cannot compare states on {a.space} and {b.space}.")


def _sqrtm(rho: DensityMatrix) -> np.ndarray:
    eigenvalues, eigenvectors = eigh(rho.entries)
    if eigenvalues[0] < UNPHYSICAL_FLOOR:
        raise UnphysicalStateError(
            f"{rho!r} has eigenvalue {eigenvalues[0]:.3g} below {UNPHYSICAL_FLOOR:g}."
        )
    if eigenvalues[0] < PSD_FLOOR:
        logger.debug(f"Clipping eigenvalue {eigenvalues[0]:.3g} of {rho!r} to zero")
    eigenvalues = np.where(eigenvalues > RANK_TOL * eigenvalues[-1], eigenvalues, 0.0)
    return (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """
    The Uhlmann fidelity F = Tr sqrt(sqrt(a) b sqrt(a)).

    The square roots come from Hermitian eigendecompositions (eigenvalues at rounding
    level are set to zero first); F is then the trace norm of sqrt(a) sqrt(b), which
    equals the defining expression and does not amplify rounding noise through a
    second square root. The result is clamped to [0, 1].

    Raises:
    - `ValueError`: When the states live on different spaces.
    - `UnphysicalStateError`: When either state has an eigenvalue below -1e-8.
    """
    _check_spaces(a, b)
    value = float(np.sum(svdvals(_sqrtm(a) @ _sqrtm(b))))
    return min(max(value, 0.0), 1.0)


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2), which equals the sum of squared eigenvalues."""
    return float(np.sum(np.abs(rho.entries) ** 2))


def hs_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """The Hilbert-Schmidt distance sqrt(Tr[(a-b)^dagger (a-b)])."""
    _check_spaces(a, b)
    return float(np.linalg.norm(a.entries - b.entries))


def metric_report(target: DensityMatrix, approx: DensityMatrix) -> MetricReport:
    return MetricReport(
        fidelity=fidelity(target, approx),
        purity=purity(approx),
        hs_distance=hs_distance(target, approx),
        min_eigenvalue=float(approx.eigenvalues()[0]),
    )
