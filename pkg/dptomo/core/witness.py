from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy.linalg import eigh

from .fock import HERMITIAN_TOL, DensityMatrix, _partial_transpose

# trace values above -DETECTION_TOL are treated as numerical noise
DETECTION_TOL = 1e-8


@dataclass(frozen=True)
class WitnessReport(object):
    """
    A decomposable entanglement witness and its value on the state it was built from.

    Attributes:
    - `witness`: The Hermitian, trace-one matrix W.
    - `trace_value`: Tr(W rho).
    - `min_pt_eigenvalue`: The smallest eigenvalue of the partial transpose of rho.
    - `detected`: Whether `trace_value < -DETECTION_TOL`.
    """

    witness: np.ndarray
    trace_value: float
    min_pt_eigenvalue: float
    detected: bool

    def __repr__(self):
        return (
            f"<WitnessReport trace_value={self.trace_value:.6g} "
            f"detected={self.detected}>"
        )


def _require_two_mode(rho: DensityMatrix) -> None:
    if rho.space.modes != 2:
        raise ValueError(f"Entanglement needs a two-mode state. Got {rho.space}.")


def _pt_spectrum(rho: DensityMatrix):
    _require_two_mode(rho)
    pt = _partial_transpose(np.array(rho.entries), rho.space.truncation)
    return eigh((pt + pt.conj().T) / 2)


def build_witness(rho: DensityMatrix) -> WitnessReport:
    """
    Builds W = (|eta><eta|)^T2 from the eigenvector eta of the most negative
    eigenvalue of rho^T2.

    Since Tr(W rho) = <eta|rho^T2|eta>, the trace value equals that eigenvalue. For a
    state with a positive partial transpose the witness is still returned, with
    `detected=False`.

    Raises:
    - `ValueError`: When `rho` is single-mode.
    """
    eigenvalues, eigenvectors = _pt_spectrum(rho)
    eta = eigenvectors[:, 0]
    witness = _partial_transpose(np.outer(eta, eta.conj()), rho.space.truncation)
    witness = (witness + witness.conj().T) / 2
    witness.flags.writeable = False

    trace_value = evaluate_witness(witness, rho)
    detected = trace_value < -DETECTION_TOL
    logger.trace(f"Witness of {rho!r}: Tr(W rho) = {trace_value:.6g}")
    return WitnessReport(witness, trace_value, float(eigenvalues[0]), detected)


def evaluate_witness(W: np.ndarray, rho: DensityMatrix) -> float:
    """
    The real part of Tr(W rho).

    Raises:
    - `ValueError`: When the dimensions differ or W is not Hermitian.
    """
    W = np.asarray(W)
    if W.shape != rho.entries.shape:
        raise ValueError(f"Witness of shape {W.shape} does not fit {rho!r}.")
    if np.max(np.abs(W - W.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(W))):
        raise ValueError("Witness must be Hermitian.")
    # Tr(AB) = sum_ij A_ij B_ji
    value = np.sum(W * rho.entries.T)
    if abs(value.imag) > 1e-10:
        logger.warning(f"Discarding imaginary residue {value.imag:.3g} of Tr(W rho)")
    return float(value.real)


def negativity(rho: DensityMatrix) -> float:
    """
    The sum of the absolute values of the negative eigenvalues of rho^T2.

    Raises:
    - `ValueError`: When `rho` is single-mode.
    """
    eigenvalues, _ = _pt_spectrum(rho)
    return float(-np.sum(eigenvalues[eigenvalues < 0]))
