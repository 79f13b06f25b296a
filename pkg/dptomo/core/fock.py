import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger
from scipy.special import gammaln

# tolerances shared by every density matrix in the package
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-10
NORM_TOL = 1e-12
TAIL_MASS_LIMIT = 1e-8

DEFAULT_TRUNCATION = {1: 12, 2: 10}


class TruncationError(ValueError):
    """The Fock truncation is too small to hold a requested coherent amplitude."""


@dataclass(frozen=True)
class CoherentAmplitude(object):
    """
    The complex amplitude of a coherent state.

    Attributes:
    - `re`: The real part (dimensionless field quadrature).
    - `im`: The imaginary part.
    """

    re: float
    im: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError(f"Coherent amplitude must be finite. Got {self.re}+{self.im}i.")

    @classmethod
    def from_complex(cls, value: complex) -> "CoherentAmplitude":
        value = complex(value)
        return cls(float(value.real), float(value.imag))

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    def __complex__(self):
        return self.value

    def __repr__(self):
        return f"<CoherentAmplitude {self.re:+.6g}{self.im:+.6g}i>"


Amplitude = Union[CoherentAmplitude, complex, float]


def _as_complex(alpha: Amplitude) -> complex:
    if isinstance(alpha, CoherentAmplitude):
        return alpha.value
    return CoherentAmplitude.from_complex(alpha).value


@dataclass(frozen=True)
class HilbertSpec(object):
    """
    A truncated single- or two-mode Fock space.

    Attributes:
    - `modes`: The number of optical modes, 1 or 2.
    - `truncation`: The number of Fock levels kept per mode (levels 0..D-1).

    The composite index of a two-mode basis state |n1, n2> is `n1 * D + n2`.
    """

    modes: int = 1
    truncation: int = DEFAULT_TRUNCATION[1]

    def __post_init__(self):
        if self.modes not in (1, 2):
            raise ValueError(f"Only one or two modes are supported. Got {self.modes}.")
        if not isinstance(self.truncation, (int, np.integer)) or self.truncation < 2:
            raise ValueError(
                f"Truncation must be an integer of at least 2. Got {self.truncation}."
            )

    @classmethod
    def default(cls, modes: int = 1) -> "HilbertSpec":
        return cls(modes=modes, truncation=DEFAULT_TRUNCATION[modes])

    @property
    def dim(self) -> int:
        return self.truncation ** self.modes

    @property
    def single(self) -> "HilbertSpec":
        """The single-mode space of one factor."""
        return HilbertSpec(modes=1, truncation=self.truncation)

    def __str__(self):
        return f"{self.modes}-mode space (D={self.truncation}, dim={self.dim})"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


class PureState(object):
    """
    A normalized state vector.

    Arguments:
    - `space`: The Hilbert space of the vector.
    - `vector`: The amplitudes in the Fock basis, of length `space.dim`.

    Raises:
    - `ValueError`: When the length or the norm is wrong.
    """

    def __init__(self, space: HilbertSpec, vector: np.ndarray):
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        if vector.shape[0] != space.dim:
            raise ValueError(
                f"Vector of length {vector.shape[0]} does not fit {space}."
            )
        norm = np.linalg.norm(vector)
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"State vector must have unit norm. Got {norm!r}.")
        self.space = space
        self.vector = _frozen(vector)

    @classmethod
    def normalized(cls, space: HilbertSpec, vector: np.ndarray) -> "PureState":
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValueError("Cannot normalize the zero vector.")
        return cls(space, vector / norm)

    def overlap(self, other: "PureState") -> complex:
        """Returns <other|self>."""
        if other.space != self.space:
            raise ValueError(f"Cannot take the overlap of {self.space} and {other.space}.")
        return complex(np.vdot(other.vector, self.vector))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.vector, self.vector.conj()))

    def __repr__(self):
        return f"<PureState on {self.space}>"


class DensityMatrix(object):
    """
    A Hermitian, unit-trace, positive semidefinite operator on a truncated Fock space.

    Construction validates the invariants to the package tolerances (Hermiticity 1e-12
    entrywise, trace 1e-10, smallest eigenvalue at least -1e-10).
    Use `DensityMatrix.physical()` to build one from a matrix that carries
    numerical noise.

    Arguments:
    - `space`: The Hilbert space the matrix acts on.
    - `entries`: The `dim x dim` complex matrix.

    Attributes:
    - `space`: The Hilbert space the matrix acts on.
    - `entries`: A read-only complex array.
    - `min_eigenvalue`: The smallest eigenvalue found during validation.

    Raises:
    - `ValueError`: When any of the invariants is violated.
    """

    def __init__(self, space: HilbertSpec, entries: np.ndarray):
        entries = np.asarray(entries, dtype=complex)
        if entries.shape != (space.dim, space.dim):
            raise ValueError(
                f"Matrix of shape {entries.shape} does not fit {space}, "
                f"expected {(space.dim, space.dim)}."
            )

        asymmetry = np.max(np.abs(entries - entries.conj().T))
        if asymmetry > HERMITIAN_TOL:
            raise ValueError(f"Density matrix is not Hermitian (deviation {asymmetry:.3g}).")

        trace = np.trace(entries).real
        if abs(trace - 1) > TRACE_TOL:
            raise ValueError(f"Density matrix must have unit trace. Got {trace!r}.")

        self.min_eigenvalue = float(np.linalg.eigvalsh(entries)[0])
        if self.min_eigenvalue < PSD_FLOOR:
            raise ValueError(
                "Density matrix is not positive semidefinite "
                f"(smallest eigenvalue {self.min_eigenvalue:.3g})."
            )

        self.space = space
        self.entries = _frozen(entries)
        # set by physical() to the smallest eigenvalue before clipping
        self.raw_min_eigenvalue: float = self.min_eigenvalue

    @classmethod
    def physical(cls, space: HilbertSpec, matrix: np.ndarray) -> "DensityMatrix":
        """
        Projects a nearly-physical matrix onto the density matrices.

        The matrix is Hermitized, its negative eigenvalues are clipped to zero and the
        trace is renormalized to one, in that order.

        Raises:
        - `ValueError`: When nothing positive is left after clipping.
        """
        eigenvalues, eigenvectors = np.linalg.eigh(_hermitize(matrix))
        clipped = np.clip(eigenvalues, 0, None)
        if clipped.sum() <= 0:
            raise ValueError("Matrix has no positive spectrum to renormalize.")
        clipped /= clipped.sum()
        rebuilt = (eigenvectors * clipped) @ eigenvectors.conj().T
        rho = cls(space, _hermitize(rebuilt))
        rho.raw_min_eigenvalue = float(eigenvalues[0])
        return rho

    @classmethod
    def maximally_mixed(cls, space: HilbertSpec, rank: int) -> "DensityMatrix":
        """The uniform mixture of the lowest `rank` composite basis states."""
        if not 1 <= rank <= space.dim:
            raise ValueError(f"Rank must be between 1 and {space.dim}. Got {rank}.")
        diagonal = np.zeros(space.dim)
        diagonal[:rank] = 1 / rank
        return cls(space, np.diag(diagonal))

    @property
    def dim(self) -> int:
        return self.space.dim

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def to_csv(self, path: Union[str, os.PathLike]) -> Path:
        """
        Writes the matrix as CSV.

        The first line is `dim,modes,truncation`; each following line is one row of the
        matrix written as interleaved `re,im` pairs.
        """
        path = Path(path)
        interleaved = np.empty((self.dim, 2 * self.dim))
        interleaved[:, 0::2] = self.entries.real
        interleaved[:, 1::2] = self.entries.imag
        with open(path, "w") as f:
            f.write(f"{self.dim},{self.space.modes},{self.space.truncation}\n")
            np.savetxt(f, interleaved, delimiter=",", fmt="%.17g")
        logger.trace(f"Wrote {self} to {path}")
        return path

    def __repr__(self):
        return f"<DensityMatrix on {self.space}>"


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    return (matrix + matrix.conj().T) / 2


def read_density_csv(path: Union[str, os.PathLike]) -> DensityMatrix:
    """Reads a density matrix written by `DensityMatrix.to_csv`."""
    with open(path) as f:
        dim, modes, truncation = (int(x) for x in f.readline().split(","))
        interleaved = np.loadtxt(f, delimiter=",", ndmin=2)
    space = HilbertSpec(modes=modes, truncation=truncation)
    if space.dim != dim or interleaved.shape != (dim, 2 * dim):
        raise ValueError(f"Malformed density matrix file {path}.")
    return DensityMatrix(space, interleaved[:, 0::2] + 1j * interleaved[:, 1::2])


def coherent_amplitudes(alpha: Amplitude, D: int) -> np.ndarray:
    """
    Returns the truncated, renormalized Fock amplitudes of |alpha>.

    Raises:
    - `TruncationError`: When the probability mass beyond level D-1 exceeds 1e-8.
    """
    if D < 2:
        raise ValueError(f"Truncation must be at least 2. Got {D}.")
    alpha = _as_complex(alpha)
    n = np.arange(D)

    # alpha**n / sqrt(n!) without overflowing the factorial
    if alpha == 0:
        amplitudes = (n == 0).astype(complex)
    else:
        log_magnitude = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        amplitudes = np.exp(log_magnitude - abs(alpha) ** 2 / 2 + 1j * n * np.angle(alpha))

    kept = float(np.sum(np.abs(amplitudes) ** 2))
    tail = 1 - kept
    if tail > TAIL_MASS_LIMIT:
        msg = f"Truncation D={D} is too small for alpha={alpha:.6g}: "
        msg += f"tail mass {tail:.3g} exceeds {TAIL_MASS_LIMIT:g}."
        raise TruncationError(msg)
    return amplitudes / np.sqrt(kept)


def coherent_vector(alpha: Amplitude, D: int) -> PureState:
    """
    Builds the coherent state |alpha> in a single-mode space truncated at D levels.

    The Fock amplitudes are `exp(-|alpha|^2/2) alpha^n / sqrt(n!)` for `n < D`,
    renormalized to unit norm after truncation.

    Arguments:
    - `alpha`: The complex amplitude, as a `CoherentAmplitude` or a number.
    - `D`: The number of Fock levels.

    Returns:
    - A `PureState` on `HilbertSpec(modes=1, truncation=D)`.

    Raises:
    - `TruncationError`: When D is too small for alpha (tail mass above 1e-8).
    """
    return PureState(HilbertSpec(modes=1, truncation=D), coherent_amplitudes(alpha, D))


def fock_vector(n: int, D: int) -> np.ndarray:
    if not 0 <= n < D:
        raise ValueError(f"Fock level {n} is outside the truncation D={D}.")
    vector = np.zeros(D, dtype=complex)
    vector[n] = 1
    return vector


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """
    The two-mode product state a ⊗ b.

    Raises:
    - `ValueError`: When either input is not single-mode or the truncations differ.
    """
    if a.space.modes != 1 or b.space.modes != 1:
        raise ValueError("Both factors of a tensor product must be single-mode.")
    if a.space.truncation != b.space.truncation:
        msg = "Cannot tensor states with different truncations "
        msg += f"({a.space.truncation} and {b.space.truncation})."
        raise ValueError(msg)
    space = HilbertSpec(modes=2, truncation=a.space.truncation)
    return DensityMatrix(space, _hermitize(np.kron(a.entries, b.entries)))


def _partial_transpose(matrix: np.ndarray, D: int) -> np.ndarray:
    # (n1, n2, m1, m2) -> (n1, m2, m1, n2)
    return matrix.reshape(D, D, D, D).transpose(0, 3, 2, 1).reshape(D * D, D * D)


def partial_transpose(rho: DensityMatrix) -> np.ndarray:
    """
    Transposes the indices of the second mode.

    Returns:
    - The complex matrix with entries `A[(n1,n2),(m1,m2)] -> A[(n1,m2),(m1,n2)]`.

    Raises:
    - `ValueError`: When `rho` is single-mode.
    """
    if rho.space.modes != 2:
        raise ValueError(f"Partial transpose needs a two-mode state, got {rho.space}.")
    return _partial_transpose(np.array(rho.entries), rho.space.truncation)
