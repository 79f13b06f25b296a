import os
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from math import isfinite
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from .fock import CoherentAmplitude, DensityMatrix, HilbertSpec, coherent_amplitudes

AmplitudeTuple = Tuple[CoherentAmplitude, ...]


@dataclass(frozen=True)
class GridSpec(object):
    """
    The layout of coherent amplitudes on the phase plane, for one mode.

    Attributes:
    - `kind`: Either `"square"` or `"helical"`.
    - `N`: Nodes per axis for a square lattice, total nodes for a helical grid.
    - `d`: The pitch of a square lattice.
    - `dr`: The radial step of a helical grid.
    - `dphi`: The angular step of a helical grid, in radians.
    """

    kind: str = "square"
    N: int = 6
    d: float = 0.15
    dr: float = 0.016
    dphi: float = np.pi / 4

    def __post_init__(self):
        if self.kind not in ("square", "helical"):
            raise ValueError(f"Unknown grid kind '{self.kind}'. Use 'square' or 'helical'.")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"Grid needs at least one node. Got N={self.N}.")
        for name in ("d", "dr", "dphi"):
            if not isfinite(getattr(self, name)):
                raise ValueError(f"Grid parameter {name} must be finite.")
        if self.kind == "square" and self.d <= 0:
            raise ValueError(f"Square lattice pitch must be positive. Got d={self.d}.")
        if self.kind == "helical" and self.dr <= 0:
            raise ValueError(f"Helical radial step must be positive. Got dr={self.dr}.")

    def amplitudes(self) -> List[CoherentAmplitude]:
        if self.kind == "square":
            return square_lattice(self.N, self.d)
        return helical_grid(self.N, self.dr, self.dphi)

    def __str__(self):
        if self.kind == "square":
            return f"square lattice N={self.N}, d={self.d:g}"
        return f"helical grid N={self.N}, dr={self.dr:g}, dphi={self.dphi:.6g}"


def square_lattice(N: int, d: float) -> List[CoherentAmplitude]:
    """
    A square lattice of N x N amplitudes centered on the origin.

    Node (j, k) sits at `d*(j - (N-1)/2) + i*d*(k - (N-1)/2)`; nodes are ordered
    row-major, with j the outer index. For even N no node lies on the origin.
    """
    if N < 1:
        raise ValueError(f"Lattice needs at least one node per axis. Got N={N}.")
    if d <= 0:
        raise ValueError(f"Lattice pitch must be positive. Got d={d}.")
    offsets = [d * (j - (N - 1) / 2) for j in range(N)]
    return [CoherentAmplitude(re, im) for re, im in product(offsets, offsets)]


def helical_grid(N: int, dr: float, dphi: float) -> List[CoherentAmplitude]:
    """
    N amplitudes on a spiral, equidistant in radius and angle.

    Node k sits at `k*dr*exp(i*k*dphi)`, so node 0 is the origin.
    """
    if N < 1:
        raise ValueError(f"Helical grid needs at least one node. Got N={N}.")
    if dr <= 0:
        raise ValueError(f"Radial step must be positive. Got dr={dr}.")
    return [
        CoherentAmplitude.from_complex(k * dr * np.exp(1j * k * dphi)) for k in range(N)
    ]


class ProbeBasis(object):
    """
    An ordered set of known rank-1 probe states sigma_xi = |v_xi><v_xi|.

    The probes are stored as the columns of a `dim x M` matrix so mixtures and
    expectation values never need the `M` dense projectors. The projectors themselves
    are materialized on first access and cached.

    Arguments:
    - `space`: The Hilbert space of the probes.
    - `vectors`: A `dim x M` array whose columns are the normalized probe vectors.
    - `amplitudes`: The per-mode coherent amplitudes of each probe, if the probes are coherent.
    - `grid`: The grid the amplitudes came from, if any.

    Attributes:
    - `M`: The number of probes.
    - `amplitudes`: A list of per-mode `CoherentAmplitude` tuples, or `None`.
    - `grid`: The `GridSpec` used per mode, or `None`.
    - `space`: The Hilbert space of the probes.
    - `vectors`: The read-only `dim x M` matrix of probe vectors.

    Raises:
    - `ValueError`: When the vectors do not fit the space or are not normalized.
    """

    def __init__(
        self,
        space: HilbertSpec,
        vectors: np.ndarray,
        amplitudes: Optional[Sequence[AmplitudeTuple]] = None,
        grid: Optional[GridSpec] = None,
    ):
        vectors = np.array(vectors, dtype=complex)
        if vectors.ndim != 2 or vectors.shape[0] != space.dim or vectors.shape[1] < 1:
            raise ValueError(
                f"Probe vectors of shape {vectors.shape} do not fit {space}."
            )
        norms = np.linalg.norm(vectors, axis=0)
        if np.max(np.abs(norms - 1)) > 1e-12:
            raise ValueError("Probe vectors must be normalized.")
        if amplitudes is not None and len(amplitudes) != vectors.shape[1]:
            msg = f"Got {len(amplitudes)} amplitude tuples "
            msg += f"for {vectors.shape[1]} probe vectors."
            raise ValueError(msg)

        vectors.flags.writeable = False
        self.space = space
        self.vectors = vectors
        self.amplitudes = list(amplitudes) if amplitudes is not None else None
        self.grid = grid

    @classmethod
    def from_vectors(cls, space: HilbertSpec, vectors: Sequence[np.ndarray]) -> "ProbeBasis":
        """Builds a basis of arbitrary (not necessarily coherent) pure probes."""
        columns = [np.asarray(v, dtype=complex) / np.linalg.norm(v) for v in vectors]
        return cls(space, np.stack(columns, axis=1))

    @classmethod
    def coherent(
        cls,
        grid: Union[GridSpec, Sequence[CoherentAmplitude]],
        space: HilbertSpec,
    ) -> "ProbeBasis":
        """
        Builds the coherent-projector basis of a grid.

        For a two-mode space the basis is the tensor product of the grid with itself
        (see `tensor_basis`).
        """
        amplitudes = grid.amplitudes() if isinstance(grid, GridSpec) else list(grid)
        spec = grid if isinstance(grid, GridSpec) else None
        if space.modes == 2:
            return tensor_basis(amplitudes, space, grid_spec=spec)
        columns = [coherent_amplitudes(a, space.truncation) for a in amplitudes]
        logger.debug(f"Built {len(columns)} coherent probes on {space}")
        return cls(space, np.stack(columns, axis=1), [(a,) for a in amplitudes], spec)

    @property
    def M(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.M

    @cached_property
    def projectors(self) -> List[DensityMatrix]:
        logger.trace(f"Materializing {self.M} projectors for {self}")
        return [
            DensityMatrix(self.space, np.outer(v, v.conj())) for v in self.vectors.T
        ]

    @cached_property
    def gram(self) -> np.ndarray:
        """The real `M x M` matrix Tr(sigma_xi sigma_eta) = |<v_xi|v_eta>|^2."""
        overlaps = self.vectors.conj().T @ self.vectors
        gram = np.abs(overlaps) ** 2
        gram = (gram + gram.T) / 2
        gram.flags.writeable = False
        return gram

    def mixture(self, x: np.ndarray) -> np.ndarray:
        """The (unvalidated) matrix sum_xi x_xi sigma_xi."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.M,):
            raise ValueError(f"Expected {self.M} coefficients, got shape {x.shape}.")
        mixed = (self.vectors * x) @ self.vectors.conj().T
        return (mixed + mixed.conj().T) / 2

    def expectations(self, matrix: np.ndarray) -> np.ndarray:
        """The real vector Tr(sigma_xi A) for a Hermitian matrix A."""
        return np.real(np.sum(self.vectors.conj() * (matrix @ self.vectors), axis=0))

    def layout(self) -> pd.DataFrame:
        """
        The probe amplitudes as a table with columns `xi,mode,re,im`.

        Raises:
        - `ValueError`: When the basis was not built from coherent amplitudes.
        """
        if self.amplitudes is None:
            raise ValueError(f"{self} has no coherent amplitudes to lay out.")
        rows = [
            dict(xi=xi, mode=mode, re=a.re, im=a.im)
            for xi, amplitudes in enumerate(self.amplitudes)
            for mode, a in enumerate(amplitudes, start=1)
        ]
        return pd.DataFrame(rows, columns=["xi", "mode", "re", "im"])

    def to_csv(self, path: Union[str, os.PathLike]) -> Path:
        path = Path(path)
        self.layout().to_csv(path, index=False, float_format="%.12g")
        return path

    def __repr__(self):
        return f"<ProbeBasis M={self.M} on {self.space}>"

    def __str__(self):
        grid = f" from {self.grid}" if self.grid is not None else ""
        return f"ProbeBasis of {self.M} probes{grid}"


def tensor_basis(
    grid: Sequence[CoherentAmplitude],
    space: HilbertSpec,
    grid_spec: Optional[GridSpec] = None,
) -> ProbeBasis:
    """
    The two-mode basis of all ordered pairs of grid amplitudes.

    Probe (xi1, xi2) is |alpha_xi1> ⊗ |alpha_xi2>; the first mode's index is the outer one,
    so a square lattice of N x N nodes per mode gives M = N^4 probes.

    Arguments:
    - `grid`: The per-mode amplitudes; the same grid is used on both modes.
    - `space`: A two-mode Hilbert space.

    Raises:
    - `ValueError`: When `space` is not two-mode.
    """
    if space.modes != 2:
        raise ValueError(f"A tensor basis needs a two-mode space. Got {space}.")
    grid = list(grid)
    single = np.stack([coherent_amplitudes(a, space.truncation) for a in grid], axis=1)
    D, n = single.shape

    # column (i, j) -> kron(single[:, i], single[:, j]), with i the outer index
    vectors = np.einsum("ai,bj->abij", single, single).reshape(D * D, n * n)
    amplitudes = [(a, b) for a, b in product(grid, grid)]
    logger.debug(f"Built {n * n} two-mode product probes on {space}")
    return ProbeBasis(space, vectors, amplitudes, grid_spec)
