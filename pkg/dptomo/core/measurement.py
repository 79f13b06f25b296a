"""
Simulated coherent-projection measurements.

Each measurement setting j projects onto a coherent state |beta_j> and is treated as
an independent binary experiment: the pattern value is the probability (or, after
sampling, the observed frequency) of the positive outcome. The settings are not
required to form a complete POVM.
"""
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger
from scipy.stats import binom

from .fock import DensityMatrix, HilbertSpec
from .probes import GridSpec, ProbeBasis
from .seeding import derive_seed, stream_key, uniforms

PATTERN_KINDS = ("probability", "frequency")
# probe patterns and the signal pattern draw from disjoint seed streams
PROBE_STREAM = "probe"
SIGNAL_STREAM = "signal"


class MeasurementSet(object):
    """
    An ordered set of coherent-projection settings Pi_j = |beta_j><beta_j|.

    Arguments:
    - `projections`: A `ProbeBasis` whose states are the projection targets.

    Attributes:
    - `space`: The Hilbert space measured.
    - `settings`: The per-mode `CoherentAmplitude` tuples beta_j, or `None` for
      non-coherent projections.
    - `K`: The number of settings.
    - `povm`: The K rank-1 projectors as `DensityMatrix` objects, built on first use.
    """

    def __init__(self, projections: ProbeBasis):
        self._projections = projections
        self.space: HilbertSpec = projections.space
        self.settings = projections.amplitudes
        self.grid: Optional[GridSpec] = projections.grid

    @classmethod
    def from_grid(cls, grid: GridSpec, space: HilbertSpec) -> "MeasurementSet":
        """Settings on a grid; two-mode spaces use the product of the grid with itself."""
        return cls(ProbeBasis.coherent(grid, space))

    @classmethod
    def matching(cls, basis: ProbeBasis) -> "MeasurementSet":
        """One setting per probe of `basis`, so K = M."""
        return cls(basis)

    @property
    def K(self) -> int:
        return self._projections.M

    def __len__(self):
        return self.K

    @cached_property
    def povm(self) -> List[DensityMatrix]:
        return self._projections.projectors

    @property
    def vectors(self) -> np.ndarray:
        return self._projections.vectors

    def __repr__(self):
        return f"<MeasurementSet K={self.K} on {self.space}>"


@dataclass(frozen=True)
class DataPattern(object):
    """
    The response of one state across all K measurement settings.

    Attributes:
    - `values`: K numbers in [0, 1].
    - `kind`: `"probability"` for exact values, `"frequency"` for sampled ones.
    - `n_rep`: Copies per setting; 0 for exact probabilities.
    - `seed`: The seed the frequencies were drawn with, if sampled.
    """

    values: np.ndarray
    kind: str = "probability"
    n_rep: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError(f"Pattern values must be a vector. Got shape {values.shape}.")
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"Unknown pattern kind '{self.kind}'. Use one of {PATTERN_KINDS}.")
        if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
            raise ValueError("Pattern values must lie in [0, 1].")
        if self.kind == "probability" and self.n_rep != 0:
            raise ValueError(f"Exact patterns have n_rep=0. Got n_rep={self.n_rep}.")
        if self.kind == "frequency":
            if self.n_rep < 1:
                raise ValueError(f"Frequency patterns need n_rep >= 1. Got {self.n_rep}.")
            counts = values * self.n_rep
            if np.max(np.abs(counts - np.round(counts)), initial=0) > 1e-9:
                raise ValueError(f"Frequencies are not multiples of 1/{self.n_rep}.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.K

    def to_csv(self, path: Union[str, os.PathLike]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            f.write(f"# kind={self.kind}\n")
            f.write(f"# n_rep={self.n_rep}\n")
            f.write(f"# seed={self.seed}\n")
            f.write("j,value\n")
            for j, value in enumerate(self.values):
                f.write(f"{j},{float(value)!r}\n")
        return path


def read_pattern_csv(path: Union[str, os.PathLike]) -> DataPattern:
    header = {}
    values: List[float] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line.startswith("#"):
                key, value = line[1:].strip().split("=", 1)
                header[key] = value
            elif line and line != "j,value":
                values.append(float(line.split(",")[1]))
    seed = None if header.get("seed", "None") == "None" else int(header["seed"])
    return DataPattern(np.array(values), header["kind"], int(header["n_rep"]), seed)


def probabilities(rho: DensityMatrix, meas: MeasurementSet) -> DataPattern:
    """
    The exact pattern p_j = Tr(Pi_j rho) = <beta_j|rho|beta_j>.

    Raises:
    - `ValueError`: When `rho` and `meas` live on different spaces.
    """
    if rho.space != meas.space:
        raise ValueError(f"State on {rho.space} cannot be measured by {meas!r}.")
    V = meas.vectors
    values = np.sum(V.conj() * (rho.entries @ V), axis=0)
    residue = np.max(np.abs(values.imag))
    if residue > 1e-12:
        logger.warning(f"Discarding imaginary residue {residue:.3g} of outcome probabilities")
    return DataPattern(np.clip(values.real, 0, 1))


def sample_pattern(p: DataPattern, n_rep: int, seed: int) -> DataPattern:
    """
    Simulates n_rep copies per setting: f_j = Binomial(n_rep, p_j) / n_rep.

    Setting j is drawn by inverting the binomial CDF at the j-th uniform of the stream
    keyed by `seed`, so each value depends only on (p_j, n_rep, seed, j).

    Raises:
    - `ValueError`: When `p` is not an exact pattern or `n_rep < 1`.
    """
    if p.kind != "probability":
        raise ValueError(f"Can only sample exact patterns. Got a {p.kind} pattern.")
    if n_rep < 1:
        raise ValueError(f"n_rep must be at least 1. Got {n_rep}.")
    u = uniforms(stream_key(seed, "pattern"), p.K)
    counts = binom.ppf(u, n_rep, p.values)
    # the CDF inversion is exact at the ends but not always numerically so
    counts = np.where(p.values <= 0, 0, np.where(p.values >= 1, n_rep, counts))
    counts = np.clip(np.nan_to_num(counts), 0, n_rep)
    return DataPattern(counts / n_rep, "frequency", n_rep, seed)


def probe_patterns(
    basis: ProbeBasis, meas: MeasurementSet, n_rep: int, seed: int
) -> List[DataPattern]:
    """
    The patterns of every probe of `basis` under `meas`.

    With `n_rep=0` the exact probabilities are returned. Otherwise probe xi is sampled
    with the seed derived from `(seed, "probe", xi)`.

    Raises:
    - `ValueError`: When the spaces differ or `n_rep` is negative.
    """
    if basis.space != meas.space:
        raise ValueError(f"{basis!r} cannot be measured by {meas!r}.")
    if n_rep < 0:
        raise ValueError(f"n_rep must not be negative. Got {n_rep}.")
    # P[j, xi] = |<beta_j|v_xi>|^2
    overlaps = np.abs(meas.vectors.conj().T @ basis.vectors) ** 2
    exact = [DataPattern(np.clip(column, 0, 1)) for column in overlaps.T]
    if n_rep == 0:
        return exact
    logger.trace(f"Sampling {basis.M} probe patterns with n_rep={n_rep}")
    return [
        sample_pattern(pattern, n_rep, derive_seed(seed, PROBE_STREAM, xi))
        for xi, pattern in enumerate(exact)
    ]


def signal_pattern(
    rho: DensityMatrix, meas: MeasurementSet, n_rep: int, seed: int
) -> DataPattern:
    """The (sampled, unless `n_rep=0`) pattern of the signal state."""
    exact = probabilities(rho, meas)
    if n_rep == 0:
        return exact
    return sample_pattern(exact, n_rep, derive_seed(seed, SIGNAL_STREAM))

