from pint import UnitRegistry

# unit registry for parsing angles such as "pi/4" or "45 degree"
_ureg = UnitRegistry(autoconvert_offset_to_baseunit=True)
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("dptomo")
except PackageNotFoundError:
    __version__ = "unknown"

# to avoid circular import
from .core.fock import (
    CoherentAmplitude,
    DensityMatrix,
    HilbertSpec,
    PureState,
    TruncationError,
    coherent_vector,
    partial_transpose,
    read_density_csv,
    tensor,
)
from .core.states import named_state
from .core.probes import GridSpec, ProbeBasis, helical_grid, square_lattice, tensor_basis
from .core.metrics import (
    MetricReport,
    UnphysicalStateError,
    fidelity,
    hs_distance,
    metric_report,
    purity,
)
from .core.fit import (
    FitResult,
    SolverConfig,
    assemble,
    fit_pattern,
    fit_state,
    read_fit_csv,
)
from .core.measurement import (
    DataPattern,
    MeasurementSet,
    probabilities,
    probe_patterns,
    read_pattern_csv,
    sample_pattern,
    signal_pattern,
)
from .core.witness import WitnessReport, build_witness, evaluate_witness, negativity
from .core.config import ConfigError, ExperimentConfig, load_config, validate_config
from .core.experiment import Experiment

from . import zoo

# deactivate logging (see https://loguru.readthedocs.io/en/stable/overview.html#suitable-for-scripts-and-libraries)
from loguru import logger

logger.remove()
logger.level("SUCCESS", icon="✅")
logger.level("ERROR", icon="❌")
logger.level("TRACE", icon="🔍")
