import json
import os
import re
from dataclasses import asdict, dataclass
from itertools import product
from math import isfinite
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Tuple, Union
from warnings import warn

import numpy as np
import yaml
from loguru import logger
from pint.errors import DimensionalityError, UndefinedUnitError

from .. import _ureg
from ..zoo.presets import preset
from ..zoo.suites import default_suite
from .fock import DEFAULT_TRUNCATION, HilbertSpec, TruncationError, coherent_amplitudes
from .fit import SolverConfig
from .probes import GridSpec
from .states import parse_state_spec, state_modes

if TYPE_CHECKING:
    from .experiment import Experiment

EXPERIMENTS = (
    "represent",
    "represent_sweep",
    "noise_sweep",
    "reconstruct_sweep",
    "witness_table",
    "purity_table",
)
FIELDS = (
    "experiment",
    "state_specs",
    "space",
    "grid",
    "measurement",
    "solver",
    "n_rep_list",
    "noise_sigmas",
    "trials",
    "master_seed",
    "output_path",
    "threads",
    "raw",
    "dump_states",
)
GRID_FIELDS = ("kind", "N", "d", "dr", "dphi")
SPACE_FIELDS = ("modes", "truncation")
SOLVER_FIELDS = (
    "coeff_bound",
    "max_iterations",
    "primal_tol",
    "dual_tol",
    "admm_penalty",
    "regularization",
)

# grid defaults per (modes, kind); anything not given falls back to GridSpec's defaults
DEFAULT_GRIDS = {
    (1, "square"): dict(N=6, d=0.15),
    (2, "square"): dict(N=7, d=0.15),
    (1, "helical"): dict(N=17, dr=0.016, dphi=np.pi / 4),
    (2, "helical"): dict(N=17, dr=0.016, dphi=np.pi / 4),
}
DEFAULT_N_REP_LIST = [1000, 10000, 100000, 1000000]
# sigma = 0 reproduces the unperturbed representation
DEFAULT_NOISE_SIGMAS = [0.0] + [float(s) for s in np.logspace(-4, -1, 7)]


class _Loader(yaml.SafeLoader):
    """A safe loader that also reads JSON-style floats such as `1e-7` as numbers."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """
    An invalid experiment configuration.

    Attributes:
    - `field`: The dotted name of the offending field, if known.
    - `line`: The 1-based line of that field in the config text, if known.
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        self.message = message
        location = ""
        if line is not None:
            location += f"line {line}: "
        if field is not None:
            location += f"{field}: "
        super().__init__(location + message)


@dataclass(frozen=True)
class ExperimentConfig(object):
    """
    A validated experiment description.

    Build one with `validate_config` or `load_config` rather than directly.

    Attributes:
    - `experiment`: One of `EXPERIMENTS`.
    - `state_specs`: The state specs to run, in output order.
    - `space`: The Hilbert space of every state.
    - `grids`: The probe grids to sweep, in output order.
    - `measurement`: The measurement grid, or `None` to measure on the probe grid (K = M).
    - `solver`: The solver settings.
    - `n_rep_list`: Copies per setting for reconstruction; 0 means exact patterns.
    - `noise_sigmas`: Standard deviations of the coefficient noise.
    - `trials`: Repetitions of every random cell.
    - `master_seed`: The root of every seed.
    - `output_path`: Where the aggregated CSV goes.
    - `threads`: Worker threads.
    - `raw`: Whether to also write the per-trial rows.
    - `dump_states`: Whether to write every reconstructed density matrix.
    """

    experiment: str = "represent"
    state_specs: Tuple[str, ...] = ()
    space: HilbertSpec = HilbertSpec()
    grids: Tuple[GridSpec, ...] = (GridSpec(),)
    measurement: Optional[GridSpec] = None
    solver: SolverConfig = SolverConfig()
    n_rep_list: Tuple[int, ...] = tuple(DEFAULT_N_REP_LIST)
    noise_sigmas: Tuple[float, ...] = tuple(DEFAULT_NOISE_SIGMAS)
    trials: int = 1
    master_seed: int = 0
    output_path: str = "results.csv"
    threads: int = 1
    raw: bool = False
    dump_states: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return dict(
            experiment=self.experiment,
            state_specs=list(self.state_specs),
            space=asdict(self.space),
            grid=[asdict(g) for g in self.grids],
            measurement=asdict(self.measurement) if self.measurement else None,
            solver=asdict(self.solver),
            n_rep_list=list(self.n_rep_list),
            noise_sigmas=list(self.noise_sigmas),
            trials=self.trials,
            master_seed=self.master_seed,
            output_path=self.output_path,
            threads=self.threads,
            raw=self.raw,
            dump_states=self.dump_states,
        )

    def yaml(self) -> str:
        """The validated configuration, defaults filled in, as YAML."""
        return yaml.safe_dump(self.to_dict(), default_flow_style=False, sort_keys=False)

    def json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=4)

    def override(self, **overrides) -> "ExperimentConfig":
        """
        A copy with some fields replaced; `None` values are ignored.

        Raises:
        - `ConfigError`: When an override is invalid.
        """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        raw = self.to_dict()
        raw.update(overrides)
        return validate_config(raw)

    def execute(
        self,
        log_file: Union[str, bool, os.PathLike, None] = True,
        log_file_verbosity: str = "trace",
        log_file_compression: Optional[str] = None,
    ) -> "Experiment":
        """
        Runs the experiment.

        Arguments:
        - `log_file`: Where to write the logs. If `True`, they go to `~/.dptomo/{experiment_id}.log.jsonl`. If falsey, no log file is written.
        - `log_file_verbosity`: The level of the log file.
        - `log_file_compression`: Whether to compress the log file afterwards.

        Returns:
        - The executed `Experiment`, holding the result tables.
        """
        from .experiment import Experiment

        E = Experiment(self)
        E._execute(
            log_file=log_file,
            log_file_verbosity=log_file_verbosity,
            log_file_compression=log_file_compression,
        )
        return E

    def __str__(self):
        return f"{self.experiment} of {len(self.state_specs)} state(s) on {len(self.grids)} grid(s)"


def _line_map(text: str) -> Dict[str, int]:
    """Maps dotted key names to their 1-based line in a YAML document."""
    lines: Dict[str, int] = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                name = f"{prefix}{key.value}"
                lines[name] = key.start_mark.line + 1
                walk(value, name + ".")
        elif isinstance(node, yaml.SequenceNode):
            for item in node.value:
                walk(item, prefix)

    walk(yaml.compose(text, Loader=_Loader), "")
    return lines


class _Validator(object):
    def __init__(self, lines: Dict[str, int]):
        self.lines = lines

    def error(self, name: str, message: str) -> ConfigError:
        # fall back to the enclosing key's line for nested fields
        line = self.lines.get(name)
        parent = name
        while line is None and "." in parent:
            parent = parent.rsplit(".", 1)[0]
            line = self.lines.get(parent)
        return ConfigError(message, field=name, line=line)

    def mapping(self, name: str, value, allowed) -> Mapping:
        if value is None:
            return {}
        if not isinstance(value, Mapping):
            raise self.error(name, f"Expected a mapping. Got {type(value).__name__}.")
        for key in value:
            if key not in allowed:
                msg = f"Unknown field '{key}'. "
                msg += f"Valid fields are {list(allowed)}."
                raise self.error(f"{name}.{key}" if name else str(key), msg)
        return value

    def integer(self, name: str, value, minimum: Optional[int] = None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(name, f"Expected an integer. Got {value!r}.")
        if minimum is not None and value < minimum:
            raise self.error(name, f"Must be at least {minimum}. Got {value}.")
        return value

    def number(self, name: str, value, minimum: Optional[float] = None) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(name, f"Expected a number. Got {value!r}.")
        if not isfinite(value):
            raise self.error(name, f"Must be finite. Got {value}.")
        if minimum is not None and value < minimum:
            raise self.error(name, f"Must be at least {minimum}. Got {value}.")
        return float(value)

    def boolean(self, name: str, value) -> bool:
        if not isinstance(value, bool):
            raise self.error(name, f"Expected true or false. Got {value!r}.")
        return value

    def angle(self, name: str, value) -> float:
        """Radians from a number or a Pint expression such as `"pi/4"` or `"45 degree"`."""
        if isinstance(value, str):
            try:
                quantity = _ureg.parse_expression(value)
            except (UndefinedUnitError, SyntaxError, AttributeError, TypeError) as e:
                raise self.error(name, f"Cannot parse angle '{value}': {e}")
            if isinstance(quantity, _ureg.Quantity):
                try:
                    value = float(quantity.to("radian").magnitude)
                except DimensionalityError:
                    msg = f"Expected an angle but got {quantity.dimensionality}."
                    raise self.error(name, msg)
            else:
                value = float(quantity)
        return self.number(name, value)

    def sweep(self, name: str, value) -> List:
        """A scalar or a nonempty list, as a list."""
        if isinstance(value, list):
            if not value:
                raise self.error(name, "Sweep must not be empty.")
            return value
        return [value]

    def grid(self, name: str, value, modes: int, sweepable: bool) -> List[GridSpec]:
        # a list of mappings gives the grids explicitly
        if isinstance(value, list) and sweepable:
            if not value:
                raise self.error(name, "Grid list must not be empty.")
            grids: List[GridSpec] = []
            for item in value:
                grids.extend(self.grid(name, item, modes, sweepable=False))
            return grids

        value = self.mapping(name, value, GRID_FIELDS)
        kind = value.get("kind", "square")
        if kind not in ("square", "helical"):
            raise self.error(f"{name}.kind", f"Must be 'square' or 'helical'. Got {kind!r}.")

        settings = dict(DEFAULT_GRIDS[(modes, kind)])
        settings.update({k: v for k, v in value.items() if k != "kind"})
        axes = []
        for key in ("N", "d", "dr", "dphi"):
            if key not in settings:
                axes.append([None])
                continue
            values = self.sweep(f"{name}.{key}", settings[key])
            if len(values) > 1 and not sweepable:
                raise self.error(f"{name}.{key}", "Expected a single value, not a list.")
            if key == "N":
                values = [self.integer(f"{name}.N", v, minimum=1) for v in values]
            elif key == "dphi":
                values = [self.angle(f"{name}.dphi", v) for v in values]
            else:
                values = [self.number(f"{name}.{key}", v) for v in values]
            axes.append(values)

        grids = []
        for N, d, dr, dphi in product(*axes):
            given = dict(N=N, d=d, dr=dr, dphi=dphi)
            try:
                grids.append(GridSpec(kind=kind, **{k: v for k, v in given.items() if v is not None}))
            except ValueError as e:
                raise self.error(name, str(e))
        return grids

    def fits(self, name: str, grids: List[GridSpec], space: HilbertSpec) -> None:
        """Checks the largest amplitude of each grid against the truncation."""
        for grid in grids:
            largest = max(grid.amplitudes(), key=lambda a: abs(a.value))
            try:
                coherent_amplitudes(largest, space.truncation)
            except TruncationError as e:
                msg = f"The {grid} does not fit the space: {e} "
                msg += "Raise space.truncation or shrink the grid."
                raise self.error(name, msg)


def _read(raw: Union[str, Mapping, None]) -> Tuple[Mapping, Dict[str, int]]:
    if raw is None:
        return {}, {}
    if isinstance(raw, Mapping):
        return raw, {}
    if not isinstance(raw, str):
        raise TypeError(f"Config must be YAML/JSON text or a mapping. Got {type(raw)}.")
    try:
        data = yaml.load(raw, Loader=_Loader)
        lines = _line_map(raw)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"Invalid YAML: {getattr(e, 'problem', e)}", line=line)
    if data is None:
        return {}, lines
    if not isinstance(data, Mapping):
        raise ConfigError(f"Config must be a mapping at the top level. Got {type(data).__name__}.")
    return data, lines


def validate_config(raw: Union[str, Mapping, None]) -> ExperimentConfig:
    """
    Parses and validates an experiment configuration.

    Arguments:
    - `raw`: YAML or JSON text, or an already parsed mapping.

    Returns:
    - The `ExperimentConfig` with every default filled in.

    Raises:
    - `ConfigError`: On unknown fields, type mismatches, values out of range or empty
      sweeps. The message names the field and, for text input, the line.
    """
    data, lines = _read(raw)
    v = _Validator(lines)
    v.mapping("", data, FIELDS)

    experiment = data.get("experiment", "represent")
    if experiment not in EXPERIMENTS:
        raise v.error("experiment", f"Must be one of {list(EXPERIMENTS)}. Got {experiment!r}.")

    # space, with the mode count inferred from the states when not given
    space_raw = v.mapping("space", data.get("space"), SPACE_FIELDS)
    specs_raw = data.get("state_specs")
    if specs_raw is not None:
        if not isinstance(specs_raw, list) or not specs_raw:
            raise v.error("state_specs", "Expected a nonempty list of state specs.")
        for spec in specs_raw:
            if not isinstance(spec, str):
                raise v.error("state_specs", f"State specs are strings. Got {spec!r}.")
            try:
                parse_state_spec(spec)
            except ValueError as e:
                raise v.error("state_specs", str(e))

    if "modes" in space_raw:
        modes = v.integer("space.modes", space_raw["modes"])
        if modes not in (1, 2):
            raise v.error("space.modes", f"Must be 1 or 2. Got {modes}.")
    elif specs_raw is not None:
        modes = state_modes(specs_raw[0])
    else:
        modes = 2 if experiment == "witness_table" else 1
    truncation = v.integer(
        "space.truncation",
        space_raw.get("truncation", DEFAULT_TRUNCATION[modes]),
        minimum=2,
    )
    space = HilbertSpec(modes=modes, truncation=truncation)

    state_specs = list(specs_raw) if specs_raw is not None else default_suite(modes)
    for spec in state_specs:
        if state_modes(spec) != modes:
            msg = f"State '{spec}' has {state_modes(spec)} mode(s) but the space has {modes}."
            raise v.error("state_specs", msg)
    if experiment == "witness_table" and modes != 2:
        raise v.error("space.modes", "witness_table needs two-mode states.")

    grids = v.grid("grid", data.get("grid"), modes, sweepable=True)
    v.fits("grid", grids, space)
    if experiment == "represent" and len(grids) > 1:
        raise v.error("grid", "represent takes a single grid. Use represent_sweep to sweep.")

    measurement = None
    if data.get("measurement") is not None:
        measurement = v.grid("measurement", data["measurement"], modes, sweepable=False)[0]
        v.fits("measurement", [measurement], space)
        if experiment != "reconstruct_sweep":
            msg = f"measurement has no effect on {experiment}."
            logger.warning(msg)
            warn(msg)

    solver_raw = v.mapping("solver", data.get("solver"), SOLVER_FIELDS)
    solver_settings: Dict[str, Any] = {}
    for key, value in solver_raw.items():
        if key == "max_iterations":
            solver_settings[key] = v.integer(f"solver.{key}", value, minimum=1)
        else:
            solver_settings[key] = v.number(f"solver.{key}", value)
    try:
        solver = SolverConfig(**solver_settings)
    except ValueError as e:
        raise v.error("solver", str(e))

    n_rep_list = data.get("n_rep_list", DEFAULT_N_REP_LIST)
    if not isinstance(n_rep_list, list) or not n_rep_list:
        raise v.error("n_rep_list", "Expected a nonempty list of copy counts.")
    n_rep_list = [v.integer("n_rep_list", n, minimum=0) for n in n_rep_list]

    noise_sigmas = data.get("noise_sigmas", DEFAULT_NOISE_SIGMAS)
    if not isinstance(noise_sigmas, list) or not noise_sigmas:
        raise v.error("noise_sigmas", "Expected a nonempty list of noise amplitudes.")
    noise_sigmas = [v.number("noise_sigmas", s, minimum=0) for s in noise_sigmas]

    return ExperimentConfig(
        experiment=experiment,
        state_specs=tuple(state_specs),
        space=space,
        grids=tuple(grids),
        measurement=measurement,
        solver=solver,
        n_rep_list=tuple(n_rep_list),
        noise_sigmas=tuple(noise_sigmas),
        trials=v.integer("trials", data.get("trials", 1), minimum=1),
        master_seed=v.integer("master_seed", data.get("master_seed", 0), minimum=0),
        output_path=str(data.get("output_path", f"{experiment}.csv")),
        threads=v.integer("threads", data.get("threads", 1), minimum=1),
        raw=v.boolean("raw", data.get("raw", False)),
        dump_states=v.boolean("dump_states", data.get("dump_states", False)),
    )


def load_config(path: Union[str, os.PathLike]) -> ExperimentConfig:
    """
    Reads and validates a YAML or JSON config file.

    A path of the form `zoo:<name>` loads a prebuilt preset instead.

    Raises:
    - `ConfigError`: When the file cannot be read or is invalid.
    """
    if isinstance(path, str) and path.startswith("zoo:"):
        try:
            return validate_config(preset(path[len("zoo:"):]))
        except KeyError as e:
            raise ConfigError(str(e.args[0]))
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e.strerror}")
    logger.debug(f"Loaded config from {path}")
    return validate_config(text)
