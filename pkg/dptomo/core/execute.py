import asyncio
import time
import traceback
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from time import asctime, localtime
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from .. import __version__
from .fit import FitResult, SolverConfig, assemble, fit_pattern, fit_state
from .fock import DensityMatrix, HilbertSpec
from .measurement import MeasurementSet, probe_patterns, signal_pattern
from .metrics import metric_report
from .probes import GridSpec, ProbeBasis
from .seeding import derive_seed, generator
from .states import named_state
from .witness import DETECTION_TOL, build_witness, evaluate_witness, negativity

# handle the hard issue of circular dependencies
if TYPE_CHECKING:
    from .config import ExperimentConfig
    from .experiment import Experiment

# one independent unit of work; `index` fixes the output order
Cell = namedtuple("Cell", ["index", "state", "grid", "parameter", "trial"])
Row = Dict[str, Any]

# the swept per-cell parameter of each experiment, if any
PARAMETERS = {"noise_sweep": "sigma", "reconstruct_sweep": "n_rep"}
# cached bases and fits are shared by cells on the same grid
CACHE_SIZE = 4


def plan(config: "ExperimentConfig") -> List[Cell]:
    """Lists the cells of an experiment in output order."""
    if config.experiment == "reconstruct_sweep":
        parameters: Tuple = config.n_rep_list
        trials = range(config.trials)
    elif config.experiment == "noise_sweep":
        # trials of a noise cell share one fit, so they run inside the cell
        parameters, trials = config.noise_sigmas, range(1)
    else:
        parameters, trials = (None,), range(1)

    cells = []
    for state in config.state_specs:
        for grid in config.grids:
            for parameter in parameters:
                for trial in trials:
                    cells.append(Cell(len(cells), state, grid, parameter, trial))
    return cells


@lru_cache(maxsize=CACHE_SIZE)
def _basis(grid: GridSpec, space: HilbertSpec) -> ProbeBasis:
    return ProbeBasis.coherent(grid, space)


@lru_cache(maxsize=CACHE_SIZE)
def _target(state: str, space: HilbertSpec) -> DensityMatrix:
    return named_state(state, space)


@lru_cache(maxsize=CACHE_SIZE)
def _representation(
    state: str, grid: GridSpec, space: HilbertSpec, solver: SolverConfig
) -> FitResult:
    return fit_state(_target(state, space), _basis(grid, space), solver)


def _grid_columns(grid: GridSpec) -> Row:
    helical = grid.kind == "helical"
    return dict(
        kind=grid.kind,
        N=grid.N,
        d=np.nan if helical else grid.d,
        dr=grid.dr if helical else np.nan,
        dphi=grid.dphi if helical else np.nan,
    )


def _solver_columns(fit: FitResult) -> Row:
    return dict(
        objective=fit.objective,
        iterations=fit.iterations,
        converged=fit.converged,
        constraint_violation=fit.constraint_violation,
    )


def _quality_columns(target: DensityMatrix, rho: DensityMatrix) -> Row:
    report = metric_report(target, rho)
    return dict(
        fidelity=report.fidelity,
        purity=report.purity,
        hs_distance=report.hs_distance,
        min_eigenvalue=rho.raw_min_eigenvalue,
    )


def _witness_columns(W: np.ndarray, rho: DensityMatrix) -> Row:
    trace_value = evaluate_witness(W, rho)
    return dict(
        trace_value=trace_value,
        negativity=negativity(rho),
        detected=trace_value < -DETECTION_TOL,
    )


def _row(cell: Cell, config: "ExperimentConfig") -> Row:
    row: Row = dict(state=cell.state)
    row.update(_grid_columns(cell.grid))
    name = PARAMETERS.get(config.experiment)
    if name is not None:
        row[name] = cell.parameter
    row["trial"] = cell.trial
    return row


def _represent(cell: Cell, config: "ExperimentConfig") -> List[Row]:
    target = _target(cell.state, config.space)
    fit = _representation(cell.state, cell.grid, config.space, config.solver)
    rho = assemble(fit.coefficients, _basis(cell.grid, config.space))

    row = _row(cell, config)
    row.update(_quality_columns(target, rho))
    if config.space.modes == 2:
        # the witness of the precise state, evaluated on its representation
        row.update(_witness_columns(build_witness(target).witness, rho))
    row.update(_solver_columns(fit))
    row["_rho"] = rho
    return [row]


def _witness_table(cell: Cell, config: "ExperimentConfig") -> List[Row]:
    target = _target(cell.state, config.space)
    fit = _representation(cell.state, cell.grid, config.space, config.solver)
    rho = assemble(fit.coefficients, _basis(cell.grid, config.space))
    reference = build_witness(target)

    row = _row(cell, config)
    row["target_trace_value"] = reference.trace_value
    row.update(_witness_columns(reference.witness, rho))
    row["trace_difference"] = abs(row["trace_value"] - reference.trace_value)
    row["fidelity"] = metric_report(target, rho).fidelity
    row.update(_solver_columns(fit))
    row["_rho"] = rho
    return [row]


def _purity_table(cell: Cell, config: "ExperimentConfig") -> List[Row]:
    target = _target(cell.state, config.space)
    fit = _representation(cell.state, cell.grid, config.space, config.solver)
    rho = assemble(fit.coefficients, _basis(cell.grid, config.space))
    report = metric_report(target, rho)

    row = _row(cell, config)
    row["target_purity"] = float(np.sum(np.abs(target.entries) ** 2))
    row["purity"] = report.purity
    row["fidelity"] = report.fidelity
    row.update(_solver_columns(fit))
    row["_rho"] = rho
    return [row]


def _noise(cell: Cell, config: "ExperimentConfig") -> List[Row]:
    target = _target(cell.state, config.space)
    basis = _basis(cell.grid, config.space)
    fit = _representation(cell.state, cell.grid, config.space, config.solver)
    sigma = cell.parameter

    rows = []
    for trial in range(config.trials):
        # seeded by the value of sigma, not its position in the ladder
        path = (config.master_seed, "noise", cell.state, repr(cell.grid), repr(sigma), trial)
        x = fit.coefficients
        if sigma > 0:
            x = x + generator(*path).normal(0.0, sigma, basis.M)
        rho = assemble(x, basis)

        row = _row(cell._replace(trial=trial), config)
        row.update(_quality_columns(target, rho))
        row.update(_solver_columns(fit))
        row["_rho"] = rho
        rows.append(row)
    return rows


def _reconstruct(cell: Cell, config: "ExperimentConfig") -> List[Row]:
    target = _target(cell.state, config.space)
    basis = _basis(cell.grid, config.space)
    if config.measurement is None:
        meas = MeasurementSet.matching(basis)
    else:
        meas = MeasurementSet(_basis(config.measurement, config.space))
    n_rep = cell.parameter

    # probe data does not depend on the signal, so all states of a trial share it
    probe_seed = derive_seed(config.master_seed, "probes", repr(cell.grid), n_rep, cell.trial)
    signal_seed = derive_seed(
        config.master_seed, "signal", cell.state, repr(cell.grid), n_rep, cell.trial
    )
    probes = probe_patterns(basis, meas, n_rep, probe_seed)
    signal = signal_pattern(target, meas, n_rep, signal_seed)
    fit = fit_pattern(signal, probes, basis, config.solver)
    rho = assemble(fit.coefficients, basis)

    row = _row(cell, config)
    row.update(_quality_columns(target, rho))
    if config.space.modes == 2:
        report = build_witness(rho)
        row.update(
            trace_value=report.trace_value,
            negativity=negativity(rho),
            detected=report.detected,
        )
    row.update(_solver_columns(fit))
    row["_rho"] = rho
    return [row]


RUNNERS = {
    "represent": _represent,
    "represent_sweep": _represent,
    "noise_sweep": _noise,
    "reconstruct_sweep": _reconstruct,
    "witness_table": _witness_table,
    "purity_table": _purity_table,
}


def run_cell(cell: Cell, config: "ExperimentConfig") -> List[Row]:
    """
    Computes the rows of one cell.

    Raises:
    - `RuntimeError`: When the cell fails for any reason; the message names the cell.
    """
    logger.trace(f"Starting cell {cell.index}: {cell.state} on {cell.grid}")
    try:
        rows = RUNNERS[config.experiment](cell, config)
    except Exception as e:
        logger.trace(traceback.format_exc())
        msg = f"Cell {cell.index} ({cell.state} on {cell.grid}, "
        msg += f"parameter={cell.parameter}, trial={cell.trial}) failed: {e!r}"
        raise RuntimeError(msg) from e
    logger.debug(f"Finished cell {cell.index}: {cell.state} on {cell.grid}")
    return rows


async def main(experiment: "Experiment", threads: Optional[int] = None) -> List[Row]:
    """
    Runs every cell of an experiment on a bounded thread pool.

    The rows are returned in cell order, which does not depend on the schedule.

    Arguments:
    - `experiment`: The experiment to execute.
    - `threads`: Worker threads. Defaults to the config's `threads`.
    """
    config = experiment.config
    threads = threads or config.threads
    cells = plan(config)
    logger.info(f"Using dptomo v{__version__}")
    logger.info(f"Running {config} as {len(cells)} cell(s) on {threads} thread(s)")

    loop = asyncio.get_running_loop()
    experiment.start_time = time.time()
    logger.success(f"{experiment} started at {asctime(localtime(experiment.start_time))}.")

    with ThreadPoolExecutor(max_workers=threads) as pool:
        tasks = [loop.run_in_executor(pool, run_cell, cell, config) for cell in cells]
        try:
            results = await asyncio.gather(*tasks)
        except RuntimeError as e:
            for task in tasks:
                task.cancel()
            logger.error(f"Got {e}. Full traceback is logged at trace level.")
            logger.critical(f"{experiment} is stopping NOW!")
            raise
        finally:
            experiment.end_time = time.time()

    # gather keeps task order; sort anyway so the contract is explicit
    ordered = sorted(zip(cells, results), key=lambda pair: pair[0].index)
    rows = [row for _, cell_rows in ordered for row in cell_rows]
    logger.success(f"{experiment} completed at {asctime(localtime(experiment.end_time))}.")
    return rows
