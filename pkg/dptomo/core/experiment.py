import asyncio
import os
import re
import time
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Union

import altair as alt
import pandas as pd
from loguru import logger
from terminaltables import AsciiTable, GithubFlavoredMarkdownTable
from xxhash import xxh32

from .execute import PARAMETERS, main

# handle the hard issue of circular dependencies
if TYPE_CHECKING:
    from .config import ExperimentConfig
    from .fock import DensityMatrix

# columns that identify a cell; everything else is a measured quantity
KEY_COLUMNS = ["state", "kind", "N", "d", "dr", "dphi", "sigma", "n_rep"]
GRID_AXES = ["N", "d", "dr", "dphi"]
# quantities aggregated with their mean, spread and range across trials
STATS = ["mean", "std", "min", "max"]
SPREAD_COLUMNS = ["fidelity", "purity", "hs_distance", "trace_value", "negativity"]
# quantities reduced to one number per cell
REDUCTIONS = {
    "target_purity": "mean",
    "target_trace_value": "mean",
    "trace_difference": "max",
    "min_eigenvalue": "min",
    "detected": "all",
    "objective": "mean",
    "iterations": "max",
    "converged": "all",
    "constraint_violation": "max",
}
PLOT_QUANTITIES = ["fidelity", "purity", "trace_value"]
FLOAT_FORMAT = "%.12g"


def aggregate(raw: pd.DataFrame) -> pd.DataFrame:
    """Collapses per-trial rows to one row per cell, keeping the cell order."""
    keys = [c for c in KEY_COLUMNS if c in raw.columns]
    spec: Dict[str, Any] = {}
    for column in raw.columns:
        if column in SPREAD_COLUMNS:
            for stat in STATS:
                spec[f"{column}_{stat}"] = (column, stat)
        elif column in REDUCTIONS:
            spec[column] = (column, REDUCTIONS[column])
    spec["trials"] = ("trial", "count")
    grouped = raw.groupby(keys, sort=False, dropna=False)
    return grouped.agg(**spec).reset_index()


class Experiment(object):
    """
    Experiments hold the results of running an `ExperimentConfig`.

    Arguments:
    - `config`: The validated configuration to run.

    Attributes:
    - `config`: The configuration.
    - `created_time`: The Unix time the object was created.
    - `start_time`: The Unix time execution started.
    - `end_time`: The Unix time execution ended.
    - `experiment_id`: The experiment's ID, of the form `YYYY_MM_DD_HH_MM_SS_HASH`, where HASH is the 32-bit hexadecimal xxhash of the config's YAML.
    - `raw`: A `DataFrame` with one row per (cell, trial), in cell order.
    - `results`: A `DataFrame` with one aggregated row per cell.
    - `states`: The assembled density matrix of every raw row.
    - `was_executed`: Whether the experiment has run.
    """

    def __init__(self, config: "ExperimentConfig"):
        self.config = config
        self.created_time = time.time()
        self.start_time: float
        self.end_time: float
        self.was_executed = False
        self.raw: Optional[pd.DataFrame] = None
        self.results: Optional[pd.DataFrame] = None
        self.states: List["DensityMatrix"] = []

        _local_time = time.localtime(self.created_time)
        _created_time_local = time.strftime("%Y_%m_%d_%H_%M_%S", _local_time)
        config_hash: str = xxh32(config.yaml()).hexdigest()
        self.experiment_id = f"{_created_time_local}_{config_hash}"

        self._file_logger_id: Optional[int] = None
        self._log_file: Optional[Path] = None

    def __str__(self):
        return f"Experiment {self.experiment_id}"

    def __repr__(self):
        return f"<Experiment {self.experiment_id}>"

    def _start_log_file(
        self,
        log_file: Union[str, bool, os.PathLike, None],
        log_file_verbosity: str,
        log_file_compression: Optional[str],
    ) -> None:
        if not log_file:
            return
        # automatically log to the dptomo directory
        if log_file is True:
            dptomo_path = Path("~/.dptomo").expanduser()
            dptomo_path.mkdir(parents=True, exist_ok=True)
            log_file = dptomo_path / Path(self.experiment_id + ".log.jsonl")

        self._file_logger_id = logger.add(
            log_file,
            level=log_file_verbosity.upper(),
            compression=log_file_compression,
            serialize=True,
            enqueue=True,
        )
        logger.trace(f"File logger ID is {self._file_logger_id}")

        self._log_file = Path(log_file)
        if log_file_compression is not None:
            self._log_file = self._log_file.with_suffix(
                self._log_file.suffix + "." + log_file_compression
            )

    def _stop_log_file(self) -> None:
        if self._file_logger_id is None:
            return
        assert self._log_file is not None  # for typing's sake
        logger.info("Wrote logs to " + str(self._log_file.absolute()))
        logger.trace(f"Removing generated file logger {self._file_logger_id}")
        logger.remove(self._file_logger_id)
        # ensure that an execution without logging after one with it doesn't break
        self._file_logger_id = None

    def _execute(
        self,
        log_file: Union[str, bool, os.PathLike, None] = True,
        log_file_verbosity: str = "trace",
        log_file_compression: Optional[str] = None,
        threads: Optional[int] = None,
    ) -> None:
        self._start_log_file(log_file, log_file_verbosity, log_file_compression)
        try:
            rows = asyncio.run(main(experiment=self, threads=threads))
        finally:
            self.was_executed = True
            self._stop_log_file()

        self.states = [row.pop("_rho") for row in rows]
        self.raw = pd.DataFrame(rows)
        self.results = aggregate(self.raw)
        if not self.converged:
            count = int((~self.raw["converged"]).sum())
            logger.warning(f"{count} fit(s) did not converge; their rows are flagged.")

    def _require_results(self) -> pd.DataFrame:
        if self.results is None:
            raise RuntimeError(f"{self} has not been executed.")
        return self.results

    @property
    def converged(self) -> bool:
        """Whether every fit of the experiment converged."""
        if self.raw is None:
            raise RuntimeError(f"{self} has not been executed.")
        return bool(self.raw["converged"].all())

    def write(self, path: Union[str, os.PathLike, None] = None) -> List[Path]:
        """
        Writes the result tables as CSV.

        The aggregated table goes to `path` (default: the config's `output_path`). With
        `raw` or `dump_states` set, the per-trial rows go next to it as `<stem>.raw.csv`;
        with `dump_states`, every row's density matrix is written to `<stem>_states/`
        and named in the raw table's `state_file` column.

        Returns:
        - The paths written, aggregated table first.
        """
        results = self._require_results()
        assert self.raw is not None  # for typing's sake
        path = Path(path if path is not None else self.config.output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        results.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        written = [path]

        if self.config.raw or self.config.dump_states:
            raw = self.raw.copy()
            if self.config.dump_states:
                directory = path.with_name(path.stem + "_states")
                directory.mkdir(parents=True, exist_ok=True)
                names = []
                for i, rho in enumerate(self.states):
                    name = f"row_{i:05d}.csv"
                    rho.to_csv(directory / name)
                    names.append(f"{directory.name}/{name}")
                raw["state_file"] = names
                logger.info(f"Wrote {len(names)} density matrices to {directory}")
            raw_path = path.with_name(path.stem + ".raw.csv")
            raw.to_csv(raw_path, index=False, float_format=FLOAT_FORMAT, na_rep="")
            written.append(raw_path)

        for p in written:
            logger.info(f"Wrote {p}")
        return written

    @property
    def x_column(self) -> str:
        """The swept quantity that plots go against."""
        parameter = PARAMETERS.get(self.config.experiment)
        if parameter is not None:
            return parameter
        results = self._require_results()
        for axis in GRID_AXES:
            if results[axis].dropna().nunique() > 1:
                return axis
        return "N"

    def summarize(self, style: str = "gfm") -> str:
        """
        Prints a summary table of the aggregated results.

        Arguments:
        - `style`: Either `gfm` for GitHub-flavored Markdown or `ascii`.

        Returns:
        - The table as a string.
        """
        results = self._require_results()
        tableStyle = AsciiTable if style == "ascii" else GithubFlavoredMarkdownTable

        keys = [c for c in KEY_COLUMNS if c in results.columns]
        keys = [c for c in keys if results[c].notna().any()]
        quantities = [f"{q}_mean" for q in PLOT_QUANTITIES if f"{q}_mean" in results]
        columns = keys + quantities + ["converged"]

        def cell(value) -> str:
            if isinstance(value, float):
                return "" if pd.isna(value) else f"{value:.6g}"
            return str(value)

        summary = [columns]  # header row
        for _, row in results[columns].iterrows():
            summary.append([cell(v) for v in row])
        table = tableStyle(summary)
        table.title = f"{self.config.experiment} ({self.experiment_id})"
        print(table.table)
        return table.table

    def visualize(self, width: int = 500) -> alt.Chart:
        """
        A chart of the mean fidelity against the swept quantity, one line per state.

        Returns:
        - An `altair.Chart`; save it with `.save("chart.html")`.
        """
        results = self._require_results()
        x = self.x_column
        scale = alt.Scale(type="symlog") if x in ("sigma", "n_rep") else alt.Scale()
        tooltips = ["state", x, "fidelity_mean", "fidelity_std", "converged"]
        chart = (
            alt.Chart(results, width=width)
            .mark_line(point=True)
            .encode(
                x=alt.X(f"{x}:Q", scale=scale),
                y=alt.Y("fidelity_mean:Q", scale=alt.Scale(zero=False)),
                color="state:N",
                tooltip=tooltips,
            )
        )
        chart.encoding.y.title = "Fidelity"
        return chart

    def write_plot_data(self, directory: Union[str, os.PathLike]) -> List[Path]:
        """
        Writes one two-column `x,y` CSV per (series, quantity).

        A series is one state together with any other swept key; `y` is the mean
        across trials.

        Returns:
        - The files written.
        """
        results = self._require_results()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        x = self.x_column
        series_keys = [
            c
            for c in KEY_COLUMNS
            if c in results.columns and c != x and results[c].dropna().nunique() > 1
        ]
        if "state" not in series_keys:
            series_keys.insert(0, "state")

        written = []
        for quantity in PLOT_QUANTITIES:
            column = f"{quantity}_mean"
            if column not in results or results[column].isna().all():
                continue
            for values, group in results.groupby(series_keys, sort=False, dropna=False):
                values = values if isinstance(values, tuple) else (values,)
                label = "__".join(f"{k}={v}" for k, v in zip(series_keys, values))
                slug = re.sub(r"[^A-Za-z0-9.=_-]+", "_", label)
                data = pd.DataFrame({"x": group[x], "y": group[column]}).sort_values("x")
                path = directory / f"{quantity}__{slug}.csv"
                data.to_csv(path, index=False, float_format=FLOAT_FORMAT)
                written.append(path)
        logger.info(f"Wrote {len(written)} plot data file(s) to {directory}")
        return written
