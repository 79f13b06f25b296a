"""
Prebuilt experiment configurations.

Each preset is a plain configuration mapping accepted by `validate_config`. On the
command line a preset is selected with `zoo:<name>` in place of a config path, e.g.
`tomo represent-sweep zoo:helical_mixed`.
"""
from copy import deepcopy
from typing import Any, Dict

from .suites import MIXED_SINGLE_MODE, MIXED_TWO_MODE, SINGLE_MODE, TWO_MODE

PRESETS: Dict[str, Dict[str, Any]] = {
    # pitch dependence of the single-mode representation on a 6 x 6 lattice
    "square_pitch": dict(
        experiment="represent_sweep",
        state_specs=SINGLE_MODE,
        grid=dict(kind="square", N=6, d=[0.05, 0.1, 0.15, 0.2]),
    ),
    # mixed states on the 17-node spiral
    "helical_mixed": dict(
        experiment="represent_sweep",
        state_specs=MIXED_SINGLE_MODE,
        grid=dict(kind="helical", N=17, dr=0.016, dphi="pi/4"),
    ),
    "two_mode_lattice": dict(
        experiment="represent_sweep",
        state_specs=TWO_MODE,
        space=dict(modes=2, truncation=10),
        grid=dict(kind="square", N=[6, 7], d=0.15),
    ),
    "two_mode_mixed": dict(
        experiment="represent_sweep",
        state_specs=MIXED_TWO_MODE,
        space=dict(modes=2, truncation=10),
        grid=dict(kind="square", N=7, d=0.15),
    ),
    "noise_helical": dict(
        experiment="noise_sweep",
        state_specs=["coherent:0.5"],
        grid=dict(kind="helical", N=17, dr=0.016, dphi="pi/4"),
        noise_sigmas=[0.0, 1e-4, 1e-3, 1e-2, 1e-1],
        trials=200,
    ),
    "witness_pitch": dict(
        experiment="witness_table",
        state_specs=TWO_MODE,
        space=dict(modes=2, truncation=10),
        grid=dict(kind="square", N=7, d=[0.05, 0.1, 0.15, 0.2]),
    ),
    "purity_two_mode": dict(
        experiment="purity_table",
        state_specs=TWO_MODE,
        space=dict(modes=2, truncation=10),
        grid=dict(kind="square", N=7, d=0.15),
    ),
    "reconstruct_single": dict(
        experiment="reconstruct_sweep",
        state_specs=SINGLE_MODE,
        grid=dict(kind="square", N=6, d=0.15),
        n_rep_list=[1000, 10000, 100000, 1000000],
        trials=5,
    ),
    "reconstruct_two_mode": dict(
        experiment="reconstruct_sweep",
        state_specs=TWO_MODE,
        space=dict(modes=2, truncation=10),
        grid=dict(kind="square", N=7, d=0.15),
        n_rep_list=[1000, 10000, 100000, 1000000],
        trials=5,
    ),
}


def preset(name: str) -> Dict[str, Any]:
    """
    A copy of a named preset.

    Raises:
    - `KeyError`: When no preset has that name.
    """
    try:
        return deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"No preset named '{name}'. Valid presets are {sorted(PRESETS)}.")
