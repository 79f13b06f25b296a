"""
The state-spec mini-language.

A state spec is a family name, optionally followed by a colon and one parameter,
for example `fock:1`, `coherent:0.5`, `even_cat:0.5`, `mix01:p=0.3` or `bell_psi`.
"""
from collections import namedtuple
from typing import Callable, Dict, Optional

import numpy as np

from .fock import DensityMatrix, HilbertSpec, PureState, coherent_amplitudes, fock_vector

StateFamily = namedtuple("StateFamily", ["modes", "parameter", "builder", "description"])
ParsedSpec = namedtuple("ParsedSpec", ["family", "value"])


def _pure(space: HilbertSpec, vector: np.ndarray) -> DensityMatrix:
    return PureState.normalized(space, vector).density()


def _two_mode(space: HilbertSpec, pairs) -> np.ndarray:
    vector = np.zeros(space.dim, dtype=complex)
    for weight, first, second in pairs:
        vector += weight * np.kron(first, second)
    return vector


def _fock(space: HilbertSpec, n: float) -> DensityMatrix:
    return _pure(space, fock_vector(int(n), space.truncation))


def _coherent(space: HilbertSpec, alpha: complex) -> DensityMatrix:
    return _pure(space, coherent_amplitudes(alpha, space.truncation))


def _even_cat(space: HilbertSpec, alpha: complex) -> DensityMatrix:
    D = space.truncation
    # <alpha|-alpha> = exp(-2|alpha|^2)
    norm = np.sqrt(2 * (1 + np.exp(-2 * abs(alpha) ** 2)))
    vector = coherent_amplitudes(alpha, D) + coherent_amplitudes(-alpha, D)
    return _pure(space, vector / norm)


def _superposition01(space: HilbertSpec, _) -> DensityMatrix:
    D = space.truncation
    return _pure(space, (fock_vector(0, D) + fock_vector(1, D)) / np.sqrt(2))


def _mix01(space: HilbertSpec, p: float) -> DensityMatrix:
    diagonal = np.zeros(space.dim)
    diagonal[0], diagonal[1] = p, 1 - p
    return DensityMatrix(space, np.diag(diagonal))


def _entangled_cat(space: HilbertSpec, alpha: complex) -> DensityMatrix:
    D = space.truncation
    plus, minus = coherent_amplitudes(alpha, D), coherent_amplitudes(-alpha, D)
    # |<alpha,-alpha|-alpha,alpha>| = exp(-4|alpha|^2)
    norm = np.sqrt(2 * (1 + np.exp(-4 * abs(alpha) ** 2)))
    return _pure(space, _two_mode(space, [(1, plus, minus), (1, minus, plus)]) / norm)


def _bell_vector(space: HilbertSpec, kind: str) -> np.ndarray:
    D = space.truncation
    zero, one = fock_vector(0, D), fock_vector(1, D)
    if kind == "psi":
        pairs = [(1, zero, one), (1, one, zero)]
    else:
        pairs = [(1, zero, zero), (1, one, one)]
    return _two_mode(space, pairs) / np.sqrt(2)


def _bell_psi(space: HilbertSpec, _) -> DensityMatrix:
    return _pure(space, _bell_vector(space, "psi"))


def _bell_phi(space: HilbertSpec, _) -> DensityMatrix:
    return _pure(space, _bell_vector(space, "phi"))


def _bell_mix(space: HilbertSpec, p: float) -> DensityMatrix:
    psi, phi = _bell_vector(space, "psi"), _bell_vector(space, "phi")
    matrix = (1 - p) * np.outer(psi, psi.conj()) + p * np.outer(phi, phi.conj())
    return DensityMatrix(space, matrix)


FAMILIES: Dict[str, StateFamily] = {
    "vacuum": StateFamily(1, None, lambda space, _: _fock(space, 0), "|0>"),
    "fock": StateFamily(1, "n", _fock, "|n>"),
    "coherent": StateFamily(1, "alpha", _coherent, "|alpha>"),
    "even_cat": StateFamily(1, "alpha", _even_cat, "|alpha> + |-alpha>, normalized"),
    "superpos01": StateFamily(1, None, _superposition01, "(|0> + |1>)/sqrt(2)"),
    "mix01": StateFamily(1, "p", _mix01, "p|0><0| + (1-p)|1><1|"),
    "entangled_cat": StateFamily(
        2, "alpha", _entangled_cat, "|alpha,-alpha> + |-alpha,alpha>, normalized"
    ),
    "bell_psi": StateFamily(2, None, _bell_psi, "(|01> + |10>)/sqrt(2)"),
    "bell_phi": StateFamily(2, None, _bell_phi, "(|00> + |11>)/sqrt(2)"),
    "bell_mix": StateFamily(2, "p", _bell_mix, "(1-p)|psi+><psi+| + p|phi+><phi+|"),
}


def _parse_value(parameter: str, raw: str, spec: str):
    # both "mix01:0.3" and "mix01:p=0.3" are accepted
    if "=" in raw:
        key, raw = (x.strip() for x in raw.split("=", 1))
        if key != parameter:
            raise ValueError(
                f"Unknown parameter '{key}' in state spec '{spec}'. Expected '{parameter}'."
            )
    try:
        value: complex = complex(raw.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ValueError(f"Cannot parse '{raw}' as a number in state spec '{spec}'.")
    if not np.isfinite(value):
        raise ValueError(f"Parameter of state spec '{spec}' must be finite.")

    if parameter == "alpha":
        return value
    if value.imag != 0:
        raise ValueError(f"Parameter '{parameter}' of '{spec}' must be real.")
    value = value.real
    if parameter == "p" and not 0 <= value <= 1:
        raise ValueError(f"Mixing parameter p must lie in [0, 1]. Got {value} in '{spec}'.")
    if parameter == "n" and (value < 0 or value != int(value)):
        raise ValueError(f"Fock level must be a non-negative integer. Got '{spec}'.")
    return value


def parse_state_spec(spec: str) -> ParsedSpec:
    """
    Splits and validates a state spec without building the state.

    Raises:
    - `ValueError`: Unknown family, missing or extra parameter, or parameter out of range.
    """
    if not isinstance(spec, str):
        raise TypeError(f"State spec must be a str. Got {type(spec)}.")
    name, _, raw = spec.strip().partition(":")
    try:
        family = FAMILIES[name]
    except KeyError:
        msg = f"Unknown state family '{name}'. "
        msg += f"Valid families are {sorted(FAMILIES)}."
        raise ValueError(msg)

    if family.parameter is None:
        if raw:
            raise ValueError(f"State family '{name}' takes no parameter. Got '{spec}'.")
        return ParsedSpec(name, None)
    if not raw:
        raise ValueError(f"State family '{name}' needs a parameter '{family.parameter}'.")
    return ParsedSpec(name, _parse_value(family.parameter, raw, spec))


def state_modes(spec: str) -> int:
    return FAMILIES[parse_state_spec(spec).family].modes


def named_state(spec: str, space: Optional[HilbertSpec] = None) -> DensityMatrix:
    """
    Builds the density matrix of a named state.

    Arguments:
    - `spec`: A state spec such as `"fock:1"`, `"even_cat:0.5"` or `"bell_mix:p=0.2"`.
    - `space`: The Hilbert space. Defaults to the default space for the family's mode count.

    Returns:
    - The normalized `DensityMatrix`.

    Raises:
    - `ValueError`: Unknown family, a parameter out of range, or a space with the wrong mode count.
    - `TruncationError`: When a coherent amplitude does not fit the truncation.
    """
    parsed = parse_state_spec(spec)
    family = FAMILIES[parsed.family]
    if space is None:
        space = HilbertSpec.default(family.modes)
    if space.modes != family.modes:
        msg = f"State '{spec}' is a {family.modes}-mode state "
        msg += f"but the space has {space.modes} mode(s)."
        raise ValueError(msg)
    if parsed.family == "fock" and parsed.value >= space.truncation:
        raise ValueError(f"Fock level in '{spec}' does not fit truncation {space.truncation}.")
    builder: Callable = family.builder
    return builder(space, parsed.value)
