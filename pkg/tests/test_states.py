import numpy as np
import pytest

import dptomo as dp
from dptomo.core.states import FAMILIES, parse_state_spec, state_modes

two_mode = dp.HilbertSpec(modes=2, truncation=4)


def test_every_family_builds():
    for name, family in FAMILIES.items():
        if family.parameter is None:
            spec = name
        else:
            spec = f"{name}:1" if name == "fock" else f"{name}:0.5"
        rho = dp.named_state(spec)
        assert rho.space == dp.HilbertSpec.default(family.modes)
        assert np.trace(rho.entries).real == pytest.approx(1)


def test_parse():
    assert parse_state_spec("fock:1") == ("fock", 1.0)
    assert parse_state_spec("mix01:p=0.3") == ("mix01", 0.3)
    assert parse_state_spec("mix01:0.3") == ("mix01", 0.3)
    assert parse_state_spec("coherent:0.5+0.25i").value == 0.5 + 0.25j
    assert parse_state_spec("bell_psi") == ("bell_psi", None)
    assert state_modes("entangled_cat:0.5") == 2
    assert state_modes("superpos01") == 1


@pytest.mark.parametrize(
    "spec",
    [
        "unknown",
        "coherent",
        "bell_psi:0.2",
        "fock:1.5",
        "fock:-1",
        "mix01:p=2",
        "mix01:q=0.3",
        "coherent:abc",
        "coherent:nan",
        "fock:1j",
    ],
)
def test_bad_specs(spec):
    with pytest.raises(ValueError):
        parse_state_spec(spec)


def test_wrong_space():
    with pytest.raises(ValueError, match="mode"):
        dp.named_state("fock:1", two_mode)
    with pytest.raises(ValueError, match="truncation"):
        dp.named_state("fock:12")
    with pytest.raises(dp.TruncationError):
        dp.named_state("coherent:3", dp.HilbertSpec(1, 6))


def test_single_mode_states():
    fock = dp.named_state("fock:1").entries
    assert fock[1, 1] == 1
    assert np.sum(np.abs(fock)) == pytest.approx(1)

    mix = dp.named_state("mix01:p=0.3").entries
    assert np.allclose(np.diag(mix)[:2], [0.3, 0.7])

    superposition = dp.named_state("superpos01").entries
    assert np.allclose(superposition[:2, :2], 0.5)

    # the even cat has no odd photon numbers
    cat = dp.named_state("even_cat:0.5").entries
    assert np.allclose(cat[1::2, :], 0, atol=1e-15)
    assert dp.purity(dp.named_state("even_cat:0.5")) == pytest.approx(1)


def test_two_mode_states():
    D = two_mode.truncation
    psi = dp.named_state("bell_psi", two_mode).entries
    # (|01> + |10>)/sqrt(2)
    for i in (0 * D + 1, 1 * D + 0):
        for j in (0 * D + 1, 1 * D + 0):
            assert psi[i, j] == pytest.approx(0.5)

    phi = dp.named_state("bell_phi", two_mode).entries
    assert phi[0, D + 1] == pytest.approx(0.5)

    mixed = dp.named_state("bell_mix:p=0.25", two_mode)
    expected = 0.75 * psi + 0.25 * phi
    assert np.allclose(mixed.entries, expected)

    cat = dp.named_state("entangled_cat:0.5", dp.HilbertSpec(2, 10))
    assert dp.purity(cat) == pytest.approx(1)
