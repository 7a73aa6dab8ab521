"""Observable parsing/evaluation and power-law fitting."""

import numpy as np
import pytest

from ddcavity.hilbert import HilbertLayout, initial_ket
from ddcavity.metrics import evaluate, observable, scaling_fit, standard_error


def ket2(lay, pairs):
    v = np.zeros(lay.dim, dtype=complex)
    for lbl, n, a in pairs:
        v[lay.basis_index(lbl, n)] = a
    return v / np.linalg.norm(v)


def test_observable_roundtrip_names():
    for name in (
        "transfer_fidelity",
        "entanglement_fidelity",
        "photon_number",
        "concurrence",
        "pop_eg",
        "pop_e",
        "sigma_y_1",
        "sigma_y_2",
    ):
        assert observable(name).name == name
    with pytest.raises(ValueError):
        observable("purity")


def test_transfer_fidelity_targets_single_photon():
    lay = HilbertLayout(n_tls=1, fock_cutoff=3)
    assert evaluate(observable("transfer_fidelity"), initial_ket(lay, "g1"), lay) == pytest.approx(1.0)
    assert evaluate(observable("transfer_fidelity"), initial_ket(lay, "e0"), lay) == pytest.approx(0.0)


def test_population_and_photon_number():
    lay = HilbertLayout(n_tls=2, fock_cutoff=3)
    psi = initial_ket(lay, "eg2")
    assert evaluate(observable("pop_eg"), psi, lay) == pytest.approx(1.0)
    assert evaluate(observable("pop_gg"), psi, lay) == pytest.approx(0.0)
    assert evaluate(observable("photon_number"), psi, lay) == pytest.approx(2.0)


def test_entanglement_fidelity_bell_target():
    lay = HilbertLayout(n_tls=2, fock_cutoff=2)
    ob = observable("entanglement_fidelity")
    bell = ket2(lay, [("eg", 0, 1.0), ("ge", 0, 1j)])
    assert evaluate(ob, bell, lay) == pytest.approx(1.0)
    assert evaluate(ob, initial_ket(lay, "eg0"), lay) == pytest.approx(0.5)
    orth = ket2(lay, [("eg", 0, 1.0), ("ge", 0, -1j)])
    assert evaluate(ob, orth, lay) == pytest.approx(0.0, abs=1e-12)


def test_concurrence_observable_traces_out_cavity():
    lay = HilbertLayout(n_tls=2, fock_cutoff=3)
    bell = ket2(lay, [("eg", 1, 1.0), ("ge", 1, 1j)])
    assert evaluate(observable("concurrence"), bell, lay) == pytest.approx(1.0)
    assert evaluate(observable("concurrence"), initial_ket(lay, "gg0"), lay) == pytest.approx(0.0)


def test_sigma_y_expectation():
    lay = HilbertLayout(n_tls=1, fock_cutoff=2)
    psi = initial_ket(lay, {"spins": ["+y"], "photons": 0})
    val = evaluate(observable("sigma_y_1"), psi, lay)
    assert abs(val) == pytest.approx(1.0)


def test_evaluate_accepts_density_matrices():
    lay = HilbertLayout(n_tls=1, fock_cutoff=2)
    psi = initial_ket(lay, "g1")
    rho = np.outer(psi, psi.conj())
    assert evaluate(observable("photon_number"), rho, lay) == pytest.approx(1.0)


def test_scaling_fit_recovers_power_law():
    x = np.array([8.0, 16.0, 32.0, 64.0, 128.0])
    y = 3.7 * x**-1.93
    fit = scaling_fit(x, y)
    assert fit.exponent == pytest.approx(-1.93, abs=1e-10)
    assert fit.prefactor == pytest.approx(3.7, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_standard_error():
    assert standard_error(0.4, 16) == pytest.approx(0.1)
    arr = standard_error(np.array([0.2, 0.4]), 4)
    assert np.allclose(arr, [0.1, 0.2])
