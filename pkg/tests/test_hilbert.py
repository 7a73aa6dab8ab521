"""Operator algebra, state construction, and truncation guards."""

import numpy as np
import pytest

from ddcavity.hilbert import (
    HilbertLayout,
    LeakageError,
    build_elementary,
    check_truncation,
    concurrence,
    expm_hermitian,
    initial_ket,
    partial_trace,
    top_fock_population,
)


def test_layout_dimensions():
    lay = HilbertLayout(n_tls=2, fock_cutoff=5)
    assert lay.dim == 2 * 2 * 5
    assert lay.spin_dim == 4


def test_annihilation_commutator():
    lay = HilbertLayout(n_tls=1, fock_cutoff=8)
    ops = build_elementary(lay)
    a, num = ops["a"], ops["num"]
    comm = a @ ops["adag"] - ops["adag"] @ a
    # truncation breaks [a, a^dag] = 1 only in the top Fock level
    dev = comm - np.eye(lay.dim)
    top = np.isclose(np.diag(num).real, lay.fock_cutoff - 1)
    assert np.max(np.abs(dev[~top][:, ~top])) < 1e-12


def test_sigma_algebra():
    lay = HilbertLayout(n_tls=1, fock_cutoff=2)
    ops = build_elementary(lay)
    sp, sm, sz = ops["sp1"], ops["sm1"], ops["sz1"]
    assert np.allclose(sz @ sp - sp @ sz, 2 * sp)
    sx, sy = ops["sx1"], ops["sy1"]
    # ladder decomposition in the (g, e) ordering used throughout
    assert np.allclose(sp, (sx - 1j * sy) / 2)
    assert np.allclose(sm, (sx + 1j * sy) / 2)
    assert np.allclose(sx @ sx, np.eye(lay.dim))
    assert np.allclose(sy @ sy, np.eye(lay.dim))


def test_initial_ket_labels():
    lay = HilbertLayout(n_tls=1, fock_cutoff=3)
    psi = initial_ket(lay, "e0")
    assert np.isclose(np.linalg.norm(psi), 1.0)
    ops = build_elementary(lay)
    assert np.isclose((psi.conj() @ ops["num"] @ psi).real, 0.0)
    assert np.isclose((psi.conj() @ ops["sz1"] @ psi).real, 1.0)


def test_initial_ket_two_tls_with_photon():
    lay = HilbertLayout(n_tls=2, fock_cutoff=4)
    psi = initial_ket(lay, "eg1")
    ops = build_elementary(lay)
    assert np.isclose((psi.conj() @ ops["sz1"] @ psi).real, 1.0)
    assert np.isclose((psi.conj() @ ops["sz2"] @ psi).real, -1.0)
    assert np.isclose((psi.conj() @ ops["num"] @ psi).real, 1.0)


def test_initial_ket_superposition_spec():
    lay = HilbertLayout(n_tls=1, fock_cutoff=3)
    psi = initial_ket(lay, {"spins": ["+y"], "photons": 0})
    ops = build_elementary(lay)
    assert np.isclose(abs((psi.conj() @ ops["sy1"] @ psi).real), 1.0, atol=1e-12)


def test_initial_ket_rejects_missing_photon_digit():
    lay = HilbertLayout(n_tls=1, fock_cutoff=3)
    with pytest.raises(Exception):
        initial_ket(lay, "e")


def test_partial_trace_product_state():
    lay = HilbertLayout(n_tls=2, fock_cutoff=3)
    psi = initial_ket(lay, "eg0")
    rho = np.outer(psi, psi.conj())
    red = partial_trace(rho, lay, keep="spins")
    assert red.shape == (4, 4)
    assert np.isclose(np.trace(red).real, 1.0)
    # pure product state stays pure after tracing the cavity
    assert np.isclose(np.trace(red @ red).real, 1.0)


def test_concurrence_bell_and_product():
    bell = np.zeros(4, dtype=complex)
    bell[1] = bell[2] = 1 / np.sqrt(2)
    rho = np.outer(bell, bell.conj())
    assert np.isclose(concurrence(rho), 1.0)
    prod = np.zeros(4, dtype=complex)
    prod[0] = 1.0
    assert np.isclose(concurrence(np.outer(prod, prod.conj())), 0.0)


def test_expm_hermitian_matches_scipy():
    from scipy.linalg import expm

    rng = np.random.default_rng(7)
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = h + h.conj().T
    assert np.allclose(expm_hermitian(h, 0.37), expm(-1j * 0.37 * h))


def test_expm_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expm_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


def test_truncation_guard_trips():
    lay = HilbertLayout(n_tls=1, fock_cutoff=3)
    psi = np.zeros(lay.dim, dtype=complex)
    psi[lay.basis_index("e", 2)] = 1.0
    assert top_fock_population(psi, lay) > 0.5
    with pytest.raises(LeakageError):
        check_truncation(psi, lay)


def test_truncation_guard_quiet_on_low_states():
    lay = HilbertLayout(n_tls=1, fock_cutoff=3)
    check_truncation(initial_ket(lay, "g1"), lay)
