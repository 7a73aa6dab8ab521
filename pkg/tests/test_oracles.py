"""Closed-form error laws and the optimum-collapse model."""

import numpy as np
import pytest

from ddcavity import oracles


def test_bare_transfer_error_quadratic():
    assert oracles.bare_transfer_error(0.2, 1.0) == pytest.approx(0.01)
    assert oracles.bare_transfer_error(0.4, 2.0) == pytest.approx(0.01)


def test_static_shift_fidelity_exact_vs_expansion():
    for xi in (0.05, 0.2, 0.4):
        r = oracles.static_shift_fidelity(1.0, xi=xi)
        assert r.expansion == pytest.approx(1 - (xi / 2) ** 2)
        assert r.exact == pytest.approx(r.expansion, abs=xi**4)
    # the exact form never leaves [0, 1] even deep in the shifted regime
    assert 0.0 <= oracles.static_shift_fidelity(1.0, xi=3.0).exact <= 1.0


def test_transfer_error_laws_scale_with_spacing():
    sigma, g = 5.0, 1.0
    e1 = oracles.xy8_transfer_error(sigma, g, 0.05)
    e2 = oracles.xy8_transfer_error(sigma, g, 0.025)
    assert e1 / e2 == pytest.approx(4.0)  # fixed-noise error drops as tau^2
    x1 = oracles.xxyy_transfer_error(sigma, g, 0.05)
    x2 = oracles.xxyy_transfer_error(sigma, g, 0.025)
    assert x1 / x2 == pytest.approx(4.0, rel=1e-6)


def test_xy8_noise_term_quadratic_in_sigma():
    g, tau = 1.0, 0.02
    base = oracles.xy8_transfer_error(0.0, g, tau)
    e = oracles.xy8_transfer_error(10.0, g, tau) - base
    e2 = oracles.xy8_transfer_error(20.0, g, tau) - base
    assert e2 / e == pytest.approx(4.0)


def test_pulse_spacing_error_matches_sequence_reductions():
    # with the tabulated (G2z, eta) pairs the generic law collapses onto the
    # known per-sequence prefactors 1.88 and 0.58 (times g^2 tau^2)
    tau, g = 0.07, 1.0
    e_xy8 = oracles.pulse_spacing_error(g, 8 * tau, g2z=0.20264, eta=0.45016)
    assert e_xy8 == pytest.approx(1.88 * (g * tau) ** 2, rel=0.01)
    e_xxyy = oracles.pulse_spacing_error(g, 4 * tau, g2z=0.25, eta=0.5)
    assert e_xxyy == pytest.approx(0.58 * (g * tau) ** 2, rel=0.01)


def test_entanglement_error_quartic():
    assert oracles.entanglement_error(0.3, 0.2) / oracles.entanglement_error(
        0.3, 0.1
    ) == pytest.approx(16.0)


def test_delta_j_correction_depends_on_offset_difference():
    # in the large-index limit the exchange shift is -J T^2 (xi1-xi2)^2/1600:
    # common-mode offsets cancel exactly, antisymmetric ones do not
    j, T = 0.02, 0.4
    assert oracles.delta_j_correction(j, T, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert oracles.delta_j_correction(j, T, 0.3, 0.3) == pytest.approx(0.0, abs=1e-15)
    anti = oracles.delta_j_correction(j, T, 0.3, -0.3)
    assert anti == pytest.approx(-j * T**2 * 0.6**2 / 1600.0, rel=1e-10)


def test_cooperativity_model_fixed_points():
    m = oracles.cooperativity_models(g=1.0, sigma=0.1, kappa=10.0, n_pi=8)
    assert m.cooperativity == pytest.approx(1.0)
    assert m.t2_star == pytest.approx(np.sqrt(2) / 0.1)
    assert m.delta_opt_free == pytest.approx(14.6459, abs=1e-3)
    assert m.delta_opt_dd == pytest.approx(112.422, abs=1e-2)
    # the optimum detunings are the stationary points of the far-detuned
    # error branches that define them
    deltas = np.linspace(4.0, 60.0, 4001)
    free = np.array(
        [
            (4 / np.pi**2) * (m.gate_time(d) / m.t2_star) ** 2
            + m.gamma0(d, include_linewidth=False) * m.gate_time(d)
            for d in deltas
        ]
    )
    assert deltas[np.argmin(free)] == pytest.approx(m.delta_opt_free, rel=0.01)
    deltas_dd = np.linspace(40.0, 300.0, 4001)
    dd = np.array([m.fidelity_dd(d) for d in deltas_dd])
    assert deltas_dd[np.argmax(dd)] == pytest.approx(m.delta_opt_dd, rel=0.01)


def test_cooperativity_error_scaling_exponents():
    def e_min(n_pi, c):
        m = oracles.cooperativity_models(g=1.0, sigma=1.0 / (10.0 * c), kappa=10.0, n_pi=n_pi)
        return 1.0 - m.fidelity_max_dd

    # minimum error collapses onto (N C)^(-4/5)
    assert e_min(80, 1.0) / e_min(8, 1.0) == pytest.approx(10 ** -0.8, rel=1e-10)
    assert e_min(8, 3.0) / e_min(8, 1.0) == pytest.approx(3 ** -0.8, rel=1e-10)
    # pulse-free branch scales as C^(-2/3)
    def e_free(c):
        m = oracles.cooperativity_models(g=1.0, sigma=1.0 / (10.0 * c), kappa=10.0, n_pi=1)
        return 1.0 - m.fidelity_max_free

    assert e_free(3.0) / e_free(1.0) == pytest.approx(3 ** (-2 / 3), rel=1e-10)


def test_gamma0_lorentzian_branches():
    m = oracles.cooperativity_models(g=1.0, sigma=0.1, kappa=10.0, n_pi=8)
    d = 20.0
    assert m.gamma0(d) == pytest.approx(10.0 / (d**2 + 25.0))
    assert m.gamma0(d, include_linewidth=False) == pytest.approx(10.0 / d**2)


def test_gate_time_half_swap():
    m = oracles.cooperativity_models(g=1.0, sigma=0.1, kappa=10.0, n_pi=8)
    assert m.gate_time(30.0) == pytest.approx(np.pi * 30.0 / 4.0)
