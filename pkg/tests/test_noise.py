"""Frequency-noise sampling: static draws and the exact OU update."""

import numpy as np
import pytest

from ddcavity.noise import NoiseModel, rng_for, sample


def test_static_statistics():
    sigma = 0.3
    draws = np.array(
        [sample(NoiseModel("static", sigma=sigma), seed=1, stream=k).values[0] for k in range(4000)]
    )
    assert abs(draws.mean()) < 4 * sigma / np.sqrt(draws.size)
    assert abs(draws.std() - sigma) < 0.02


def test_stream_determinism():
    m = NoiseModel("static", sigma=0.5)
    a = sample(m, seed=9, stream=3, n_spins=2).values
    b = sample(m, seed=9, stream=3, n_spins=2).values
    c = sample(m, seed=9, stream=4, n_spins=2).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_for_streams_are_independent():
    a = rng_for(1, 0).random(5)
    b = rng_for(1, 1).random(5)
    assert not np.allclose(a, b)


def test_none_noise_is_zero():
    t = sample(NoiseModel("none"), seed=4, stream=0, n_spins=2)
    assert np.all(t.values == 0.0)


def test_ou_stationary_variance_and_autocorrelation():
    sigma, tau_c, dt = 0.7, 2.0, 0.1
    grid = np.arange(0.0, 400.0 + dt / 2, dt)
    vals = np.concatenate(
        [
            sample(NoiseModel("ou", sigma=sigma, tau_c=tau_c), seed=2, stream=s, grid=grid).values[0]
            for s in range(40)
        ]
    )
    n = vals.size
    assert abs(vals.mean()) < 5 * sigma / np.sqrt(n / (tau_c / dt))
    assert vals.std() == pytest.approx(sigma, rel=0.05)
    # normalised autocovariance should follow exp(-lag/tau_c)
    centred = vals - vals.mean()
    for lag_steps in (1, 5, 20):
        emp = np.mean(centred[:-lag_steps] * centred[lag_steps:]) / centred.var()
        assert emp == pytest.approx(np.exp(-lag_steps * dt / tau_c), abs=0.04)


def test_ou_exact_update_is_grid_invariant():
    # the update is distributionally exact: halving the step should leave the
    # lag-correlation at a fixed time separation unchanged
    sigma, tau_c = 1.0, 1.5

    def corr_at(dt):
        k = int(round(3.0 / dt))
        num, cnt = 0.0, 0
        for s in range(40):
            grid = np.arange(0.0, 800.0, dt)
            v = sample(
                NoiseModel("ou", sigma=sigma, tau_c=tau_c), seed=8, stream=s, grid=grid
            ).values[0]
            num += np.sum(v[:-k] * v[k:])
            cnt += v.size - k
        return num / cnt / sigma**2

    target = np.exp(-3.0 / tau_c)
    assert corr_at(0.2) == pytest.approx(target, abs=0.03)
    assert corr_at(0.1) == pytest.approx(target, abs=0.03)


def test_ou_requires_grid():
    with pytest.raises(Exception):
        sample(NoiseModel("ou", sigma=1.0, tau_c=1.0), seed=0, stream=0)


def test_model_validation():
    with pytest.raises(Exception):
        NoiseModel("pink", sigma=1.0)
