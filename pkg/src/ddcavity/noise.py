"""Reproducible dephasing-noise trajectories.

Two noise kinds are supported for the spin frequency shift xi(t):

* ``static``: xi is constant over a run, drawn from N(0, sigma^2) per spin --
  the quasi-static limit of slow noise;
* ``ou``: an Ornstein-Uhlenbeck process with stationary variance sigma^2 and
  correlation time tau_c, stepped with the exact transition kernel
  xi_{k+1} = xi_k e^{-h/tau_c} + sigma sqrt(1 - e^{-2h/tau_c}) N(0, 1)
  and initialised from the stationary distribution.

Randomness comes from the counter-based Philox generator keyed by a
(seed, stream) pair: trajectory ``stream`` of a run is identical no matter how
many workers execute the ensemble or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseModel:
    kind: str  # "static" | "ou" | "none"
    sigma: float = 0.0
    tau_c: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("static", "ou", "none"):
            raise ValueError(f"noise kind must be 'static', 'ou' or 'none', got {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.kind == "ou":
            if self.tau_c is None or not self.tau_c > 0:
                raise ValueError("OU noise needs a positive correlation time tau_c")


@dataclass(frozen=True)
class NoiseTrajectory:
    """One realisation of xi(t) for every spin.

    For static noise ``values`` has shape (n_spins,); for OU noise it has
    shape (n_spins, len(grid)) with samples on the supplied time grid.
    """

    kind: str
    values: np.ndarray
    grid: np.ndarray | None = None

    def static_values(self) -> np.ndarray:
        if self.kind == "ou":
            raise ValueError("OU trajectory has no single static value")
        return self.values


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one (seed, stream) pair."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def sample_static(model: NoiseModel, seed: int, stream: int, n_spins: int = 1) -> NoiseTrajectory:
    """Draw one static frequency offset per spin."""
    if model.kind == "none" or model.sigma == 0.0:
        return NoiseTrajectory("static", np.zeros(n_spins))
    if model.kind != "static":
        raise ValueError(f"sample_static called with kind={model.kind!r}")
    rng = rng_for(seed, stream)
    return NoiseTrajectory("static", model.sigma * rng.standard_normal(n_spins))


def sample_ou(
    model: NoiseModel, grid: np.ndarray, seed: int, stream: int, n_spins: int = 1
) -> NoiseTrajectory:
    """Sample an OU path on ``grid`` (strictly increasing times) per spin.

    Uses the exact Gaussian transition kernel between grid points, so the
    statistics do not depend on the step sizes.
    """
    if model.kind != "ou":
        raise ValueError(f"sample_ou called with kind={model.kind!r}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing 1-d array")
    rng = rng_for(seed, stream)
    sigma, tau_c = model.sigma, float(model.tau_c)
    n_t = len(grid)
    vals = np.empty((n_spins, n_t))
    vals[:, 0] = sigma * rng.standard_normal(n_spins)
    decay = np.exp(-np.diff(grid) / tau_c)
    kick = sigma * np.sqrt(1.0 - decay**2)
    noise = rng.standard_normal((n_spins, n_t - 1))
    for k in range(n_t - 1):
        vals[:, k + 1] = vals[:, k] * decay[k] + kick[k] * noise[:, k]
    return NoiseTrajectory("ou", vals, grid)


def sample(
    model: NoiseModel,
    seed: int,
    stream: int,
    n_spins: int = 1,
    grid: np.ndarray | None = None,
) -> NoiseTrajectory:
    """Dispatch on the model kind (grid required for OU)."""
    if model.kind == "ou":
        if grid is None:
            raise ValueError("OU noise needs a sampling grid")
        return sample_ou(model, grid, seed, stream, n_spins)
    return sample_static(model, seed, stream, n_spins)
