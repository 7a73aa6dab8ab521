"""Figures of merit extracted from state / density-matrix time series.

Everything here is a pure function of a state and a Hilbert-space layout.
Observables are small value objects so that ensemble runs and the CLI can
pass them around by name; the names double as CSV column keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hilbert import (
    HilbertLayout,
    State,
    build_elementary,
    concurrence as _concurrence2,
    partial_trace,
)

# Raw values may stray outside the physical range by round-off only.
RANGE_TOL = 1e-9


@dataclass(frozen=True)
class Observable:
    """A named figure of merit.

    kind is one of ``transfer_fidelity``, ``entanglement_fidelity``,
    ``population``, ``sigma_y``, ``photon_number``, ``concurrence``.
    ``label`` carries the basis label for populations (spin part only, e.g.
    "eg", or a full label like "g1"); ``tls`` the 1-based spin index for
    sigma_y.
    """

    kind: str
    label: str = ""
    tls: int = 1

    def __post_init__(self) -> None:
        kinds = (
            "transfer_fidelity",
            "entanglement_fidelity",
            "population",
            "sigma_y",
            "photon_number",
            "concurrence",
        )
        if self.kind not in kinds:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "population" and not self.label:
            raise ValueError("population observable needs a basis label")
        if self.kind == "sigma_y" and self.tls < 1:
            raise ValueError("sigma_y observable needs a 1-based TLS index")

    @property
    def name(self) -> str:
        """CSV column key, e.g. pop_eg or sigma_y_1."""
        if self.kind == "population":
            return f"pop_{self.label}"
        if self.kind == "sigma_y":
            return f"sigma_y_{self.tls}"
        return self.kind


def observable(name: str) -> Observable:
    """Parse a column key back into an Observable."""
    if name in ("transfer_fidelity", "entanglement_fidelity", "photon_number", "concurrence"):
        return Observable(name)
    if name.startswith("pop_"):
        return Observable("population", label=name[4:])
    if name.startswith("sigma_y_"):
        return Observable("sigma_y", tls=int(name[len("sigma_y_") :]))
    raise ValueError(f"unknown observable name {name!r}")


@lru_cache(maxsize=8)
def _ops(n_tls: int, fock_cutoff: int) -> dict:
    return build_elementary(HilbertLayout(n_tls=n_tls, fock_cutoff=fock_cutoff))


def _bell_spin_target(n_tls: int) -> np.ndarray:
    # (|eg> + i|ge>)/sqrt(2) on the spin factor
    if n_tls != 2:
        raise ValueError("entanglement fidelity needs two spins")
    psi = np.zeros(4, dtype=complex)
    psi[0b10] = 1.0 / math.sqrt(2.0)      # |eg>
    psi[0b01] = 1.0j / math.sqrt(2.0)     # |ge>
    return psi


def _checked(value: float, lo: float, hi: float | None, what: str) -> float:
    if value < lo - RANGE_TOL or (hi is not None and value > hi + RANGE_TOL):
        raise ValueError(f"{what} = {value!r} outside [{lo}, {hi}] beyond round-off")
    if hi is None:
        return max(value, lo)
    return min(max(value, lo), hi)


def evaluate(obs: Observable, state: State | np.ndarray, layout: HilbertLayout) -> float:
    """Evaluate one observable on a ket or density matrix."""
    if isinstance(state, State):
        if state.layout.dim != layout.dim:
            raise ValueError("state layout does not match")
        data = state.data
    else:
        data = np.asarray(state, dtype=complex)
    d = layout.dim
    if data.shape not in ((d,), (d, d)):
        raise ValueError(f"state shape {data.shape} incompatible with layout dim {d}")
    is_ket = data.ndim == 1

    if obs.kind == "transfer_fidelity":
        idx = layout.basis_index("g" * layout.n_tls, 1)
        val = abs(data[idx]) ** 2 if is_ket else float(np.real(data[idx, idx]))
        return _checked(float(val), 0.0, 1.0, obs.name)

    if obs.kind == "entanglement_fidelity":
        psi = _bell_spin_target(layout.n_tls)
        rho_s = partial_trace(np.outer(data, data.conj()) if is_ket else data, layout)
        val = float(np.real(psi.conj() @ rho_s @ psi))
        return _checked(val, 0.0, 1.0, obs.name)

    if obs.kind == "population":
        spins = obs.label[: layout.n_tls]
        rest = obs.label[layout.n_tls :]
        if rest:  # full basis state, e.g. "g1"
            idx = layout.basis_index(spins, int(rest))
            val = abs(data[idx]) ** 2 if is_ket else float(np.real(data[idx, idx]))
        else:  # spin configuration, any photon number
            idxs = np.array(
                [layout.basis_index(spins, n) for n in range(layout.fock_cutoff)]
            )
            if is_ket:
                val = float(np.sum(np.abs(data[idxs]) ** 2))
            else:
                val = float(np.sum(np.real(np.diagonal(data)[idxs])))
        return _checked(val, 0.0, 1.0, obs.name)

    if obs.kind == "sigma_y":
        if obs.tls > layout.n_tls:
            raise ValueError(f"sigma_y_{obs.tls} needs at least {obs.tls} spins")
        op = _ops(layout.n_tls, layout.fock_cutoff)[f"sy{obs.tls}"]
        val = _expectation(op, data, is_ket)
        return _checked(val, -1.0, 1.0, obs.name)

    if obs.kind == "photon_number":
        op = _ops(layout.n_tls, layout.fock_cutoff)["num"]
        return _checked(_expectation(op, data, is_ket), 0.0, None, obs.name)

    if obs.kind == "concurrence":
        rho_s = partial_trace(np.outer(data, data.conj()) if is_ket else data, layout)
        return _checked(_concurrence2(rho_s), 0.0, 1.0, obs.name)

    raise ValueError(f"unknown observable kind {obs.kind!r}")  # pragma: no cover


def _expectation(op: np.ndarray, data: np.ndarray, is_ket: bool) -> float:
    if is_ket:
        return float(np.real(data.conj() @ (op @ data)))
    return float(np.real(np.trace(op @ data)))


# ---------------------------------------------------------------------------
# scaling fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r_squared: float


def scaling_fit(x: np.ndarray, y: np.ndarray) -> ScalingFit:
    """Least-squares power law y = prefactor * x**exponent on log-log data."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("scaling_fit needs two 1-d arrays of equal length >= 2")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("scaling_fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(float(coef[0]), float(np.exp(coef[1])), r2)


def standard_error(std: np.ndarray | float, n_traj: int) -> np.ndarray | float:
    """Standard error of an ensemble mean."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    return std / math.sqrt(n_traj)
