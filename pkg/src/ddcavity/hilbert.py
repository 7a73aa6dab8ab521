"""Dense Hilbert-space plumbing for up to two spins coupled to one cavity mode.

Basis ordering is spin_1 (x) spin_2 (x) cavity.  Each spin uses {|g>, |e>} with
sigma_z|e> = +|e>, and the cavity is truncated to ``fock_cutoff`` number states
|0 .. n_max-1>.  The dimensions involved here never exceed a few dozen, so all
operators are dense complex128 arrays and matrix functions go through exact
eigendecompositions rather than iterative solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

# Validation tolerances (relative, scaled by matrix/state norm where sensible).
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
STATE_NORM_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
TRACE_PRESERVING_TOL = 1e-8


class LeakageError(RuntimeError):
    """Raised when population reaches the top Fock level (truncation invalid)."""


def default_fock_cutoff(n_tls: int) -> int:
    """Default cavity truncation: 6 for transfer-style runs with a single spin
    (real photon exchange), 4 for far-detuned two-spin runs (virtual photons)."""
    return 6 if n_tls <= 1 else 4


@dataclass(frozen=True)
class HilbertLayout:
    """Shape of the composite space: how many spins and how many Fock levels."""

    n_tls: int
    fock_cutoff: int

    def __post_init__(self) -> None:
        if self.n_tls not in (0, 1, 2):
            raise ValueError(f"n_tls must be 0, 1 or 2, got {self.n_tls}")
        if self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")

    @property
    def dim(self) -> int:
        return 2**self.n_tls * self.fock_cutoff

    @property
    def spin_dim(self) -> int:
        return 2**self.n_tls

    def basis_index(self, spins: str, n: int) -> int:
        """Index of the product basis state |spins> (x) |n>.

        ``spins`` is one character per spin from {'g', 'e'}, e.g. "eg" for
        spin 1 excited, spin 2 in the ground state.
        """
        if len(spins) != self.n_tls:
            raise ValueError(f"expected {self.n_tls} spin labels, got {spins!r}")
        if not 0 <= n < self.fock_cutoff:
            raise ValueError(f"photon number {n} outside 0..{self.fock_cutoff - 1}")
        idx = 0
        for ch in spins:
            if ch not in "ge":
                raise ValueError(f"spin labels must be 'g' or 'e', got {ch!r}")
            idx = 2 * idx + (1 if ch == "e" else 0)
        return idx * self.fock_cutoff + n

    def basis_ket(self, label: str) -> np.ndarray:
        """Product ket from a compact label: "e0", "g1", "eg0", "gg2", ...

        The first ``n_tls`` characters are spin states, the rest the photon
        number.
        """
        spins, photons = label[: self.n_tls], label[self.n_tls :]
        try:
            n = int(photons)
        except ValueError as exc:
            raise ValueError(f"bad state label {label!r}") from exc
        ket = np.zeros(self.dim, dtype=complex)
        ket[self.basis_index(spins, n)] = 1.0
        return ket

    def product_ket(self, spins: list[str] | tuple[str, ...], n: int) -> np.ndarray:
        """Product ket with each spin in a cardinal Bloch state.

        ``spins`` holds one entry per spin from {'g', 'e', '+x', '-x', '+y',
        '-y'} and ``n`` is the photon number.
        """
        if len(spins) != self.n_tls:
            raise ValueError(f"expected {self.n_tls} spin states, got {list(spins)!r}")
        if not 0 <= n < self.fock_cutoff:
            raise ValueError(f"photon number {n} outside 0..{self.fock_cutoff - 1}")
        out = np.zeros(self.fock_cutoff, dtype=complex)
        out[n] = 1.0
        for spin in reversed(spins):
            try:
                vec = _SPIN_KETS[spin]
            except KeyError:
                raise ValueError(
                    f"unknown spin state {spin!r}; choose from {sorted(_SPIN_KETS)}"
                ) from None
            out = np.kron(vec, out)
        return out


_RT2 = 1.0 / math.sqrt(2.0)
# basis order (g, e)
_SPIN_KETS = {
    "g": np.array([1.0, 0.0], dtype=complex),
    "e": np.array([0.0, 1.0], dtype=complex),
    "+x": np.array([_RT2, _RT2], dtype=complex),
    "-x": np.array([_RT2, -_RT2], dtype=complex),
    "+y": np.array([_RT2, 1.0j * _RT2], dtype=complex),
    "-y": np.array([_RT2, -1.0j * _RT2], dtype=complex),
}


def initial_ket(layout: HilbertLayout, spec: str | dict) -> np.ndarray:
    """Initial state from a config entry.

    A plain string is a basis label ("e0", "eg0", ...).  A mapping
    ``{"spins": [...], "photons": n}`` builds a product state with each spin
    in one of the cardinal Bloch states accepted by ``product_ket``.
    """
    if isinstance(spec, str):
        return layout.basis_ket(spec)
    if isinstance(spec, dict):
        extra = set(spec) - {"spins", "photons"}
        if extra:
            raise ValueError(f"unknown initial-state keys: {sorted(extra)}")
        spins = spec.get("spins", [])
        if isinstance(spins, str):
            spins = [spins]
        return layout.product_ket(list(spins), int(spec.get("photons", 0)))
    raise ValueError(f"bad initial state spec: {spec!r}")


def _norm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat))


@dataclass
class Operator:
    """A dense operator tied to a layout, with optional contract checks.

    Passing ``hermitian=True`` asserts the matrix really is Hermitian (to a
    relative 1e-12); the flag is then kept for downstream fast paths.
    """

    data: np.ndarray
    layout: HilbertLayout
    hermitian: bool | None = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=complex)
        d = self.layout.dim
        if self.data.shape != (d, d):
            raise ValueError(f"operator shape {self.data.shape} != ({d}, {d})")
        if self.hermitian:
            dev = _norm(self.data - self.data.conj().T)
            scale = max(_norm(self.data), 1.0)
            if dev > HERMITIAN_TOL * scale:
                raise ValueError(
                    f"operator declared hermitian but |H - H^dag| = {dev:.3e} "
                    f"(tolerance {HERMITIAN_TOL * scale:.3e})"
                )

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.layout, hermitian=self.hermitian)

    def require_unitary(self) -> "Operator":
        dev = _norm(self.data @ self.data.conj().T - np.eye(self.layout.dim))
        if dev > UNITARY_TOL * self.layout.dim:
            raise ValueError(f"operator is not unitary: |U U^dag - 1| = {dev:.3e}")
        return self

    # Minimal arithmetic -- enough to compose Hamiltonians readably.
    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.data + other.data, self.layout)

    def __sub__(self, other: "Operator") -> "Operator":
        return Operator(self.data - other.data, self.layout)

    def __mul__(self, c: complex) -> "Operator":
        return Operator(self.data * c, self.layout)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        return Operator(self.data @ other.data, self.layout)


@dataclass
class State:
    """Pure ket or density matrix on a layout, with validity checks."""

    data: np.ndarray
    layout: HilbertLayout

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=complex)
        d = self.layout.dim
        if self.data.shape not in ((d,), (d, d)):
            raise ValueError(f"state shape {self.data.shape} incompatible with dim {d}")

    @property
    def kind(self) -> str:
        return "ket" if self.data.ndim == 1 else "dm"

    def validate(self) -> "State":
        """Norm/trace within 1e-10 of one; density matrices Hermitian with
        eigenvalues above the -1e-10 floor."""
        if self.kind == "ket":
            nrm = float(np.linalg.norm(self.data))
            if abs(nrm - 1.0) > STATE_NORM_TOL:
                raise ValueError(f"ket norm {nrm} deviates from 1 by {abs(nrm-1.0):.3e}")
        else:
            tr = complex(np.trace(self.data))
            if abs(tr - 1.0) > STATE_NORM_TOL:
                raise ValueError(f"density-matrix trace deviates from 1 by {abs(tr-1.0):.3e}")
            dev = _norm(self.data - self.data.conj().T)
            if dev > HERMITIAN_TOL * max(_norm(self.data), 1.0) * 10:
                raise ValueError(f"density matrix not Hermitian: {dev:.3e}")
            evals = np.linalg.eigvalsh((self.data + self.data.conj().T) / 2)
            if evals.min() < EIGENVALUE_FLOOR:
                raise ValueError(f"density matrix has negative eigenvalue {evals.min():.3e}")
        return self

    def density(self) -> np.ndarray:
        """The state as a density matrix (outer product for kets)."""
        if self.kind == "ket":
            return np.outer(self.data, self.data.conj())
        return self.data


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------

_SIGMA = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    # basis order (g, e) with sigma_z|e> = +|e>
    "z": np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex),
    "p": np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
    "m": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
}


def build_elementary(layout: HilbertLayout) -> dict[str, np.ndarray]:
    """All elementary operators embedded in the full space.

    Keys: ``id``, ``a``, ``adag``, ``num`` and, per spin j in 1..n_tls,
    ``sx{j}``, ``sy{j}``, ``sz{j}``, ``sp{j}``, ``sm{j}``.
    """
    n_max = layout.fock_cutoff
    a_small = np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), k=1).astype(complex)
    eye2 = np.eye(2, dtype=complex)
    eye_c = np.eye(n_max, dtype=complex)

    def embed(parts: list[np.ndarray]) -> np.ndarray:
        out = parts[0]
        for p in parts[1:]:
            out = np.kron(out, p)
        return out

    spin_eyes = [eye2] * layout.n_tls
    ops: dict[str, np.ndarray] = {
        "id": np.eye(layout.dim, dtype=complex),
        "a": embed(spin_eyes + [a_small]),
    }
    ops["adag"] = ops["a"].conj().T
    ops["num"] = ops["adag"] @ ops["a"]
    for j in range(1, layout.n_tls + 1):
        for name, mat in _SIGMA.items():
            parts = list(spin_eyes)
            parts[j - 1] = mat
            ops[f"s{name}{j}"] = embed(parts + [eye_c])
    return ops


# ---------------------------------------------------------------------------
# matrix functions
# ---------------------------------------------------------------------------

def expm_hermitian(H: np.ndarray | Operator, t: float) -> np.ndarray:
    """exp(-i H t) through an exact eigendecomposition.

    Rejects matrices that are not Hermitian instead of silently symmetrizing.
    """
    mat = H.data if isinstance(H, Operator) else np.asarray(H, dtype=complex)
    dev = _norm(mat - mat.conj().T)
    if dev > HERMITIAN_TOL * max(_norm(mat), 1.0):
        raise ValueError(f"expm_hermitian needs a Hermitian matrix (|H-H^dag|={dev:.3e})")
    evals, vecs = np.linalg.eigh(mat)
    phases = np.exp(-1j * evals * t)
    return (vecs * phases) @ vecs.conj().T


def expm_superop(L: np.ndarray, t: float, check: bool = True) -> np.ndarray:
    """exp(L t) for a Liouvillian acting on row-major vectorised density
    matrices; verifies the result is trace preserving to 1e-8."""
    L = np.asarray(L, dtype=complex)
    d2 = L.shape[0]
    d = int(round(np.sqrt(d2)))
    if d * d != d2 or L.shape != (d2, d2):
        raise ValueError(f"superoperator shape {L.shape} is not (d^2, d^2)")
    E = scipy.linalg.expm(L * t)
    if check:
        vec_id = np.eye(d, dtype=complex).reshape(-1)
        dev = float(np.linalg.norm(vec_id @ E - vec_id))
        if dev > TRACE_PRESERVING_TOL * d:
            raise ValueError(f"propagator is not trace preserving: deviation {dev:.3e}")
    return E


def liouvillian(H: np.ndarray, collapse: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Lindblad generator in row-major vectorisation.

    ``collapse`` holds (rate, operator) pairs entering as
    rate * (c rho c^dag - {c^dag c, rho}/2).
    """
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    eye = np.eye(d, dtype=complex)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, c in collapse:
        cdc = c.conj().T @ c
        L += rate * (
            np.kron(c, c.conj())
            - 0.5 * np.kron(cdc, eye)
            - 0.5 * np.kron(eye, cdc.T)
        )
    return L


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def partial_trace(rho: np.ndarray, layout: HilbertLayout, keep: str = "spins") -> np.ndarray:
    """Reduced density matrix over the spins (``keep="spins"``) or the cavity."""
    ds, dc = layout.spin_dim, layout.fock_cutoff
    rho = np.asarray(rho, dtype=complex).reshape(ds, dc, ds, dc)
    if keep == "spins":
        return np.einsum("anbn->ab", rho)
    if keep == "cavity":
        return np.einsum("anam->nm", rho)
    raise ValueError(f"keep must be 'spins' or 'cavity', got {keep!r}")


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 density matrix, got {rho.shape}")
    yy = np.kron(_SIGMA["y"], _SIGMA["y"])
    rho_t = yy @ rho.conj() @ yy
    evals = np.linalg.eigvals(rho @ rho_t)
    # eigenvalues are real and nonnegative up to round-off
    lam = np.sqrt(np.clip(evals.real, 0.0, None))
    lam.sort()
    return float(max(0.0, lam[-1] - lam[-2] - lam[-3] - lam[-4]))


def top_fock_population(state: np.ndarray, layout: HilbertLayout) -> float:
    """Total population in the highest retained Fock level."""
    state = np.asarray(state)
    top = layout.fock_cutoff - 1
    idx = np.arange(layout.spin_dim) * layout.fock_cutoff + top
    if state.ndim == 1:
        return float(np.sum(np.abs(state[idx]) ** 2))
    return float(np.sum(np.real(np.diagonal(state)[idx])))


def check_truncation(state: np.ndarray, layout: HilbertLayout, tol: float = 1e-6) -> None:
    """Abort when the top Fock level is populated above ``tol``."""
    pop = top_fock_population(state, layout)
    if pop >= tol:
        raise LeakageError(
            f"top Fock level (n={layout.fock_cutoff - 1}) holds population "
            f"{pop:.3e} >= {tol:.1e}; raise fock_cutoff"
        )
