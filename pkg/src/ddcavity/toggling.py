"""Toggling-frame analysis of periodic pi-pulse sequences.

Everything here lives in 2x2-land: the frame transformation U_pi(t) generated
by the (ideal, delta_theta = 0) drive, the modulation functions it induces on
the spin operators, and the period-averaged integrals built from them:

* first-order coupling coefficients eta_x, eta_y (filtered averages of the
  step functions f_x, f_y against e^{i Delta t}) and the drift averages gamma;
* second-order two-spin exchange coefficients r_uv from the nested Magnus
  integral of the cavity-mediated interaction;
* the full set of noise-expansion tensors (Gamma, O, G_0..G_3, G_uv) that
  enter the stroboscopic effective Hamiltonian order by order in xi*T;
* cavity-induced decay rates of the dressed spin states for a lossy cavity,
  computed along two independent routes (closed-form double integral and a
  harmonic sum) that must agree.

Conventions.  The spin basis in this module is (|e>, |g>) with
sigma_z|e> = +|e>.  The complex lowering-operator modulation vector is defined
through 2 U_pi(t)^dag sigma^- U_pi(t) = f_JC(t) . sigma, whose instantaneous-
pulse limit is (f_x, -i f_y, 0); the dephasing vector comes from
U_pi^dag sigma_z U_pi = f_xi(t) . sigma, ideally (0, 0, f_z).  The detuning is
split as Delta = 2 pi m / T + Delta_eff with integer m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hilbert import HilbertLayout, Operator, build_elementary, expm_hermitian
from .pulses import PulseSequence, Segment

CLASSIFY_TOL = 1e-8
# max |phase| * length per quadrature chunk; keeps 32-node interpolation exact
_MAX_PHASE = 8.0
_GL_NODES = 32


# ---------------------------------------------------------------------------
# SU(2) frame evaluation
# ---------------------------------------------------------------------------

def _rot_apply(axis: str, theta: np.ndarray, U0: np.ndarray) -> np.ndarray:
    """exp(-i theta/2 sigma_axis) @ U0, vectorised over theta.

    U0 has shape (2, 2); the result has shape (len(theta), 2, 2).
    """
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    a0, b0 = U0[0, 0], U0[0, 1]
    c0, d0 = U0[1, 0], U0[1, 1]
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    if axis == "x":
        out[..., 0, 0] = c * a0 - 1j * s * c0
        out[..., 0, 1] = c * b0 - 1j * s * d0
        out[..., 1, 0] = -1j * s * a0 + c * c0
        out[..., 1, 1] = -1j * s * b0 + c * d0
    else:  # y
        out[..., 0, 0] = c * a0 - s * c0
        out[..., 0, 1] = c * b0 - s * d0
        out[..., 1, 0] = s * a0 + c * c0
        out[..., 1, 1] = s * b0 + c * d0
    return out


def _frame_vectors(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Modulation vectors from U_pi values of shape (..., 2, 2).

    Returns (f_jc, f_xi) with shapes (..., 3); f_jc complex, f_xi real.
    """
    a, b = U[..., 0, 0], U[..., 0, 1]
    c, d = U[..., 1, 0], U[..., 1, 1]
    # components of 2 U^dag sigma^- U (the defining factor 2 cancels the 1/2
    # of the Pauli trace projection)
    f_jc = np.stack(
        [
            np.conj(c) * b + np.conj(d) * a,
            1j * (np.conj(c) * b - np.conj(d) * a),
            np.conj(c) * a - np.conj(d) * b,
        ],
        axis=-1,
    )
    w = np.conj(a) * b - np.conj(c) * d
    f_xi = np.stack(
        [
            w.real,
            -w.imag,
            0.5 * (np.abs(a) ** 2 - np.abs(c) ** 2 - np.abs(b) ** 2 + np.abs(d) ** 2),
        ],
        axis=-1,
    )
    return f_jc, f_xi


class FrameEvaluator:
    """Exact evaluation of U_pi(t) and the modulation vectors over one period."""

    def __init__(self, seq: PulseSequence):
        self.seq = seq
        self.segments: list[Segment] = seq.segments()
        self.edges = np.array([s.t0 for s in self.segments] + [seq.period])
        # accumulated frame at each segment start
        U = np.eye(2, dtype=complex)
        self.start_U: list[np.ndarray] = []
        for s in self.segments:
            self.start_U.append(U)
            if s.is_pulse:
                U = _rot_apply(s.axis, np.array([s.omega * s.width]), U)[0]
        self.period_U = U

    def unitary(self, t: np.ndarray) -> np.ndarray:
        """U_pi at times t within [0, T] (values at edges are left limits
        coming from the finished segment, i.e. continuous)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape + (2, 2), dtype=complex)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.segments) - 1)
        for k, s in enumerate(self.segments):
            mask = idx == k
            if not mask.any():
                continue
            if s.is_pulse:
                out[mask] = _rot_apply(s.axis, s.omega * (t[mask] - s.t0), self.start_U[k])
            else:
                out[mask] = self.start_U[k]
        return out

    def vectors(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _frame_vectors(self.unitary(t))


# ---------------------------------------------------------------------------
# ideal (instantaneous-pulse) step functions
# ---------------------------------------------------------------------------

def ideal_steps(seq: PulseSequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Breakpoints and interval values of the step functions f_x, f_y.

    Returns (edges, vx, vy): edges has K+1 entries starting at 0 and ending at
    T; vx/vy hold the +-1 values on each of the K intervals.  Flips happen at
    the pulses' nominal times; a pulse nominally at T flips nothing inside the
    period (it acts at the boundary).
    """
    T = seq.period
    marks = sorted(seq.pulses, key=lambda p: p.nominal_time)
    interior = [p for p in marks if p.nominal_time < T * (1 - 1e-15)]
    edges = [0.0] + [p.nominal_time for p in interior] + [T]
    vx, vy = [1.0], [1.0]
    for p in interior:
        x, y = vx[-1], vy[-1]
        if p.axis == "y":
            x = -x
        else:
            y = -y
        vx.append(x)
        vy.append(y)
    return np.array(edges), np.array(vx), np.array(vy)


def _step_value(edges: np.ndarray, vals: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(vals) - 1)
    return vals[idx]


@dataclass
class ModulationFunctions:
    """Sampled modulation functions over one period plus their exact sources.

    ``grid`` holds ``grid_points`` samples of [0, T); ``f_ideal`` the step
    functions (f_x, f_y, f_z) and, when built with finite widths, ``f_jc`` /
    ``f_xi`` the full frame vectors.  ``evaluator`` gives exact access at
    arbitrary times.
    """

    sequence: PulseSequence
    finite_width: bool
    grid: np.ndarray
    f_ideal: np.ndarray  # (3, n) floats
    f_jc: np.ndarray  # (3, n) complex
    f_xi: np.ndarray  # (3, n) floats
    edges: np.ndarray
    step_values: np.ndarray  # (3, K) ideal interval values
    evaluator: FrameEvaluator


def modulation(
    seq: PulseSequence, finite_width: bool = False, grid_points: int = 1000
) -> ModulationFunctions:
    """Modulation functions of a sequence on a uniform period grid.

    With ``finite_width`` the actual rectangular pulses generate the frame; the
    grid must then resolve every pulse with at least 10 cells.
    """
    if grid_points < 10:
        raise ValueError("grid_points must be at least 10")
    T = seq.period
    cell = T / grid_points
    if finite_width:
        for p in seq.pulses:
            if p.width < 10 * cell:
                raise ValueError(
                    f"pulse of width {p.width:g} spans fewer than 10 grid cells "
                    f"(cell {cell:g}); increase grid_points"
                )
    grid = np.arange(grid_points) * cell
    edges, vx, vy = ideal_steps(seq)
    fx = _step_value(edges, vx, grid)
    fy = _step_value(edges, vy, grid)
    f_ideal = np.stack([fx, fy, fx * fy])
    ev = FrameEvaluator(seq)
    if finite_width:
        f_jc, f_xi = ev.vectors(grid)
        f_jc, f_xi = f_jc.T.copy(), f_xi.T.copy()
    else:
        f_jc = np.stack([fx.astype(complex), -1j * fy, np.zeros_like(fx, dtype=complex)])
        f_xi = np.stack([np.zeros_like(fx), np.zeros_like(fx), fx * fy])
    return ModulationFunctions(
        sequence=seq,
        finite_width=finite_width,
        grid=grid,
        f_ideal=f_ideal,
        f_jc=f_jc,
        f_xi=f_xi,
        edges=edges,
        step_values=np.stack([vx, vy, vx * vy]),
        evaluator=ev,
    )


# ---------------------------------------------------------------------------
# first-order coefficients
# ---------------------------------------------------------------------------

def split_detuning(delta: float, period: float) -> tuple[int, float]:
    """Delta = 2 pi m / T + Delta_eff with the nearest integer m."""
    m = int(round(delta * period / (2 * math.pi)))
    return m, delta - 2 * math.pi * m / period


def _interval_filter(a: np.ndarray, b: np.ndarray, delta: float) -> np.ndarray:
    """Exact per-interval integrals of e^{i delta s}."""
    if delta == 0.0:
        return (b - a).astype(complex)
    return (np.exp(1j * delta * b) - np.exp(1j * delta * a)) / (1j * delta)


@dataclass(frozen=True)
class FirstOrderCoefficients:
    """Filtered averages of the ideal modulation functions at one detuning."""

    eta_x: complex
    eta_y: complex
    eta: float
    kind: str  # "jc" | "anti-jc" | "rabi-x" | "rabi-y" | "decoupled" | "mixed"
    gamma: np.ndarray  # (gamma_x, gamma_y, gamma_z)
    upsilon_x: float
    upsilon_y: float
    m: int
    delta: float
    delta_eff: float
    period: float

    @property
    def phi_x(self) -> float:
        return float(np.angle(self.eta_x)) if abs(self.eta_x) > CLASSIFY_TOL else 0.0

    @property
    def phi_y(self) -> float:
        return float(np.angle(self.eta_y)) if abs(self.eta_y) > CLASSIFY_TOL else 0.0

    def g_eff(self, g: float) -> float:
        return self.eta * g


def classify(eta_x: complex, eta_y: complex, tol: float = CLASSIFY_TOL) -> str:
    """Coupling character from the pair (eta_x, eta_y)."""
    ax, ay = abs(eta_x), abs(eta_y)
    if ax < tol and ay < tol:
        return "decoupled"
    if ay < tol:
        return "rabi-x"
    if ax < tol:
        return "rabi-y"
    if abs(eta_x - eta_y) < tol:
        return "jc"
    if abs(eta_x + eta_y) < tol:
        return "anti-jc"
    return "mixed"


def first_order(seq: PulseSequence, delta: float) -> FirstOrderCoefficients:
    """Exact first-order coefficients (no quadrature: per-interval integrals)."""
    T = seq.period
    edges, vx, vy = ideal_steps(seq)
    a, b = edges[:-1], edges[1:]
    m, delta_eff = split_detuning(delta, T)
    # The periodic part of the cavity phase is what the period average sees;
    # the slow remainder delta_eff survives as the effective cavity detuning,
    # so the couplings are sampled at the commensurate frequency 2 pi m / T.
    filt = _interval_filter(a, b, 2 * math.pi * m / T)
    eta_x = complex(np.sum(vx * filt) / T)
    eta_y = complex(np.sum(vy * filt) / T)
    lengths = b - a
    gamma = np.array(
        [np.sum(vx * lengths), np.sum(vy * lengths), np.sum(vx * vy * lengths)]
    ) / T
    # drive term from over-rotations: each pulse contributes f_axis(t_i) dtheta
    ups_x = ups_y = 0.0
    for p in seq.pulses:
        if abs(p.dtheta) < 1e-300:
            continue
        t_probe = min(p.nominal_time, T) * (1 - 1e-12)
        if p.axis == "x":
            ups_x += float(_step_value(edges, vx, np.array([t_probe]))[0]) * p.dtheta
        else:
            ups_y += float(_step_value(edges, vy, np.array([t_probe]))[0]) * p.dtheta
    return FirstOrderCoefficients(
        eta_x=eta_x,
        eta_y=eta_y,
        eta=(abs(eta_x) + abs(eta_y)) / 2,
        kind=classify(eta_x, eta_y),
        gamma=gamma,
        upsilon_x=ups_x / T,
        upsilon_y=ups_y / T,
        m=m,
        delta=delta,
        delta_eff=delta_eff,
        period=T,
    )


def window_eta(seq: PulseSequence, delta: float) -> tuple[complex, complex]:
    """Continuous-frequency window average (eta_x, eta_y) at an arbitrary
    detuning,  eta_u = (1/T) int_0^T f_u(t) e^{i delta t} dt.

    Unlike :func:`first_order` this does not split off the commensurate
    harmonic, so it traces out the full filter curve between resonances; at
    delta = 2 pi m / T both agree.
    """
    T = seq.period
    edges, vx, vy = ideal_steps(seq)
    filt = _interval_filter(edges[:-1], edges[1:], delta)
    return complex(np.sum(vx * filt) / T), complex(np.sum(vy * filt) / T)


@dataclass(frozen=True)
class ClosedFormEta:
    eta: float
    kind: str
    phi_y: float | None = None


def closed_form_eta(family: str, m: int, t1_over_period: float | None = None) -> ClosedFormEta:
    """Recorded closed-form couplings on resonance (Delta = 2 pi m / T).

    ``phi_y`` is the recorded phase convention of the (sub)dominant coupling
    component where one is documented; it is informational, not contractual.
    """
    x = t1_over_period
    if family == "xxyy":
        if m == 0:
            return ClosedFormEta(0.5, "jc", None if x is None else -math.pi)
        eta = abs(2.0 / (m * math.pi) * math.sin(m * math.pi / 4))
        kind = "decoupled" if eta < CLASSIFY_TOL else ("jc" if m % 2 == 0 else "anti-jc")
        phi = None if x is None else math.pi * m * (8 * x + 1) / 4 - math.pi
        return ClosedFormEta(eta, kind, phi)
    if family == "xy8":
        if m == 0:
            return ClosedFormEta(0.0, "decoupled", None)
        eta = abs(4.0 / (math.pi * m) * math.sin(math.pi * m / 4) * math.cos(5 * math.pi * m / 8))
        kind = "decoupled" if eta < CLASSIFY_TOL else ("jc" if m % 2 == 0 else "anti-jc")
        phi = None if x is None else math.pi * m * (16 * x - 1) / 8 + math.pi * (m + 1)
        return ClosedFormEta(eta, kind, phi)
    if family in ("xx", "yy"):
        main = "rabi-x" if family == "xx" else "rabi-y"
        other = "rabi-y" if family == "xx" else "rabi-x"
        if m == 0:
            return ClosedFormEta(0.5, main, None)
        eta = math.sin(math.pi * m / 2) ** 2 / (math.pi * abs(m))
        if eta < CLASSIFY_TOL:
            return ClosedFormEta(0.0, "decoupled", None)
        phi = None if x is None else math.pi * m * (2 * x + 1) + math.pi / 2
        return ClosedFormEta(eta, other, phi)
    if family == "gklc":
        if m == 0:
            return ClosedFormEta(0.5, "jc", None)
        raise ValueError("no closed form recorded for gklc with m != 0")
    raise ValueError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# second-order exchange coefficients r_uv
# ---------------------------------------------------------------------------

def _triangle_exact(
    edges: np.ndarray,
    outer_vals: np.ndarray,
    inner_vals: np.ndarray,
    z: complex,
) -> complex:
    """Exact  int_0^T dt outer(t) e^{-z t} int_0^t ds inner(s) e^{+z s}
    for piecewise-constant outer/inner on the given edges."""
    a, b = edges[:-1], edges[1:]
    if z == 0:
        A = outer_vals * (b - a)
        B = inner_vals * (b - a)
        same = outer_vals * inner_vals * (b - a) ** 2 / 2
    else:
        A = outer_vals * (np.exp(-z * a) - np.exp(-z * b)) / z
        B = inner_vals * (np.exp(z * b) - np.exp(z * a)) / z
        L = b - a
        same = outer_vals * inner_vals * (L - (1.0 - np.exp(-z * L)) / z) / z
    prefix = np.concatenate([[0.0], np.cumsum(B)[:-1]])
    return complex(np.sum(A * prefix) + np.sum(same))


def second_order_ruv(seq: PulseSequence, delta: float) -> np.ndarray:
    """2x2 matrix r_uv (u, v in {x, y}) of the period-averaged second-order
    cavity-mediated exchange,
    r_uv = -(Delta/T) Im  II_{0<=s<=t<=T} ftil_u*(t) ftil_v(s) e^{-i Delta (t-s)},
    with ftil_x = f_x and ftil_y = -i f_y.  Requires Delta != 0 (the exchange
    coefficient J = g1 g2 / Delta is singular on resonance)."""
    if delta == 0.0:
        raise ValueError("second_order_ruv needs a nonzero detuning")
    T = seq.period
    edges, vx, vy = ideal_steps(seq)
    ftil = {"x": vx.astype(complex), "y": -1j * vy}
    r = np.empty((2, 2))
    for i, u in enumerate("xy"):
        for j, v in enumerate("xy"):
            d = _triangle_exact(edges, np.conj(ftil[u]), ftil[v], 1j * delta)
            r[i, j] = -(delta / T) * d.imag
    return r


def secular_ruv(
    seq: PulseSequence,
    delta: float,
    exclude_harmonic: int,
    max_harmonic: int = 1000,
) -> np.ndarray:
    """Secular exchange matrix r_uv as a sum over modulation harmonics,
    r_uv = Delta sum_{k != k0} conj(c_k^u) c_k^v / (Delta - 2 pi k / T),
    with c_k^u the Fourier coefficients of ftil_u at e^{-i 2 pi k t / T}.

    Each harmonic of the toggled coupling exchanges photons at its own
    residual detuning; summing the far-off-resonant components gives the
    exchange that survives stroboscopic averaging.  The component
    ``exclude_harmonic`` is the one a period-averaged model retains
    explicitly as its spin-cavity coupling -- its (near-resonant) exchange
    builds up dynamically through that coupling and must not be counted
    here.  At a commensurate detuning Delta = 2 pi k0 / T with c_{k0} = 0
    this sum reproduces :func:`second_order_ruv`; away from those points it
    differs by rapidly oscillating cross-harmonic terms that a one-period
    average retains but that do not accumulate over many periods.

    Returns a Hermitian 2x2 complex matrix (diagonal real).
    """
    if delta == 0.0:
        raise ValueError("secular_ruv needs a nonzero detuning")
    T = seq.period
    edges, vx, vy = ideal_steps(seq)
    a, b = edges[:-1], edges[1:]
    ftil = {"x": vx.astype(complex), "y": -1j * vy}
    r = np.zeros((2, 2), dtype=complex)
    for k in range(-max_harmonic, max_harmonic + 1):
        if k == exclude_harmonic:
            continue
        omega = 2 * math.pi * k / T
        delta_k = delta - omega
        if abs(delta_k) * T < 1e-9:
            raise ValueError(
                f"harmonic {k} is resonant (Delta - 2 pi k / T = {delta_k:g}) "
                "but is not the excluded one; the perturbative sum breaks down"
            )
        filt = _interval_filter(a, b, omega)
        ck = {u: np.sum(ftil[u] * filt) / T for u in "xy"}
        for i, u in enumerate("xy"):
            for j, v in enumerate("xy"):
                r[i, j] += delta * np.conj(ck[u]) * ck[v] / delta_k
    return r


# ---------------------------------------------------------------------------
# Gauss-Legendre machinery with exact-in-interpolation cumulative integrals
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gl_reference(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and the cumulative-integral matrix Q on [-1, 1].

    (Q v)_i  =  int_{-1}^{x_i} p(x) dx  for the degree-(n-1) interpolant p of
    the samples v.  Built in the Legendre basis, whose inverse Vandermonde is
    exact through Gauss quadrature orthogonality.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    P = np.polynomial.legendre.legvander(x, n - 1)  # P[i, j] = P_j(x_i)
    Pext = np.polynomial.legendre.legvander(x, n)
    sign = np.array([(-1.0) ** j for j in range(n + 1)])  # P_j(-1)
    A = np.zeros((n, n))
    A[:, 0] = x + 1.0
    for j in range(1, n):
        A[:, j] = ((Pext[:, j + 1] - sign[j + 1]) - (Pext[:, j - 1] - sign[j - 1])) / (2 * j + 1)
    inv_P = (np.arange(n) + 0.5)[:, None] * (P.T * w[None, :])
    return x, w, A @ inv_P


class SegmentGrid:
    """Composite Gauss-Legendre grid over [0, T] split at the supplied edges.

    Within each chunk integrands must be smooth; the splitting chooses chunk
    lengths so that the fastest phase advances by at most ``max_phase``,
    keeping both quadrature and the in-chunk cumulative interpolant exact to
    machine precision.
    """

    def __init__(self, edges: np.ndarray, rates: np.ndarray, n_nodes: int = _GL_NODES,
                 max_phase: float = _MAX_PHASE):
        xs, ws, Q = _gl_reference(n_nodes)
        chunk_edges: list[tuple[float, float]] = []
        for (a, b), rate in zip(zip(edges[:-1], edges[1:]), rates):
            n_chunks = max(1, int(math.ceil(abs(rate) * (b - a) / max_phase)))
            pts = np.linspace(a, b, n_chunks + 1)
            chunk_edges.extend(zip(pts[:-1], pts[1:]))
        self.n_nodes = n_nodes
        self.chunks = chunk_edges
        nodes, weights = [], []
        for a, b in chunk_edges:
            half = (b - a) / 2
            nodes.append((a + b) / 2 + half * xs)
            weights.append(half * ws)
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights)
        self._Q = Q

    def integrate(self, vals: np.ndarray) -> complex:
        return np.sum(self.weights * vals)

    def cumulative(self, vals: np.ndarray) -> np.ndarray:
        """Values of int_0^{t_i} at every node t_i."""
        n = self.n_nodes
        out = np.empty_like(vals, dtype=complex if np.iscomplexobj(vals) else float)
        total = 0.0
        for k, (a, b) in enumerate(self.chunks):
            half = (b - a) / 2
            sl = slice(k * n, (k + 1) * n)
            v = vals[sl]
            out[sl] = total + half * (self._Q @ v)
            total = total + np.sum(self.weights[sl] * v)
        return out

    def double_triangle(self, outer: np.ndarray, inner: np.ndarray) -> complex:
        """II_{0 <= s <= t <= T} outer(t) inner(s) ds dt."""
        return self.integrate(outer * self.cumulative(inner))


# ---------------------------------------------------------------------------
# noise-expansion tensors
# ---------------------------------------------------------------------------

@dataclass
class ExpansionTensors:
    """Period-averaged tensors of the stroboscopic effective Hamiltonian,
    order by order in the slow dephasing shift.

    Every per-order triple follows the expansion convention
    X(xi) = X0 + (xi T) X1 - (1/2) (xi T)^2 X2.  ``Gamma`` and ``O`` are
    (order, component) arrays; ``G0`` .. ``G3`` are (order, component) arrays
    of the nested double integrals; ``G_uv`` maps the two-spin index pair to
    its four expansion coefficients (order0, order1, order21, order22).
    """

    sequence: PulseSequence
    delta: float
    finite_width: bool
    Gamma: np.ndarray  # (3 orders, 3 comps) complex
    O: np.ndarray  # (3, 3) complex
    G0: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    G3: np.ndarray
    G_uv: dict[str, np.ndarray]  # "xx" -> [g0, g1, g21, g22]

    def table_row(self) -> dict[str, float]:
        """The summary quantities usually tabulated for a sequence."""
        return {
            "O0": float(max(abs(self.O[0, 0]), abs(self.O[0, 1]))),
            "G2z0": float(abs(self.G2[0, 2])),
            "O1": float(max(abs(self.O[1, 0]), abs(self.O[1, 1]))),
            "Gamma1": float(max(abs(self.Gamma[1, 0]), abs(self.Gamma[1, 1]))),
            "G1z1": float(abs(self.G1[1, 2])),
            "G2z1": float(abs(self.G2[1, 2])),
            "G3z1": float(self.G3[1, 2].real),
            "O2": float(max(abs(self.O[2, 0]), abs(self.O[2, 1]))),
            "G2z2": float(abs(self.G2[2, 2])),
        }


def _cross_orders(grid: SegmentGrid, A: list[np.ndarray], B: list[np.ndarray]) -> np.ndarray:
    """Order-resolved  II (A(t) x B(s))  for expansion triples A, B of shape
    (order, node, component).  Returns (3 orders, 3 components)."""
    def cross(idx_a: int, idx_b: int) -> np.ndarray:
        out = np.empty(3, dtype=complex)
        for c, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
            out[c] = grid.double_triangle(A[idx_a][:, i], B[idx_b][:, j]) - grid.double_triangle(
                A[idx_a][:, j], B[idx_b][:, i]
            )
        return out

    g0 = cross(0, 0)
    g1 = cross(0, 1) + cross(1, 0)
    g2 = cross(0, 2) + cross(2, 0) - 2 * cross(1, 1)
    return np.stack([g0, g1, g2])


def expansion_tensors(
    seq: PulseSequence,
    delta: float,
    finite_width: bool = True,
    n_nodes: int = _GL_NODES,
) -> ExpansionTensors:
    """Compute all period-averaged expansion tensors at one detuning.

    With ``finite_width=False`` the instantaneous-pulse step functions are
    used (the tensors then reduce to their ideal limits).
    """
    T = seq.period
    if finite_width:
        ev = FrameEvaluator(seq)
        base_edges = ev.edges
        rates = np.array(
            [max(abs(delta), s.omega) for s in ev.segments]
        )
        grid = SegmentGrid(base_edges, rates, n_nodes)
        f_jc, f_xi = ev.vectors(grid.nodes)
    else:
        edges, vx, vy = ideal_steps(seq)
        rates = np.full(len(edges) - 1, abs(delta))
        grid = SegmentGrid(edges, rates, n_nodes)
        fx = _step_value(edges, vx, grid.nodes)
        fy = _step_value(edges, vy, grid.nodes)
        f_jc = np.stack([fx.astype(complex), -1j * fy, np.zeros_like(fx, dtype=complex)], axis=-1)
        f_xi = np.stack([np.zeros_like(fx), np.zeros_like(fx), fx * fy], axis=-1)

    iz = np.real(grid.cumulative(f_xi[:, 2])) / T
    phase = np.exp(1j * delta * grid.nodes)

    def rotate_orders(vec: np.ndarray, phased: bool) -> list[np.ndarray]:
        """Expansion of the frame-rotated vector in powers of xi T.

        order 0: (v_x, v_y, v_z);  order 1: I_z/T (v_y, -v_x, 0);
        order 2: (I_z/T)^2 (v_x, v_y, 0)  -- the z part does not rotate.
        """
        ph = phase if phased else np.ones_like(phase)
        o0 = vec * ph[:, None]
        o1 = np.stack([iz * vec[:, 1], -iz * vec[:, 0], np.zeros_like(iz, dtype=complex)], axis=-1)
        o1 = o1 * ph[:, None]
        o2 = np.stack([iz**2 * vec[:, 0], iz**2 * vec[:, 1], np.zeros_like(iz, dtype=complex)], axis=-1)
        o2 = o2 * ph[:, None]
        return [o0, o1, o2]

    FJC = rotate_orders(f_jc, phased=True)
    fxi_c = f_xi.astype(complex)
    fxi_c[:, 2] = 0.0  # absorbed into the frame
    FXI = rotate_orders(fxi_c, phased=False)
    # the z channel of the dephasing vector is removed at every order
    for arr in FXI:
        arr[:, 2] = 0.0

    Gamma = np.stack([np.array([grid.integrate(F[:, c]) for c in range(3)]) for F in FXI]) / T
    O = np.stack([np.array([grid.integrate(F[:, c]) for c in range(3)]) for F in FJC]) / T

    FJC_conj = [np.conj(F) for F in FJC]
    G0 = _cross_orders(grid, FXI, FXI) / T**2
    G1 = _cross_orders(grid, FJC, FXI) / T**2
    G2 = _cross_orders(grid, FJC, FJC) / T**2
    G3 = _cross_orders(grid, FJC_conj, FJC) / T**2

    G_uv: dict[str, np.ndarray] = {}
    for i, u in enumerate("xy"):
        for j, v in enumerate("xy"):
            A = [np.conj(F[:, i]) for F in FJC]
            B = [F[:, j] for F in FJC]
            g0 = grid.double_triangle(A[0], B[0])
            g1 = grid.double_triangle(A[1], B[0]) + grid.double_triangle(A[0], B[1])
            g21 = grid.double_triangle(A[2], B[0]) + grid.double_triangle(A[0], B[2])
            g22 = -4.0 * grid.double_triangle(A[1], B[1])
            G_uv[u + v] = np.array([g0, g1, g21, g22]) / T**2

    return ExpansionTensors(
        sequence=seq,
        delta=delta,
        finite_width=finite_width,
        Gamma=Gamma,
        O=O,
        G0=G0,
        G1=G1,
        G2=G2,
        G3=G3,
        G_uv=G_uv,
    )


# ---------------------------------------------------------------------------
# cavity-induced decay rates (lossy cavity, dressed states)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayRates:
    """Effective decay rates of the driven spin with a lossy cavity.

    ``gamma_e`` / ``gamma_g`` damp the dressed excited/ground state; ``K`` is
    the underlying 2x2 kernel matrix over the {x, y} modulation channels.
    ``branch_deviation`` reports the closed-form vs harmonic-sum agreement.
    """

    gamma_e: float
    gamma_g: float
    K: np.ndarray
    branch_deviation: float
    n_harm_used: int


def _k_matrix_closed(seq: PulseSequence, z: complex, g: float) -> np.ndarray:
    T = seq.period
    edges, vx, vy = ideal_steps(seq)
    ftil = {"x": vx.astype(complex), "y": -1j * vy}
    K = np.empty((2, 2), dtype=complex)
    for i, u in enumerate("xy"):
        for j, v in enumerate("xy"):
            j1 = _triangle_exact(edges, np.conj(ftil[u]), ftil[v], z)
            # periodic image: t' in [t - T, 0) maps onto u' = t' + T > t
            j2 = _triangle_exact(edges, ftil[v], np.conj(ftil[u]), -z)
            jtil = (j1 + np.exp(-z * T) * j2) / T**2
            K[i, j] = (g**2 / 4) * T * jtil / (1.0 - np.exp(-z * T))
    return K


def _harmonics(seq: PulseSequence, n: int) -> dict[str, np.ndarray]:
    """ftil_u Fourier components (1/T) int f e^{i 2 pi k t / T} for k in [-n, n]."""
    T = seq.period
    edges, vx, vy = ideal_steps(seq)
    a, b = edges[:-1], edges[1:]
    ks = np.arange(-n, n + 1)
    out = {}
    for name, vals in (("x", vx.astype(complex)), ("y", -1j * vy)):
        comp = np.empty(len(ks), dtype=complex)
        for idx, k in enumerate(ks):
            w = 2 * math.pi * k / T
            comp[idx] = np.sum(vals * _interval_filter(a, b, w)) / T
        out[name] = comp
    out["k"] = ks
    return out


def _k_matrix_fourier(seq: PulseSequence, delta: float, kappa: float, g: float, n: int) -> np.ndarray:
    T = seq.period
    h = _harmonics(seq, n)
    denom = 1j * (delta - 2 * math.pi * h["k"] / T) + kappa / 2
    K = np.empty((2, 2), dtype=complex)
    for i, u in enumerate("xy"):
        for j, v in enumerate("xy"):
            K[i, j] = (g**2 / 4) * np.sum(np.conj(h[u]) * h[v] / denom)
    return K


def decay_rates(
    seq: PulseSequence,
    delta: float,
    kappa: float,
    g: float = 1.0,
    n_harm: int = 200,
) -> DecayRates:
    """Dressed-state decay rates for a cavity of linewidth kappa.

    The closed-form branch integrates the two-time kernel exactly per segment
    pair; the harmonic branch sums the filter spectrum, doubling the harmonic
    count until converged below 1e-8 (relative).  The two must agree to 1e-6.
    """
    if kappa <= 0:
        raise ValueError("decay rates need kappa > 0")
    z = 1j * delta + kappa / 2
    K_closed = _k_matrix_closed(seq, z, g)

    n = max(n_harm, int(math.ceil(5 * max(1.0, abs(delta) * seq.period / (2 * math.pi)))))
    K_f = _k_matrix_fourier(seq, delta, kappa, g, n)
    while True:
        n2 = 2 * n
        K_f2 = _k_matrix_fourier(seq, delta, kappa, g, n2)
        scale = max(np.max(np.abs(K_f2)), 1e-300)
        if np.max(np.abs(K_f2 - K_f)) <= 1e-8 * scale or n2 > 600000:
            K_f = K_f2
            n = n2
            break
        K_f, n = K_f2, n2

    dev = float(np.max(np.abs(K_f - K_closed)) / max(np.max(np.abs(K_closed)), 1e-300))
    if dev > 1e-6:
        raise RuntimeError(f"decay-rate branches disagree (relative deviation {dev:.3e})")

    def rates(K: np.ndarray) -> tuple[float, float]:
        base = K[0, 0] + K[1, 1]
        cross = 1j * (K[0, 1] - K[1, 0])
        return (2 * (base + cross).real, 2 * (base - cross).real)

    g_e, g_g = rates(K_closed)
    return DecayRates(gamma_e=g_e, gamma_g=g_g, K=K_closed, branch_deviation=dev, n_harm_used=n)


# ---------------------------------------------------------------------------
# effective stroboscopic models
# ---------------------------------------------------------------------------

@dataclass
class EffectiveModel:
    """Engineered model reproducing the exact dynamics at multiples of T.

    ``static_hamiltonian`` generates the stroboscopic states directly:
    psi(nT) agrees (up to a global sign) with
    exp(+i Delta_eff n T a^dag a) -> folded away at multiples of the period --
    so chi(nT) = exp(-i H_static n T) chi(0) matches the lab-frame state at
    stroboscopic times for Delta = 2 pi m / T + Delta_eff.
    """

    sequence: PulseSequence
    layout: HilbertLayout
    coeffs: FirstOrderCoefficients
    g: tuple[float, ...]
    orders: str
    r_uv: np.ndarray | None
    J: float

    def __post_init__(self) -> None:
        self._ops = build_elementary(self.layout)

    def coupling_operator(self, j: int) -> np.ndarray:
        """Spin-j part of the engineered cavity coupling (the a^dag coefficient).

        In this package's basis (sigma^- = |g><e|) the period average of the
        exact frame coupling reads eta_x sx + i eta_y sy, so eta_x = eta_y
        gives 2 eta sigma^- (excitation exchange) and eta_x = -eta_y gives
        2 eta sigma^+ (joint excitation).
        """
        ops = self._ops
        return self.coeffs.eta_x * ops[f"sx{j}"] + 1j * self.coeffs.eta_y * ops[f"sy{j}"]

    def static_hamiltonian(self) -> Operator:
        ops = self._ops
        c = self.coeffs
        H = c.delta_eff * ops["num"].astype(complex)
        for j in range(1, self.layout.n_tls + 1):
            C = self.coupling_operator(j)
            H = H + (self.g[j - 1] / 2) * (C @ ops["adag"] + C.conj().T @ ops["a"])
            H = H + (c.upsilon_x / 2) * ops[f"sx{j}"] + (c.upsilon_y / 2) * ops[f"sy{j}"]
        if self.orders == "first+second" and self.layout.n_tls == 2:
            paulis = ("sx", "sy")
            for i, u in enumerate(paulis):
                for k, v in enumerate(paulis):
                    H = H - (self.J / 2) * self.r_uv[i, k] * (ops[f"{u}1"] @ ops[f"{v}2"])
        return Operator(H, self.layout, hermitian=True)

    def hamiltonian(self, n: int) -> Operator:
        """Toggling-frame generator evaluated at t = n T (explicit phases)."""
        ops = self._ops
        c = self.coeffs
        phase = np.exp(1j * c.delta_eff * n * c.period)
        H = np.zeros((self.layout.dim, self.layout.dim), dtype=complex)
        for j in range(1, self.layout.n_tls + 1):
            C = self.coupling_operator(j)
            H = H + (self.g[j - 1] / 2) * (phase * (C @ ops["adag"]) + np.conj(phase) * (C.conj().T @ ops["a"]))
            H = H + (c.upsilon_x / 2) * ops[f"sx{j}"] + (c.upsilon_y / 2) * ops[f"sy{j}"]
        if self.orders == "first+second" and self.layout.n_tls == 2:
            paulis = ("sx", "sy")
            for i, u in enumerate(paulis):
                for k, v in enumerate(paulis):
                    H = H - (self.J / 2) * self.r_uv[i, k] * (ops[f"{u}1"] @ ops[f"{v}2"])
        return Operator(H, self.layout)

    def propagate(self, psi0: np.ndarray, n_periods: int, every: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Stroboscopic states under the engineered model.

        Returns (times, states) at t = 0, every*T, 2*every*T, ... n_periods*T.
        """
        T = self.coeffs.period
        U = expm_hermitian(self.static_hamiltonian().data, every * T)
        n_out = n_periods // every
        states = np.empty((n_out + 1, self.layout.dim), dtype=complex)
        states[0] = psi0
        psi = np.array(psi0, dtype=complex)
        for k in range(1, n_out + 1):
            psi = U @ psi
            states[k] = psi
        times = np.arange(n_out + 1) * every * T
        return times, states


def effective_hamiltonian(
    seq: PulseSequence,
    delta: float,
    g: float | tuple[float, ...],
    n_tls: int = 1,
    fock_cutoff: int | None = None,
    orders: str = "first",
) -> EffectiveModel:
    """Build the engineered stroboscopic model for a sequence at one detuning.

    ``orders`` is "first" (spin-cavity exchange and drive terms only) or
    "first+second" (adds the period-averaged two-spin exchange, two spins
    only).
    """
    if orders not in ("first", "first+second"):
        raise ValueError("orders must be 'first' or 'first+second'")
    gs = (g,) * max(n_tls, 1) if np.isscalar(g) else tuple(g)
    if len(gs) != max(n_tls, 1):
        raise ValueError(f"need {n_tls} coupling strengths, got {len(gs)}")
    from .hilbert import default_fock_cutoff

    layout = HilbertLayout(n_tls, fock_cutoff or default_fock_cutoff(n_tls))
    coeffs = first_order(seq, delta)
    r = None
    J = 0.0
    if orders == "first+second":
        if n_tls != 2:
            raise ValueError("second-order exchange terms need two spins")
        # The commensurate harmonic is already kept explicitly as the
        # first-order coupling, so the exchange term sums only the remaining
        # far-off-resonant harmonics.
        r = secular_ruv(seq, delta, exclude_harmonic=coeffs.m)
        J = gs[0] * gs[1] / delta
    return EffectiveModel(
        sequence=seq,
        layout=layout,
        coeffs=coeffs,
        g=gs,
        orders=orders,
        r_uv=r,
        J=J,
    )
