"""Exact time-domain propagation of the full driven, noisy system.

Closed-system (unitary) and cavity-decay (Lindblad) branches share one
segment plan; Monte-Carlo ensembles average figures of merit over noise
realizations drawn from per-trajectory counter-based streams.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .hilbert import (
    HilbertLayout,
    Operator,
    build_elementary,
    check_truncation,
    default_fock_cutoff,
    expm_hermitian,
    expm_superop,
    initial_ket,
    liouvillian,
)
from .metrics import Observable, evaluate, observable
from .noise import NoiseModel, NoiseTrajectory, sample
from .pulses import PulseSequence
from .toggling import FrameEvaluator

NORM_TOL = 1e-9
TRACE_TOL = 1e-8
LEAKAGE_TOL = 1e-6
POSITIVITY_FLOOR = -1e-10

_EDGE_TOL = 1e-10  # relative tolerance for merging coincident time edges


def delta_from_resonance(m: int, delta_eff: float, period: float) -> float:
    """Bare detuning for resonance index m and effective detuning delta_eff."""
    if period <= 0:
        raise ValueError("period must be positive")
    return 2.0 * math.pi * m / period + delta_eff


@dataclass(frozen=True)
class SystemConfig:
    """Everything needed to propagate one driven, noisy system.

    ``g`` may be a scalar (shared by all spins) or a per-spin tuple.  With a
    pulse sequence the total time is ``n_periods * sequence.period`` and
    states are recorded ``samples_per_period`` times per period; without one
    (free evolution) give ``total_time`` and the number of sample intervals
    ``n_samples``.
    """

    sequence: PulseSequence | None = None
    n_tls: int = 1
    g: float | tuple[float, ...] = 1.0
    delta: float = 0.0
    kappa: float = 0.0
    fock_cutoff: int | None = None
    noise: NoiseModel = field(default_factory=lambda: NoiseModel("none"))
    n_periods: int = 1
    total_time: float | None = None
    initial: str | dict = "e0"
    samples_per_period: int = 1
    n_samples: int = 100

    def __post_init__(self) -> None:
        if self.n_tls not in (0, 1, 2):
            raise ValueError("n_tls must be 0, 1 or 2")
        g = self.g
        if np.isscalar(g):
            g = (float(g),) * self.n_tls
        else:
            g = tuple(float(x) for x in g)
        if len(g) != self.n_tls:
            raise ValueError(f"need {self.n_tls} couplings, got {len(g)}")
        object.__setattr__(self, "g", g)
        for name in ("delta", "kappa"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if any(not math.isfinite(x) for x in g):
            raise ValueError("couplings must be finite")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.sequence is None:
            if self.total_time is None or not self.total_time > 0:
                raise ValueError("free evolution needs a positive total_time")
            if self.n_samples < 1:
                raise ValueError("n_samples must be >= 1")
        else:
            if self.total_time is not None:
                raise ValueError("total_time is implied by the sequence; leave it unset")
            if self.n_periods < 1:
                raise ValueError("n_periods must be >= 1")
            if self.samples_per_period < 1:
                raise ValueError("samples_per_period must be >= 1")
        initial_ket(self.layout, self.initial)  # validates the spec early

    @property
    def layout(self) -> HilbertLayout:
        cutoff = self.fock_cutoff
        if cutoff is None:
            cutoff = default_fock_cutoff(self.n_tls)
        return HilbertLayout(n_tls=self.n_tls, fock_cutoff=cutoff)

    @property
    def span(self) -> float:
        if self.sequence is None:
            return float(self.total_time)
        return self.n_periods * self.sequence.period

    def to_dict(self) -> dict:
        return {
            "sequence": None if self.sequence is None else self.sequence.to_dict(),
            "n_tls": self.n_tls,
            "g": list(self.g),
            "delta": self.delta,
            "kappa": self.kappa,
            "fock_cutoff": self.layout.fock_cutoff,
            "noise": {
                "kind": self.noise.kind,
                "sigma": self.noise.sigma,
                "tau_c": self.noise.tau_c,
            },
            "n_periods": self.n_periods,
            "total_time": self.total_time,
            "initial": self.initial,
            "samples_per_period": self.samples_per_period,
            "n_samples": self.n_samples,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# propagation plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanSegment:
    """One constant-envelope interval with its sub-step count."""

    t0: float
    t1: float
    axis: str | None
    omega: float
    n_sub: int
    template: int  # segments sharing a template share the Hamiltonian shape
    record: bool   # sample the state at t1

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


@dataclass(frozen=True)
class PropagationPlan:
    span: float
    segments: tuple[PlanSegment, ...]
    sample_times: tuple[float, ...]  # starts at 0, ends at span


def _step_limit(config: SystemConfig) -> float:
    """Largest allowed sub-step: resolve the fastest frequency present."""
    rates = [abs(config.delta), config.noise.sigma]
    n_top = config.layout.fock_cutoff - 1
    if config.g:
        rates.append(max(config.g) * math.sqrt(max(n_top, 1)))
    caps = []
    seq = config.sequence
    if seq is not None and seq.pulses:
        caps.append(min(p.width for p in seq.pulses) / 10.0)
        rates.append(max(p.omega for p in seq.pulses))
    r_max = max(rates)
    if r_max > 0:
        caps.append(2.0 * math.pi / (50.0 * r_max))
    if config.noise.kind == "ou":
        caps.append(config.noise.tau_c / 100.0)
    return min(caps) if caps else config.span


def make_plan(config: SystemConfig) -> PropagationPlan:
    """Tile [0, span] into constant-envelope segments with sample marks."""
    h_lim = _step_limit(config)

    def n_sub(duration: float) -> int:
        return max(1, int(math.ceil(duration / h_lim - 1e-12)))

    if config.sequence is None:
        edges = np.linspace(0.0, config.total_time, config.n_samples + 1)
        segs = tuple(
            PlanSegment(float(a), float(b), None, 0.0, n_sub(b - a), 0, True)
            for a, b in zip(edges[:-1], edges[1:])
        )
        samples = (0.0,) + tuple(float(b) for b in edges[1:])
        return PropagationPlan(float(config.total_time), segs, samples)

    seq = config.sequence
    T = seq.period
    tol = _EDGE_TOL * T
    offs = [j * T / config.samples_per_period for j in range(1, config.samples_per_period + 1)]
    raw = {0.0, T}
    for s in seq.segments():
        raw.update((s.t0, s.t1))
    raw.update(offs)
    edges: list[float] = []
    for e in sorted(raw):
        if not edges or e - edges[-1] > tol:
            edges.append(e)
        # coincident edges collapse onto the first representative
    edges[0], edges[-1] = 0.0, T

    plain = seq.segments()

    def envelope_at(mid: float) -> tuple[str | None, float]:
        for s in plain:
            if s.t0 - tol <= mid < s.t1 + tol:
                return s.axis, s.omega
        return None, 0.0  # pragma: no cover - segments cover the period

    template = []
    for a, b in zip(edges[:-1], edges[1:]):
        axis, omega = envelope_at(0.5 * (a + b))
        rec = any(abs(b - o) <= tol for o in offs)
        template.append((a, b, axis, omega, n_sub(b - a), rec))

    # absolute boundaries built once so consecutive segments share the exact
    # same float value (the plan tiles [0, nT] without gaps)
    bounds = [p * T + a for p in range(config.n_periods) for (a, *_rest) in template]
    bounds.append(config.n_periods * T)
    segs = []
    samples = [0.0]
    for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        k = i % len(template)
        _a, _b, axis, omega, ns, rec = template[k]
        segs.append(PlanSegment(lo, hi, axis, omega, ns, k, rec))
        if rec:
            samples.append(hi)
    return PropagationPlan(bounds[-1], tuple(segs), tuple(samples))


def noise_grid(plan: PropagationPlan) -> np.ndarray:
    """Left edges of every sub-step plus the final time (for OU sampling)."""
    ts = []
    for s in plan.segments:
        h = s.duration / s.n_sub
        ts.extend(s.t0 + i * h for i in range(s.n_sub))
    ts.append(plan.span)
    return np.array(ts)


# ---------------------------------------------------------------------------
# Hamiltonian assembly
# ---------------------------------------------------------------------------

_PARTS_CACHE: dict[tuple, tuple] = {}


def _parts(config: SystemConfig):
    """Static pieces: H0 (JC + detuning), per-spin sigma_z/2, drive operators."""
    layout = config.layout
    key = (layout.n_tls, layout.fock_cutoff, config.g, config.delta)
    hit = _PARTS_CACHE.get(key)
    if hit is not None:
        return hit
    ops = build_elementary(layout)
    a, ad = ops["a"], ops["adag"]
    h0 = config.delta * ops["num"].astype(complex)
    for j, gj in enumerate(config.g, start=1):
        h0 = h0 + gj * (ops[f"sp{j}"] @ a + ops[f"sm{j}"] @ ad)
    sz_half = tuple(0.5 * ops[f"sz{j}"] for j in range(1, config.n_tls + 1))
    dim = layout.dim
    dx = np.zeros((dim, dim), dtype=complex)
    dy = np.zeros((dim, dim), dtype=complex)
    for j in range(1, config.n_tls + 1):
        dx += 0.5 * ops[f"sx{j}"]
        dy += 0.5 * ops[f"sy{j}"]
    out = (h0, sz_half, dx, dy, a)
    if len(_PARTS_CACHE) > 16:
        _PARTS_CACHE.clear()
    _PARTS_CACHE[key] = out
    return out


def _segment_h(config: SystemConfig, seg: PlanSegment, xi: np.ndarray) -> np.ndarray:
    h0, sz_half, dx, dy, _a = _parts(config)
    h = h0.copy()
    for j in range(config.n_tls):
        if xi[j] != 0.0:
            h += xi[j] * sz_half[j]
    if seg.axis == "x":
        h += seg.omega * dx
    elif seg.axis == "y":
        h += seg.omega * dy
    return h


def hamiltonian_at(config: SystemConfig, t: float, xi: np.ndarray | None = None) -> Operator:
    """Full Hamiltonian at time t for the given per-spin frequency offsets."""
    if not 0.0 <= t <= config.span * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {config.span}]")
    xi = np.zeros(config.n_tls) if xi is None else np.asarray(xi, dtype=float)
    if xi.shape != (config.n_tls,):
        raise ValueError(f"need {config.n_tls} offsets, got shape {xi.shape}")
    h0, sz_half, dx, dy, _a = _parts(config)
    h = h0.copy()
    for j in range(config.n_tls):
        h += xi[j] * sz_half[j]
    if config.sequence is not None:
        om_x, om_y = config.sequence.envelope(t)
        h += float(om_x[0]) * dx + float(om_y[0]) * dy
    return Operator(h, config.layout, hermitian=True)


def _xi_per_substep(
    config: SystemConfig, trajectory: NoiseTrajectory | None, plan: PropagationPlan
) -> np.ndarray:
    """Per-spin offsets at every sub-step left edge, shape (n_sub_total, n_tls)."""
    grid = noise_grid(plan)
    n_steps = len(grid) - 1
    if trajectory is None or config.n_tls == 0:
        return np.zeros((n_steps, config.n_tls))
    vals = np.asarray(trajectory.values, dtype=float)
    if trajectory.kind != "ou":
        vals = vals.reshape(-1)
        if len(vals) != config.n_tls:
            raise ValueError(f"trajectory holds {len(vals)} spins, config has {config.n_tls}")
        return np.tile(vals, (n_steps, 1))
    if vals.shape[0] != config.n_tls:
        raise ValueError(f"trajectory holds {vals.shape[0]} spins, config has {config.n_tls}")
    tgrid = np.asarray(trajectory.grid, dtype=float)
    if len(tgrid) == len(grid) and np.allclose(tgrid, grid, atol=1e-12 * max(plan.span, 1.0)):
        return vals[:, :-1].T.copy()
    # trajectory on a foreign grid: hold the most recent sample
    idx = np.clip(np.searchsorted(tgrid, grid[:-1] + 1e-15, side="right") - 1, 0, len(tgrid) - 1)
    return vals[:, idx].T.copy()


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

@dataclass
class StateSeries:
    """States recorded at the plan's sample times."""

    times: np.ndarray
    states: np.ndarray  # (n_t, dim) kets or (n_t, dim, dim) density matrices
    kind: str
    layout: HilbertLayout

    def nearest(self, t: float) -> np.ndarray:
        """State at the sample time closest to t."""
        return self.states[int(np.argmin(np.abs(self.times - t)))]

    def expect(self, obs: Observable | str) -> np.ndarray:
        if isinstance(obs, str):
            obs = observable(obs)
        return np.array([evaluate(obs, s, self.layout) for s in self.states])


def _static_offsets(config, trajectory) -> np.ndarray | None:
    """Constant per-spin offsets, or None when the trajectory varies in time."""
    if trajectory is None or config.n_tls == 0:
        return np.zeros(config.n_tls)
    if trajectory.kind == "ou":
        return None
    vals = np.asarray(trajectory.values, dtype=float).reshape(-1)
    if len(vals) != config.n_tls:
        raise ValueError(f"trajectory holds {len(vals)} spins, config has {config.n_tls}")
    return vals


def propagate_unitary(
    config: SystemConfig,
    trajectory: NoiseTrajectory | None = None,
    plan: PropagationPlan | None = None,
) -> StateSeries:
    """Closed-system piecewise propagation (kappa must be zero).

    The envelope is constant on every plan segment, so for static offsets each
    segment is a single exact matrix exponential; time-dependent (OU) offsets
    are held constant across each sub-step.
    """
    if config.kappa != 0.0:
        raise ValueError("unitary propagation requires kappa = 0; use propagate_lindblad")
    if plan is None:
        plan = make_plan(config)
    layout = config.layout
    psi = initial_ket(layout, config.initial)
    xi_static = _static_offsets(config, trajectory)
    xi_steps = None if xi_static is not None else _xi_per_substep(config, trajectory, plan)

    times = [0.0]
    states = [psi.copy()]
    cache: dict[int, np.ndarray] = {}
    pos = 0
    for seg in plan.segments:
        if xi_static is not None:
            u = cache.get(seg.template)
            if u is None:
                u = expm_hermitian(_segment_h(config, seg, xi_static), seg.duration)
                cache[seg.template] = u
            psi = u @ psi
            pos += seg.n_sub
        else:
            h_sub = seg.duration / seg.n_sub
            for _ in range(seg.n_sub):
                u = expm_hermitian(_segment_h(config, seg, xi_steps[pos]), h_sub)
                psi = u @ psi
                pos += 1
        if seg.record:
            nrm = float(np.linalg.norm(psi))
            if abs(nrm - 1.0) > NORM_TOL:
                raise RuntimeError(f"norm drifted to {nrm} at t={seg.t1}")
            check_truncation(psi, layout, LEAKAGE_TOL)
            times.append(seg.t1)
            states.append(psi.copy())
    return StateSeries(np.array(times), np.array(states), "ket", layout)


def propagate_lindblad(
    config: SystemConfig,
    trajectory: NoiseTrajectory | None = None,
    plan: PropagationPlan | None = None,
) -> StateSeries:
    """Master-equation propagation with cavity decay at rate kappa.

    Density matrices are vectorized row-major and pushed through superoperator
    exponentials; kappa = 0 reduces to the unitary branch.
    """
    if plan is None:
        plan = make_plan(config)
    layout = config.layout
    _h0, _sz, _dx, _dy, a_op = _parts(config)
    collapse = [(config.kappa, a_op)] if config.kappa > 0 else []
    psi = initial_ket(layout, config.initial)
    rho = np.outer(psi, psi.conj())
    vec = rho.reshape(-1)
    xi_static = _static_offsets(config, trajectory)
    xi_steps = None if xi_static is not None else _xi_per_substep(config, trajectory, plan)

    times = [0.0]
    states = [rho.copy()]
    cache: dict[int, np.ndarray] = {}
    pos = 0
    for seg in plan.segments:
        if xi_static is not None:
            prop = cache.get(seg.template)
            if prop is None:
                gen = liouvillian(_segment_h(config, seg, xi_static), collapse)
                prop = expm_superop(gen, seg.duration)
                cache[seg.template] = prop
            vec = prop @ vec
            pos += seg.n_sub
        else:
            h_sub = seg.duration / seg.n_sub
            for _ in range(seg.n_sub):
                gen = liouvillian(_segment_h(config, seg, xi_steps[pos]), collapse)
                vec = expm_superop(gen, h_sub) @ vec
                pos += 1
        if seg.record:
            rho = vec.reshape(layout.dim, layout.dim)
            tr = complex(np.trace(rho))
            if abs(tr - 1.0) > TRACE_TOL:
                raise RuntimeError(f"trace drifted to {tr} at t={seg.t1}")
            floor = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
            if floor < POSITIVITY_FLOOR:
                raise RuntimeError(f"negative population {floor:.3e} at t={seg.t1}")
            check_truncation(rho, layout, LEAKAGE_TOL)
            times.append(seg.t1)
            states.append(rho.copy())
    return StateSeries(np.array(times), np.array(states), "dm", layout)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class EnsembleResult:
    """Noise-averaged observables on the sample-time grid."""

    times: np.ndarray
    observables: tuple[str, ...]
    mean: np.ndarray  # (n_obs, n_times)
    std: np.ndarray
    n_traj: int
    seed: int
    config_hash: str

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        i = self.observables.index(name)
        return self.mean[i], self.std[i]

    def iter_rows(self):
        """(time, observable, mean, std) rows in column-key order."""
        for i, name in enumerate(self.observables):
            for k, t in enumerate(self.times):
                yield t, name, self.mean[i, k], self.std[i, k]


def _trajectory_values(args) -> tuple[int, np.ndarray]:
    config, plan, grid, obs, seed, k = args
    traj = sample(config.noise, seed, k, n_spins=config.n_tls, grid=grid)
    if config.kappa > 0:
        series = propagate_lindblad(config, traj, plan)
    else:
        series = propagate_unitary(config, traj, plan)
    vals = np.empty((len(obs), len(series.times)))
    for i, ob in enumerate(obs):
        vals[i] = [evaluate(ob, s, series.layout) for s in series.states]
    return k, vals


def run_ensemble(
    config: SystemConfig,
    n_traj: int,
    observables,
    seed: int = 0,
    threads: int = 1,
) -> EnsembleResult:
    """Average observables over n_traj independent noise realizations.

    Trajectory k draws from stream k, so the result is independent of the
    worker count and of the order in which trajectories finish.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    obs = tuple(observable(o) if isinstance(o, str) else o for o in observables)
    if not obs:
        raise ValueError("need at least one observable")
    plan = make_plan(config)
    grid = noise_grid(plan) if config.noise.kind == "ou" else None

    if config.noise.kind == "none" or config.noise.sigma == 0.0:
        # every trajectory is identical; one propagation carries the ensemble
        _k, vals1 = _trajectory_values((config, plan, grid, obs, seed, 0))
        return EnsembleResult(
            times=np.array(plan.sample_times),
            observables=tuple(o.name for o in obs),
            mean=vals1,
            std=np.zeros_like(vals1),
            n_traj=n_traj,
            seed=seed,
            config_hash=config.config_hash,
        )

    jobs = [(config, plan, grid, obs, seed, k) for k in range(n_traj)]

    n_t = len(plan.sample_times)
    vals = np.empty((n_traj, len(obs), n_t))
    if threads <= 1:
        for job in jobs:
            k, v = _trajectory_values(job)
            vals[k] = v
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for k, v in pool.map(_trajectory_values, jobs, chunksize=max(1, n_traj // (4 * threads))):
                vals[k] = v

    mean = vals.mean(axis=0)
    std = vals.std(axis=0, ddof=1) if n_traj > 1 else np.zeros_like(mean)
    return EnsembleResult(
        times=np.array(plan.sample_times),
        observables=tuple(o.name for o in obs),
        mean=mean,
        std=std,
        n_traj=n_traj,
        seed=seed,
        config_hash=config.config_hash,
    )


# ---------------------------------------------------------------------------
# toggling-frame cross-check
# ---------------------------------------------------------------------------

def _embed_two_level(m2: np.ndarray, j: int, ops: dict) -> np.ndarray:
    """Lift a 2x2 spin-j operator into the full space via the elementary set."""
    lift = (
        m2[1, 0] * ops[f"sp{j}"]
        + m2[0, 1] * ops[f"sm{j}"]
        + 0.5 * (m2[1, 1] - m2[0, 0]) * ops[f"sz{j}"]
    )
    return lift + 0.5 * (m2[0, 0] + m2[1, 1]) * ops["id"]


_SP2 = np.array([[0, 0], [1, 0]], dtype=complex)
_SZ2 = np.diag([-1.0, 1.0]).astype(complex)


def toggling_check(
    config: SystemConfig,
    trajectory: NoiseTrajectory | None = None,
    oversample: int = 64,
) -> float:
    """Max deviation between the full propagation and the rotating-frame one.

    The frame side integrates the exactly conjugated Hamiltonian
    U_pi^dag (H - H_drive - Delta a^dag a) U_pi with a midpoint rule and maps
    back through U_pi(t) e^{-i Delta t a^dag a}; deviations are checked at
    period boundaries.  Valid for static offsets.
    """
    if config.sequence is None:
        raise ValueError("toggling check needs a pulse sequence (possibly empty)")
    if config.kappa != 0.0:
        raise ValueError("toggling check is a closed-system diagnostic")
    if trajectory is not None and trajectory.kind == "ou":
        raise ValueError("toggling check supports static offsets only")
    cfg = replace(config, samples_per_period=1)
    full = propagate_unitary(cfg, trajectory)

    layout = cfg.layout
    ops = build_elementary(layout)
    a_op, ad_op = ops["a"], ops["adag"]
    xi = _static_offsets(cfg, trajectory)
    fe = FrameEvaluator(cfg.sequence)
    T = cfg.sequence.period
    # the frame integrand only rotates at the pulse Rabi frequency *inside* a
    # pulse; between pulses the conjugating unitary is constant, so the free
    # segments need to resolve the slow scales only
    rates_free = [abs(cfg.delta), cfg.noise.sigma]
    if cfg.g:
        rates_free.append(max(cfg.g) * math.sqrt(max(layout.fock_cutoff - 1, 1)))
    if xi is not None:
        rates_free.append(float(np.max(np.abs(xi))))
    r_free = max(rates_free)

    psi = initial_ket(layout, cfg.initial)
    n_fock = layout.fock_cutoff
    fock_n = np.arange(n_fock)
    dev = 0.0
    u_period = np.eye(2, dtype=complex)
    segs = cfg.sequence.segments()
    for p in range(cfg.n_periods):
        for s in segs:
            r_loc = max(r_free, s.omega) if s.is_pulse else r_free
            h_loc = 2.0 * math.pi / (400.0 * r_loc) if r_loc > 0 else s.width
            n_fine = max(oversample, oversample // 16 * max(1, int(math.ceil(s.width / h_loc))))
            h = s.width / n_fine
            mids = s.t0 + (np.arange(n_fine) + 0.5) * h
            u_mid = fe.unitary(mids)
            for i in range(n_fine):
                u = u_mid[i]
                p_plus = u.conj().T @ _SP2 @ u
                p_z = u.conj().T @ _SZ2 @ u
                t_abs = p * T + mids[i]
                phase = np.exp(-1j * cfg.delta * t_abs)
                h_frame = np.zeros((layout.dim, layout.dim), dtype=complex)
                for j in range(1, cfg.n_tls + 1):
                    up = _embed_two_level(p_plus, j, ops)
                    h_frame += cfg.g[j - 1] * (phase * up @ a_op + np.conj(phase) * up.conj().T @ ad_op)
                    h_frame += 0.5 * xi[j - 1] * _embed_two_level(p_z, j, ops)
                psi = expm_hermitian(h_frame, h) @ psi
        # map back at the period boundary and compare
        u_period = fe.period_U @ u_period
        spin_map = np.eye(1, dtype=complex)
        for _ in range(cfg.n_tls):
            spin_map = np.kron(spin_map, u_period)
        t_abs = (p + 1) * T
        cav_phase = np.exp(-1j * cfg.delta * t_abs * fock_n)
        mapped = (spin_map @ psi.reshape(layout.spin_dim, n_fock)) * cav_phase[None, :]
        dev = max(dev, float(np.linalg.norm(full.states[p + 1] - mapped.reshape(-1))))
    return dev
