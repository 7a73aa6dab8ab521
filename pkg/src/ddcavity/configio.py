"""Declarative experiment configs (JSON) -> validated runtime objects.

Every dict is consumed against an explicit key whitelist, so a typo in a
config file fails loudly instead of silently running the wrong experiment.
All schema problems raise :class:`ConfigError`; the CLI maps that to exit
code 2, keeping it distinct from numerical-guard failures (exit 3).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import SystemConfig, delta_from_resonance
from .metrics import observable
from .noise import NoiseModel
from .pulses import PulseSequence, build


class ConfigError(ValueError):
    """A config file (or recipe) failed validation."""


def _check_keys(d: dict, allowed: set[str], where: str, required: set[str] = frozenset()) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)} (allowed: {sorted(allowed)})")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{where}: missing required keys {sorted(missing)}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def load_json(path: str | Path) -> dict:
    p = Path(path)
    try:
        payload = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return payload


def deep_merge(base, patch):
    """Recursive dict merge; lists and scalars in ``patch`` replace."""
    if isinstance(base, dict) and isinstance(patch, dict):
        out = dict(base)
        for k, v in patch.items():
            out[k] = deep_merge(base[k], v) if k in base else v
        return out
    return patch


# ---------------------------------------------------------------------------
# small grammar helpers shared by flags and recipe files
# ---------------------------------------------------------------------------

def parse_bound(text, period: float, where: str) -> float:
    """A sweep bound: a number, or '<number>/T' in units of the period."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    if isinstance(text, str):
        s = text.strip()
        scale = 1.0
        if s.endswith("/T"):
            if not period > 0:
                raise ConfigError(f"{where}: '/T' bound needs a sequence period")
            scale = 1.0 / period
            s = s[: -len("/T")]
        try:
            return float(s) * scale
        except ValueError:
            pass
    raise ConfigError(f"{where}: bad bound {text!r} (use a number or '<number>/T')")


def parse_m_range(text, where: str) -> list[int]:
    """Harmonic indices: 'A..B', a single integer, or a list of integers."""
    if isinstance(text, int) and not isinstance(text, bool):
        return [text]
    if isinstance(text, list):
        if not text or not all(isinstance(v, int) and not isinstance(v, bool) for v in text):
            raise ConfigError(f"{where}: m list must be nonempty integers")
        return list(text)
    if isinstance(text, str):
        s = text.strip()
        if ".." in s:
            a, _, b = s.partition("..")
            try:
                lo, hi = int(a), int(b)
            except ValueError:
                raise ConfigError(f"{where}: bad m range {text!r}") from None
            if hi < lo:
                raise ConfigError(f"{where}: empty m range {text!r}")
            return list(range(lo, hi + 1))
        try:
            return [int(s)]
        except ValueError:
            pass
    raise ConfigError(f"{where}: bad m spec {text!r} (use 'A..B', an int, or a list)")


def parse_grid(spec, period: float, where: str) -> np.ndarray:
    """A detuning grid: explicit list, or {start, stop, n} with '/T' bounds."""
    if isinstance(spec, list):
        if not spec:
            raise ConfigError(f"{where}: empty grid")
        return np.array([parse_bound(v, period, where) for v in spec], dtype=float)
    _check_keys(spec, {"start", "stop", "n"}, where, required={"start", "stop", "n"})
    n = spec["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"{where}: n must be a positive integer")
    lo = parse_bound(spec["start"], period, where)
    hi = parse_bound(spec["stop"], period, where)
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# sequence / system / experiment specs
# ---------------------------------------------------------------------------

_FAMILY_KEYS = {
    "xxyy": {"tau", "t1", "tau_pi", "dtheta"},
    "xy8": {"tau", "t1", "tau_pi", "dtheta"},
    "xx": {"period", "t1", "tau_pi", "dtheta"},
    "yy": {"period", "t1", "tau_pi", "dtheta"},
    "gklc": {"period", "tau_pi", "dtheta"},
}
_FAMILY_REQUIRED = {"xxyy": {"tau"}, "xy8": {"tau"}, "xx": {"period"}, "yy": {"period"}, "gklc": {"period"}}


def sequence_from_spec(spec, where: str = "sequence") -> PulseSequence | None:
    """Either a family builder spec or an explicit pulse list (or null)."""
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected an object or null")
    if "family" in spec:
        family = spec["family"]
        if family not in _FAMILY_KEYS:
            raise ConfigError(f"{where}: unknown family {family!r} (one of {sorted(_FAMILY_KEYS)})")
        _check_keys(spec, _FAMILY_KEYS[family] | {"family"}, where, required=_FAMILY_REQUIRED[family] | {"family"})
        kwargs = {k: v for k, v in spec.items() if k != "family"}
        for k, v in kwargs.items():
            if k != "dtheta" or np.isscalar(v):
                kwargs[k] = _number(v, f"{where}.{k}")
            else:
                kwargs[k] = [_number(x, f"{where}.{k}[{i}]") for i, x in enumerate(v)]
        try:
            return build(family, **kwargs)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    try:
        return PulseSequence.from_dict(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


_SYSTEM_KEYS = {
    "sequence", "n_tls", "g", "delta", "kappa", "fock_cutoff", "noise",
    "n_periods", "total_time", "initial", "samples_per_period", "n_samples",
}


def _noise_from_spec(spec, where: str) -> NoiseModel:
    if spec is None:
        return NoiseModel("none")
    _check_keys(spec, {"kind", "sigma", "tau_c"}, where, required={"kind"})
    kind = spec["kind"]
    sigma = _number(spec.get("sigma", 0.0), f"{where}.sigma")
    tau_c = spec.get("tau_c")
    if tau_c is not None:
        tau_c = _number(tau_c, f"{where}.tau_c")
    try:
        return NoiseModel(kind, sigma, tau_c)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def resolve_delta(spec, seq: PulseSequence | None, where: str) -> float:
    """A plain number, or {'m': int, 'delta_eff': number} on a sequence grid."""
    if isinstance(spec, dict):
        _check_keys(spec, {"m", "delta_eff"}, where, required={"m"})
        if seq is None:
            raise ConfigError(f"{where}: harmonic form needs a pulse sequence")
        m = spec["m"]
        if not isinstance(m, int) or isinstance(m, bool):
            raise ConfigError(f"{where}.m: expected an integer")
        return delta_from_resonance(m, _number(spec.get("delta_eff", 0.0), f"{where}.delta_eff"), seq.period)
    return _number(spec, where)


def system_from_spec(spec: dict, where: str = "system") -> SystemConfig:
    _check_keys(spec, _SYSTEM_KEYS, where)
    seq = sequence_from_spec(spec.get("sequence"), f"{where}.sequence")
    kwargs: dict = {"sequence": seq}
    if "n_tls" in spec:
        n_tls = spec["n_tls"]
        if not isinstance(n_tls, int) or isinstance(n_tls, bool):
            raise ConfigError(f"{where}.n_tls: expected an integer")
        kwargs["n_tls"] = n_tls
    if "g" in spec:
        g = spec["g"]
        if isinstance(g, list):
            kwargs["g"] = tuple(_number(x, f"{where}.g[{i}]") for i, x in enumerate(g))
        else:
            kwargs["g"] = _number(g, f"{where}.g")
    if "delta" in spec:
        kwargs["delta"] = resolve_delta(spec["delta"], seq, f"{where}.delta")
    for key in ("kappa", "total_time"):
        if key in spec and spec[key] is not None:
            kwargs[key] = _number(spec[key], f"{where}.{key}")
    for key in ("fock_cutoff", "n_periods", "samples_per_period", "n_samples"):
        if key in spec:
            v = spec[key]
            if v is not None and (not isinstance(v, int) or isinstance(v, bool)):
                raise ConfigError(f"{where}.{key}: expected an integer")
            if v is not None:
                kwargs[key] = v
    if "noise" in spec:
        kwargs["noise"] = _noise_from_spec(spec["noise"], f"{where}.noise")
    if "initial" in spec:
        if not isinstance(spec["initial"], (str, dict)):
            raise ConfigError(
                f"{where}.initial: expected a basis label or a spins/photons mapping"
            )
        kwargs["initial"] = spec["initial"]
    try:
        return SystemConfig(**kwargs)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def observables_from_spec(spec, default: tuple[str, ...], where: str) -> tuple[str, ...]:
    if spec is None:
        return default
    if not isinstance(spec, list) or not spec or not all(isinstance(s, str) for s in spec):
        raise ConfigError(f"{where}: expected a nonempty list of observable names")
    for name in spec:
        try:
            observable(name)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return tuple(spec)


@dataclass(frozen=True)
class Experiment:
    """One ensemble run: a system, what to record, and how many draws."""

    label: str
    system: SystemConfig
    observables: tuple[str, ...]
    n_traj: int
    seed: int
    system_spec: dict = field(repr=False, default_factory=dict)


_EXPERIMENT_KEYS = {"label", "system", "observables", "n_traj", "seed"}


def experiment_from_spec(
    spec: dict,
    default_observables: tuple[str, ...] = ("transfer_fidelity",),
    label: str = "run",
    extra_keys: set[str] = frozenset(),
    where: str = "config",
) -> Experiment:
    _check_keys(spec, _EXPERIMENT_KEYS | extra_keys, where, required={"system"})
    system = system_from_spec(spec["system"], f"{where}.system")
    obs = observables_from_spec(spec.get("observables"), default_observables, f"{where}.observables")
    n_traj = spec.get("n_traj", 100)
    if not isinstance(n_traj, int) or isinstance(n_traj, bool) or n_traj < 1:
        raise ConfigError(f"{where}.n_traj: expected a positive integer")
    seed = spec.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"{where}.seed: expected a nonnegative integer")
    return Experiment(
        label=str(spec.get("label", label)),
        system=system,
        observables=obs,
        n_traj=n_traj,
        seed=seed,
        system_spec=spec["system"],
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    value: float
    system: SystemConfig


@dataclass(frozen=True)
class SweepPlan:
    label: str
    parameter: str
    points: tuple[SweepPoint, ...]
    observables: tuple[str, ...]
    n_traj: int
    seed: int


def _set_path(spec: dict, dotted: str, value) -> dict:
    """Return a copy of ``spec`` with the dotted path replaced."""
    head, _, rest = dotted.partition(".")
    out = dict(spec)
    if rest:
        child = out.get(head)
        if not isinstance(child, dict):
            child = {}
        out[head] = _set_path(child, rest, value)
    else:
        out[head] = value
    return out


def sweep_from_spec(spec: dict, default_observables: tuple[str, ...], label: str, where: str = "config") -> SweepPlan:
    _check_keys(spec, _EXPERIMENT_KEYS | {"sweep"}, where, required={"system", "sweep"})
    base = spec["system"]
    _check_keys(base, _SYSTEM_KEYS, f"{where}.system")
    sw = spec["sweep"]
    _check_keys(sw, {"parameter", "values", "points"}, f"{where}.sweep", required={"parameter"})
    parameter = sw["parameter"]
    if not isinstance(parameter, str) or not parameter:
        raise ConfigError(f"{where}.sweep.parameter: expected a name")
    if ("values" in sw) == ("points" in sw):
        raise ConfigError(f"{where}.sweep: give exactly one of 'values' or 'points'")
    points: list[SweepPoint] = []
    if "values" in sw:
        values = sw["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{where}.sweep.values: expected a nonempty list")
        for i, v in enumerate(values):
            val = _number(v, f"{where}.sweep.values[{i}]")
            merged = _set_path(base, parameter, val)
            points.append(SweepPoint(val, system_from_spec(merged, f"{where}.sweep.values[{i}]")))
    else:
        entries = sw["points"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError(f"{where}.sweep.points: expected a nonempty list")
        for i, entry in enumerate(entries):
            pw = f"{where}.sweep.points[{i}]"
            _check_keys(entry, {"value", "system"}, pw, required={"value", "system"})
            merged = deep_merge(base, entry["system"])
            points.append(SweepPoint(_number(entry["value"], f"{pw}.value"), system_from_spec(merged, pw)))
    obs = observables_from_spec(spec.get("observables"), default_observables, f"{where}.observables")
    n_traj = spec.get("n_traj", 100)
    if not isinstance(n_traj, int) or isinstance(n_traj, bool) or n_traj < 1:
        raise ConfigError(f"{where}.n_traj: expected a positive integer")
    seed = spec.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"{where}.seed: expected a nonnegative integer")
    return SweepPlan(
        label=str(spec.get("label", label)),
        parameter=parameter,
        points=tuple(points),
        observables=obs,
        n_traj=n_traj,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# effective-model runs (noiseless closed system by construction)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectivePlan:
    label: str
    sequence: PulseSequence
    delta: float
    g: float | tuple[float, ...]
    n_tls: int
    fock_cutoff: int | None
    orders: str
    initial: str | dict
    n_periods: int
    every: int
    observables: tuple[str, ...]


_EFFECTIVE_KEYS = {
    "label", "sequence", "delta", "g", "n_tls", "fock_cutoff", "orders",
    "initial", "n_periods", "every", "observables",
}


def effective_from_spec(spec: dict, label: str = "effective", where: str = "config") -> EffectivePlan:
    _check_keys(spec, _EFFECTIVE_KEYS, where, required={"sequence", "n_periods"})
    seq = sequence_from_spec(spec["sequence"], f"{where}.sequence")
    if seq is None:
        raise ConfigError(f"{where}.sequence: effective model needs a pulse sequence")
    delta = resolve_delta(spec.get("delta", 0.0), seq, f"{where}.delta")
    g = spec.get("g", 1.0)
    if isinstance(g, list):
        g = tuple(_number(x, f"{where}.g[{i}]") for i, x in enumerate(g))
    else:
        g = _number(g, f"{where}.g")
    n_tls = spec.get("n_tls", 1)
    if not isinstance(n_tls, int) or isinstance(n_tls, bool) or n_tls < 1:
        raise ConfigError(f"{where}.n_tls: expected a positive integer")
    orders = spec.get("orders", "first")
    if orders not in ("first", "first+second"):
        raise ConfigError(f"{where}.orders: expected 'first' or 'first+second'")
    n_periods = spec["n_periods"]
    every = spec.get("every", 1)
    for name, v in (("n_periods", n_periods), ("every", every)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{where}.{name}: expected a positive integer")
    fock = spec.get("fock_cutoff")
    if fock is not None and (not isinstance(fock, int) or isinstance(fock, bool)):
        raise ConfigError(f"{where}.fock_cutoff: expected an integer")
    obs = observables_from_spec(spec.get("observables"), ("transfer_fidelity",), f"{where}.observables")
    initial = spec.get("initial", "e0")
    if not isinstance(initial, (str, dict)):
        raise ConfigError(
            f"{where}.initial: expected a basis label or a spins/photons mapping"
        )
    return EffectivePlan(
        label=str(spec.get("label", label)),
        sequence=seq,
        delta=delta,
        g=g,
        n_tls=n_tls,
        fock_cutoff=fock,
        orders=orders,
        initial=initial,
        n_periods=n_periods,
        every=every,
        observables=obs,
    )
