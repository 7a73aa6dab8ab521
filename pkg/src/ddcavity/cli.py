"""Non-interactive batch runner: JSON configs in, CSV + JSON sidecars out.

Subcommands
-----------
coeffs     engineered coupling coefficients per harmonic or over a detuning grid
oracle     closed-form predictions evaluated from a JSON input file
transfer   single-TLS state-transfer ensembles
entangle   two-TLS gate/interaction ensembles
decay      pulse-averaged cavity-decay rates over a detuning grid
sweep      one-parameter ensemble sweeps (final-time observables per point)
reproduce  canned figure recipes (packaged JSON data) at full or --fast scale

Exit codes: 0 success, 2 config error, 3 numerical-guard failure.  Re-running
any command with the same config and seed writes byte-identical CSV bodies;
JSON sidecars additionally record wall-clock runtime, which does vary.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import oracles
from .configio import (
    ConfigError,
    deep_merge,
    effective_from_spec,
    experiment_from_spec,
    load_json,
    parse_grid,
    parse_m_range,
    resolve_delta,
    sequence_from_spec,
    sweep_from_spec,
    _check_keys,
    _number,
)
from .dynamics import run_ensemble
from .hilbert import LeakageError, initial_ket
from .metrics import evaluate, observable
from .toggling import (
    closed_form_eta,
    decay_rates,
    expansion_tensors,
    first_order,
    second_order_ruv,
    window_eta,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    """Deterministic shortest round-trip decimal for floats."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("DDCAVITY_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"DDCAVITY_THREADS must be an integer, got {env!r}") from None
    return 1


def _fast_traj(n: int) -> int:
    return max(8, n // 25)


# ---------------------------------------------------------------------------
# ensemble runs (transfer / entangle share the machinery)
# ---------------------------------------------------------------------------

def _run_experiment(exp, out: Path, threads: int, command: str) -> dict:
    t0 = time.perf_counter()
    res = run_ensemble(exp.system, exp.n_traj, exp.observables, seed=exp.seed, threads=threads)
    csv_path = out / f"{exp.label}.csv"
    write_csv(csv_path, ["time", "observable", "mean", "std"], res.iter_rows())
    entry = {
        "label": exp.label,
        "command": command,
        "csv": csv_path.name,
        "csv_sha256": sha256_file(csv_path),
        "config_hash": res.config_hash,
        "n_traj": exp.n_traj,
        "seed": exp.seed,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    write_json(
        out / f"{exp.label}.json",
        entry
        | {
            "system": exp.system.to_dict(),
            "observables": list(exp.observables),
            "threads": threads,
        },
    )
    return entry


def _ensemble_command(args, command: str, default_obs: tuple[str, ...], n_tls: int) -> int:
    spec = load_json(args.config)
    exp = experiment_from_spec(spec, default_obs, label=Path(args.config).stem)
    if exp.system.n_tls != n_tls:
        raise ConfigError(f"{command} expects n_tls={n_tls}, config has {exp.system.n_tls}")
    exp = _apply_overrides(exp, args)
    out = _out_dir(args)
    entry = _run_experiment(exp, out, _threads(args), command)
    print(f"{command}: wrote {out / entry['csv']} ({entry['n_traj']} traj, {entry['runtime_s']} s)")
    return EXIT_OK


def _apply_overrides(exp, args):
    from dataclasses import replace

    if getattr(args, "traj", None):
        exp = replace(exp, n_traj=args.traj)
    if getattr(args, "fast", False):
        exp = replace(exp, n_traj=_fast_traj(exp.n_traj))
    if getattr(args, "seed", None) is not None:
        exp = replace(exp, seed=args.seed)
    return exp


def cmd_transfer(args) -> int:
    return _ensemble_command(args, "transfer", ("transfer_fidelity",), n_tls=1)


def cmd_entangle(args) -> int:
    return _ensemble_command(args, "entangle", ("entanglement_fidelity", "concurrence"), n_tls=2)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _run_sweep(plan, out: Path, threads: int) -> dict:
    t0 = time.perf_counter()
    rows = []
    point_info = []
    for pt in plan.points:
        res = run_ensemble(pt.system, plan.n_traj, plan.observables, seed=plan.seed, threads=threads)
        t_end = res.times[-1]
        for i, name in enumerate(res.observables):
            rows.append((pt.value, t_end, name, res.mean[i, -1], res.std[i, -1]))
        point_info.append({"value": pt.value, "config_hash": res.config_hash})
    column = plan.parameter.split(".")[-1]
    csv_path = out / f"{plan.label}.csv"
    write_csv(csv_path, [column, "time", "observable", "mean", "std"], rows)
    entry = {
        "label": plan.label,
        "command": "sweep",
        "parameter": plan.parameter,
        "csv": csv_path.name,
        "csv_sha256": sha256_file(csv_path),
        "n_traj": plan.n_traj,
        "seed": plan.seed,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    write_json(
        out / f"{plan.label}.json",
        entry | {"points": point_info, "observables": list(plan.observables)},
    )
    return entry


def cmd_sweep(args) -> int:
    spec = load_json(args.config)
    plan = sweep_from_spec(spec, ("transfer_fidelity",), label=Path(args.config).stem)
    plan = _apply_sweep_overrides(plan, args)
    out = _out_dir(args)
    entry = _run_sweep(plan, out, _threads(args))
    print(f"sweep: wrote {out / entry['csv']} ({len(plan.points)} points x {plan.n_traj} traj, {entry['runtime_s']} s)")
    return EXIT_OK


def _apply_sweep_overrides(plan, args):
    from dataclasses import replace

    if getattr(args, "traj", None):
        plan = replace(plan, n_traj=args.traj)
    if getattr(args, "fast", False):
        plan = replace(plan, n_traj=_fast_traj(plan.n_traj))
    if getattr(args, "seed", None) is not None:
        plan = replace(plan, seed=args.seed)
    return plan


# ---------------------------------------------------------------------------
# effective-model stroboscopic curves (solid lines in the benchmark figures)
# ---------------------------------------------------------------------------

def _run_effective(plan, out: Path) -> dict:
    from .toggling import effective_hamiltonian

    t0 = time.perf_counter()
    model = effective_hamiltonian(
        plan.sequence, plan.delta, plan.g, n_tls=plan.n_tls,
        fock_cutoff=plan.fock_cutoff, orders=plan.orders,
    )
    psi0 = initial_ket(model.layout, plan.initial)
    times, states = model.propagate(psi0, plan.n_periods, plan.every)
    obs = [observable(name) for name in plan.observables]
    rows = []
    for ob in obs:
        for t, psi in zip(times, states):
            rows.append((t, ob.name, evaluate(ob, psi, model.layout), 0.0))
    csv_path = out / f"{plan.label}.csv"
    write_csv(csv_path, ["time", "observable", "mean", "std"], rows)
    entry = {
        "label": plan.label,
        "command": "effective",
        "csv": csv_path.name,
        "csv_sha256": sha256_file(csv_path),
        "orders": plan.orders,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    write_json(
        out / f"{plan.label}.json",
        entry
        | {
            "sequence": plan.sequence.to_dict(),
            "delta": plan.delta,
            "g": list(plan.g) if isinstance(plan.g, tuple) else plan.g,
            "initial": plan.initial,
            "n_periods": plan.n_periods,
            "observables": list(plan.observables),
        },
    )
    return entry


# ---------------------------------------------------------------------------
# coeffs
# ---------------------------------------------------------------------------

_COEFFS_KEYS = {
    "label", "family", "sequence", "tau", "period", "t1", "tau_pi", "dtheta",
    "m", "delta_sweep", "tensors", "second_order", "decay", "g",
}


def _coeffs_sequence(spec: dict):
    """Build the sequence from either an explicit spec or family + params."""
    if "sequence" in spec and spec["sequence"] is not None:
        return sequence_from_spec(spec["sequence"]), None
    family = spec.get("family")
    if family is None:
        raise ConfigError("coeffs needs 'family' (with tau/period) or an explicit 'sequence'")
    fam_spec = {"family": family}
    for key in ("tau", "period", "t1", "tau_pi", "dtheta"):
        if spec.get(key) is not None:
            fam_spec[key] = spec[key]
    # default geometry: the couplings depend only on fractions of the period
    if family in ("xxyy", "xy8") and "tau" not in fam_spec:
        fam_spec["tau"] = 0.25 if family == "xxyy" else 0.125
    if family in ("xx", "yy", "gklc") and "period" not in fam_spec:
        fam_spec["period"] = 1.0
    return sequence_from_spec(fam_spec), family


def _run_coeffs(spec: dict, out: Path) -> dict:
    _check_keys(spec, _COEFFS_KEYS, "coeffs")
    label = str(spec.get("label", "coeffs"))
    seq, family = _coeffs_sequence(spec)
    if ("m" in spec) == ("delta_sweep" in spec):
        raise ConfigError("coeffs: give exactly one of 'm' or 'delta_sweep'")
    want_tensors = bool(spec.get("tensors", False))
    want_second = bool(spec.get("second_order", False))
    decay_spec = spec.get("decay")
    g = _number(spec.get("g", 1.0), "coeffs.g")
    kappa = n_harm = None
    if decay_spec is not None:
        _check_keys(decay_spec, {"kappa", "n_harm"}, "coeffs.decay", required={"kappa"})
        kappa = _number(decay_spec["kappa"], "coeffs.decay.kappa")
        n_harm = decay_spec.get("n_harm", 200)

    t0 = time.perf_counter()
    rows = []
    if "m" in spec:
        header = ["m", "delta", "abs_eta_x", "abs_eta_y", "eta", "kind", "closed_form_eta"]
        if want_tensors:
            header += ["O0", "G2z0", "O1", "Gamma1", "G1z1", "G2z1", "G3z1", "O2", "G2z2"]
        if want_second:
            header += ["r_xx", "r_xy", "r_yx", "r_yy"]
        if kappa is not None:
            header += ["gamma_e", "gamma_g", "branch_deviation"]
        for m in parse_m_range(spec["m"], "coeffs.m"):
            delta = 2 * math.pi * m / seq.period
            c = first_order(seq, delta)
            closed = ""
            if family is not None:
                try:
                    closed = closed_form_eta(family, m).eta
                except ValueError:
                    closed = ""
            row = [m, delta, abs(c.eta_x), abs(c.eta_y), c.eta, c.kind, closed]
            if want_tensors:
                tr = expansion_tensors(seq, delta).table_row()
                row += [tr[k] for k in ("O0", "G2z0", "O1", "Gamma1", "G1z1", "G2z1", "G3z1", "O2", "G2z2")]
            if want_second:
                if delta == 0.0:
                    row += ["", "", "", ""]
                else:
                    r = second_order_ruv(seq, delta)
                    row += [r[0, 0], r[0, 1], r[1, 0], r[1, 1]]
            if kappa is not None:
                d = decay_rates(seq, delta, kappa, g=g, n_harm=n_harm)
                row += [d.gamma_e, d.gamma_g, d.branch_deviation]
            rows.append(row)
    else:
        grid = parse_grid(spec["delta_sweep"], seq.period, "coeffs.delta_sweep")
        header = ["delta", "abs_eta_x", "abs_eta_y"]
        if want_second:
            header += ["r_xx", "r_xy", "r_yx", "r_yy"]
        if kappa is not None:
            header += ["gamma_e", "gamma_g", "branch_deviation"]
        for delta in grid:
            ex, ey = window_eta(seq, float(delta))
            row = [float(delta), abs(ex), abs(ey)]
            if want_second:
                if delta == 0.0:
                    row += ["", "", "", ""]
                else:
                    r = second_order_ruv(seq, float(delta))
                    row += [r[0, 0], r[0, 1], r[1, 0], r[1, 1]]
            if kappa is not None:
                d = decay_rates(seq, float(delta), kappa, g=g, n_harm=n_harm)
                row += [d.gamma_e, d.gamma_g, d.branch_deviation]
            rows.append(row)

    csv_path = out / f"{label}.csv"
    write_csv(csv_path, header, rows)
    entry = {
        "label": label,
        "command": "coeffs",
        "csv": csv_path.name,
        "csv_sha256": sha256_file(csv_path),
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    write_json(out / f"{label}.json", entry | {"sequence": seq.to_dict(), "spec": spec})
    return entry


def cmd_coeffs(args) -> int:
    spec = load_json(args.config) if args.config else {}
    for key in ("family", "m", "label"):
        v = getattr(args, key, None)
        if v is not None:
            spec[key] = v
    for key, attr in (("tau", "tau"), ("period", "period"), ("t1", "t1"), ("tau_pi", "tau_pi"), ("g", "g")):
        v = getattr(args, attr, None)
        if v is not None:
            spec[key] = v
    if args.delta_sweep:
        parts = args.delta_sweep.split(":")
        if len(parts) != 3:
            raise ConfigError("--delta-sweep wants START:STOP:N (bounds may end in '/T')")
        try:
            n = int(parts[2])
        except ValueError:
            raise ConfigError(f"--delta-sweep: bad point count {parts[2]!r}") from None
        spec["delta_sweep"] = {"start": parts[0], "stop": parts[1], "n": n}
    if args.tensors:
        spec["tensors"] = True
    if args.second_order:
        spec["second_order"] = True
    if args.decay_kappa is not None:
        spec["decay"] = {"kappa": args.decay_kappa}
    out = _out_dir(args)
    entry = _run_coeffs(spec, out)
    print(f"coeffs: wrote {out / entry['csv']} ({entry['runtime_s']} s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def _cooperativity_summary(g: float, sigma: float, kappa: float, n_pi: int, delta: float | None = None) -> dict:
    model = oracles.CooperativityModel(g=g, sigma=sigma, kappa=kappa, n_pi=n_pi)
    out = {
        "cooperativity": model.cooperativity,
        "t2_star": model.t2_star,
        "delta_opt_free": model.delta_opt_free,
        "fidelity_max_free": model.fidelity_max_free,
        "gate_error_free": 1.0 - model.fidelity_max_free,
        "delta_opt_dd": model.delta_opt_dd,
        "fidelity_max_dd": model.fidelity_max_dd,
        "gate_error_dd": 1.0 - model.fidelity_max_dd,
    }
    if delta is not None:
        out |= {
            "delta": delta,
            "gate_time": model.gate_time(delta),
            "gamma0": model.gamma0(delta),
            "fidelity_free": model.fidelity_free(delta),
            "fidelity_dd": model.fidelity_dd(delta),
        }
    return out


def _named(fn, names):
    def call(**params):
        return fn(**params)

    call.required = frozenset(names[0])
    call.optional = frozenset(names[1])
    return call


_ORACLES = {
    "static_shift_fidelity": _named(
        lambda **p: oracles.static_shift_fidelity(**p)._asdict(), ({"g0"}, {"xi", "eps"})
    ),
    "bare_transfer_error": _named(oracles.bare_transfer_error, ({"sigma", "g"}, set())),
    "xy8_transfer_error": _named(oracles.xy8_transfer_error, ({"sigma", "g", "tau"}, set())),
    "xxyy_transfer_error": _named(
        oracles.xxyy_transfer_error, ({"sigma", "g", "tau"}, {"eta", "gamma_pw"})
    ),
    "pulse_spacing_error": _named(oracles.pulse_spacing_error, ({"g", "period", "g2z", "eta"}, set())),
    "delta_j_correction": _named(oracles.delta_j_correction, ({"j", "period", "xi1", "xi2"}, set())),
    "entanglement_error": _named(oracles.entanglement_error, ({"sigma", "tau"}, set())),
    "cooperativity": _named(_cooperativity_summary, ({"g", "sigma", "kappa", "n_pi"}, {"delta"})),
}


def run_oracle_spec(spec: dict) -> dict:
    """Evaluate the whitelisted closed forms named in an oracle config."""
    _check_keys(spec, {"label", "evaluations"}, "oracle", required={"evaluations"})
    evals = spec["evaluations"]
    if not isinstance(evals, list) or not evals:
        raise ConfigError("oracle.evaluations: expected a nonempty list")
    results = []
    for i, ev in enumerate(evals):
        where = f"oracle.evaluations[{i}]"
        _check_keys(ev, {"name", "params", "sweep"}, where, required={"name"})
        name = ev["name"]
        if name not in _ORACLES:
            raise ConfigError(f"{where}: unknown oracle {name!r} (one of {sorted(_ORACLES)})")
        fn = _ORACLES[name]
        params = dict(ev.get("params", {}))
        allowed = fn.required | fn.optional
        sweep = ev.get("sweep")
        sweep_param = None
        values = [None]
        if sweep is not None:
            _check_keys(sweep, {"parameter", "values"}, f"{where}.sweep", required={"parameter", "values"})
            sweep_param = sweep["parameter"]
            if sweep_param not in allowed:
                raise ConfigError(f"{where}.sweep: {sweep_param!r} is not a parameter of {name}")
            values = sweep["values"]
            if not isinstance(values, list) or not values:
                raise ConfigError(f"{where}.sweep.values: expected a nonempty list")
        bad = set(params) - allowed
        if bad:
            raise ConfigError(f"{where}.params: unknown {sorted(bad)} (allowed: {sorted(allowed)})")
        missing = fn.required - set(params) - ({sweep_param} if sweep_param else set())
        if missing:
            raise ConfigError(f"{where}.params: missing {sorted(missing)}")
        points = []
        for v in values:
            p = dict(params)
            if sweep_param is not None:
                p[sweep_param] = v
            try:
                res = fn(**p)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{where}: {exc}") from None
            points.append(res if isinstance(res, dict) else {"value": res})
        results.append(
            {"name": name, "params": params}
            | ({"sweep": sweep, "results": points} if sweep is not None else {"result": points[0]})
        )
    return {"label": str(spec.get("label", "oracle")), "evaluations": results}


def cmd_oracle(args) -> int:
    if not args.config:
        raise ConfigError("oracle needs --config")
    payload = run_oracle_spec(load_json(args.config))
    out = _out_dir(args)
    path = out / f"{payload['label']}.json"
    write_json(path, payload)
    print(f"oracle: wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# decay
# ---------------------------------------------------------------------------

_DECAY_KEYS = {"label", "sequence", "family", "tau", "period", "t1", "tau_pi", "dtheta", "g", "kappa", "deltas", "n_harm"}


def _run_decay(spec: dict, out: Path) -> dict:
    _check_keys(spec, _DECAY_KEYS, "decay", required={"kappa", "deltas"})
    label = str(spec.get("label", "decay"))
    seq, _ = _coeffs_sequence(spec)
    g = _number(spec.get("g", 1.0), "decay.g")
    kappa = _number(spec["kappa"], "decay.kappa")
    n_harm = spec.get("n_harm", 200)
    if not isinstance(n_harm, int) or isinstance(n_harm, bool) or n_harm < 1:
        raise ConfigError("decay.n_harm: expected a positive integer")
    grid = parse_grid(spec["deltas"], seq.period, "decay.deltas")
    t0 = time.perf_counter()
    rows = []
    for delta in grid:
        d = decay_rates(seq, float(delta), kappa, g=g, n_harm=n_harm)
        rows.append((float(delta), d.gamma_e, d.gamma_g, d.branch_deviation, d.n_harm_used))
    csv_path = out / f"{label}.csv"
    write_csv(csv_path, ["delta", "gamma_e", "gamma_g", "branch_deviation", "n_harm_used"], rows)
    entry = {
        "label": label,
        "command": "decay",
        "csv": csv_path.name,
        "csv_sha256": sha256_file(csv_path),
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    write_json(out / f"{label}.json", entry | {"sequence": seq.to_dict(), "g": g, "kappa": kappa})
    return entry


def cmd_decay(args) -> int:
    if not args.config:
        raise ConfigError("decay needs --config")
    out = _out_dir(args)
    entry = _run_decay(load_json(args.config), out)
    print(f"decay: wrote {out / entry['csv']} ({entry['runtime_s']} s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------

def recipe_ids() -> list[str]:
    root = resources.files("ddcavity").joinpath("recipes")
    if not root.is_dir():
        return []
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_recipe(figure: str) -> dict:
    ids = recipe_ids()
    if figure not in ids:
        raise ConfigError(f"unknown figure id {figure!r}; valid ids: {', '.join(ids)}")
    text = resources.files("ddcavity").joinpath("recipes", f"{figure}.json").read_text()
    return json.loads(text)


def _apply_fast(recipe: dict) -> dict:
    """Shrink a recipe per its own 'fast' block (trajectories, runs, points)."""
    fast = recipe.get("fast")
    if fast is None:
        return recipe
    _check_keys(fast, {"n_traj", "drop_runs", "runs", "keep_points"}, "recipe.fast")
    runs = [dict(r) for r in recipe["runs"]]
    drop = set(fast.get("drop_runs", []))
    runs = [r for r in runs if r.get("label") not in drop]
    patches = fast.get("runs", {})
    runs = [deep_merge(r, patches[r["label"]]) if r.get("label") in patches else r for r in runs]
    cap = fast.get("n_traj")
    keep_points = fast.get("keep_points", {})
    for r in runs:
        if cap is not None and "n_traj" in r:
            r["n_traj"] = min(r["n_traj"], cap)
        keep = keep_points.get(r.get("label"))
        if keep is not None:
            sw = dict(r.get("sweep", {}))
            for key in ("values", "points"):
                if key in sw:
                    seqd = sw[key]
                    sw[key] = [seqd[i] for i in keep if 0 <= i < len(seqd)]
            r["sweep"] = sw
    out = dict(recipe)
    out["runs"] = runs
    summaries = recipe.get("summaries")
    if summaries is not None:
        kept = {r.get("label") for r in runs}
        pruned = []
        for s in summaries:
            s = dict(s)
            s["runs"] = [lbl for lbl in s.get("runs", []) if lbl in kept]
            if s["runs"]:
                pruned.append(s)
        out["summaries"] = pruned
    return out


def _dispatch_run(run: dict, out: Path, args) -> dict:
    run = dict(run)
    command = run.pop("command", None)
    if command in ("transfer", "entangle"):
        exp = experiment_from_spec(
            run,
            ("transfer_fidelity",) if command == "transfer" else ("entanglement_fidelity", "concurrence"),
            label=run.get("label", command),
        )
        exp = _apply_overrides(exp, args)
        return _run_experiment(exp, out, _threads(args), command)
    if command == "sweep":
        plan = sweep_from_spec(run, ("transfer_fidelity",), label=run.get("label", "sweep"))
        plan = _apply_sweep_overrides(plan, args)
        return _run_sweep(plan, out, _threads(args))
    if command == "effective":
        return _run_effective(effective_from_spec(run, label=run.get("label", "effective")), out)
    if command == "coeffs":
        return _run_coeffs(run, out)
    if command == "decay":
        return _run_decay(run, out)
    if command == "oracle":
        payload = run_oracle_spec(run)
        path = out / f"{payload['label']}.json"
        write_json(path, payload)
        return {"label": payload["label"], "command": "oracle", "json": path.name}
    raise ConfigError(f"recipe run has unknown command {command!r}")


def _summarize(summary: dict, entries: dict[str, dict], out: Path) -> dict:
    """Post-process sweep runs into a compact scaling CSV (no new physics:
    just argmin/averages over data already written)."""
    _check_keys(summary, {"kind", "runs", "observable", "out", "tags"}, "recipe.summaries",
                required={"kind", "runs", "out"})
    if summary["kind"] != "min_error":
        raise ConfigError(f"unknown summary kind {summary['kind']!r}")
    obs_name = summary.get("observable", "entanglement_fidelity")
    tag_keys: list[str] | None = None
    rows = []
    for label in summary["runs"]:
        if label not in entries:
            raise ConfigError(f"summary references unknown run {label!r}")
        entry = entries[label]
        tags = entry.get("tags", {})
        if tag_keys is None:
            tag_keys = sorted(tags)
        elif sorted(tags) != tag_keys:
            raise ConfigError("summary runs carry inconsistent tags")
        with open(out / entry["csv"], newline="") as fh:
            rd = csv.DictReader(fh)
            pts = [r for r in rd if r["observable"] == obs_name]
        if not pts:
            raise ConfigError(f"run {label!r} has no rows for observable {obs_name!r}")
        key = rd.fieldnames[0]
        errs = np.array([1.0 - float(r["mean"]) for r in pts])
        i = int(np.argmin(errs))
        rows.append(
            [tags[k] for k in tag_keys]
            + [float(pts[i][key]), errs[i], float(pts[i]["std"])]
        )
    csv_path = out / summary["out"]
    write_csv(csv_path, (tag_keys or []) + ["at_value", "min_error", "std"], rows)
    return {
        "kind": "min_error",
        "csv": csv_path.name,
        "csv_sha256": sha256_file(csv_path),
        "observable": obs_name,
        "runs": list(summary["runs"]),
    }


def cmd_reproduce(args) -> int:
    recipe = load_recipe(args.figure)
    _check_keys(recipe, {"figure", "title", "runs", "fast", "summaries"}, "recipe", required={"figure", "runs"})
    if args.fast:
        recipe = _apply_fast(recipe)
    out = Path(args.out) / args.figure
    out.mkdir(parents=True, exist_ok=True)
    labels = [r.get("label") for r in recipe["runs"]]
    if len(set(labels)) != len(labels) or None in labels:
        raise ConfigError("recipe runs need unique labels")
    t0 = time.perf_counter()
    entries: dict[str, dict] = {}
    for run in recipe["runs"]:
        tags = run.pop("tags", None)
        entry = _dispatch_run(run, out, args)
        if tags is not None:
            entry["tags"] = tags
        entries[entry["label"]] = entry
        print(f"  {entry['label']}: done ({entry.get('runtime_s', 0)} s)")
    summaries = [_summarize(s, entries, out) for s in recipe.get("summaries", [])]
    manifest = {
        "figure": args.figure,
        "title": recipe.get("title", ""),
        "fast": bool(args.fast),
        "runs": [entries[lbl] for lbl in entries],
        "summaries": summaries,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    write_json(out / "manifest.json", manifest)
    print(f"reproduce {args.figure}: {len(entries)} runs -> {out}/manifest.json")
    return EXIT_OK


def cmd_list_figures(args) -> int:
    for fid in recipe_ids():
        print(fid)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddcavity", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--traj", type=int, default=None, help="override the trajectory count")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--fast", action="store_true", help="reduced-scale run")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: DDCAVITY_THREADS or 1)")

    p = sub.add_parser("coeffs", help="engineered coupling coefficients")
    common(p)
    p.add_argument("--family", choices=["xxyy", "xy8", "xx", "yy", "gklc"])
    p.add_argument("--m", help="harmonic index or range, e.g. 2 or 0..5")
    p.add_argument("--delta-sweep", help="detuning grid START:STOP:N; bounds may end in '/T'")
    p.add_argument("--tau", type=float, help="interpulse spacing (xxyy/xy8)")
    p.add_argument("--period", type=float, help="sequence period (xx/yy/gklc)")
    p.add_argument("--t1", type=float, help="first pulse time")
    p.add_argument("--tau-pi", dest="tau_pi", type=float, help="pulse width")
    p.add_argument("--g", type=float, help="coupling used for decay columns")
    p.add_argument("--tensors", action="store_true", help="add expansion-tensor summary columns")
    p.add_argument("--second-order", action="store_true", help="add exchange-coefficient columns")
    p.add_argument("--decay-kappa", type=float, default=None, help="add decay-rate columns at this kappa")
    p.add_argument("--label", help="output file stem")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("oracle", help="closed-form predictions from a JSON input")
    common(p, config_required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("transfer", help="single-TLS state-transfer ensemble")
    common(p, config_required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("entangle", help="two-TLS interaction ensemble")
    common(p, config_required=True)
    p.set_defaults(func=cmd_entangle)

    p = sub.add_parser("decay", help="pulse-averaged decay rates over a detuning grid")
    common(p, config_required=True)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("sweep", help="one-parameter ensemble sweep")
    common(p, config_required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a packaged figure recipe")
    common(p)
    p.add_argument("figure", help="figure id (see 'figures')")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("figures", help="list packaged figure recipe ids")
    p.set_defaults(func=cmd_list_figures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LeakageError, RuntimeError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
