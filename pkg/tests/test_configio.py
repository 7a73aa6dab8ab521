"""Config parsing: grids, sequences, experiments, and fail-closed checks."""

import numpy as np
import pytest

from ddcavity.configio import (
    ConfigError,
    deep_merge,
    effective_from_spec,
    experiment_from_spec,
    parse_bound,
    parse_grid,
    parse_m_range,
    resolve_delta,
    sequence_from_spec,
    sweep_from_spec,
    system_from_spec,
)


def test_deep_merge_nested():
    base = {"a": {"x": 1, "y": 2}, "b": [1, 2], "c": 3}
    patch = {"a": {"y": 5, "z": 6}, "b": [9]}
    out = deep_merge(base, patch)
    assert out == {"a": {"x": 1, "y": 5, "z": 6}, "b": [9], "c": 3}
    # base is untouched
    assert base["a"] == {"x": 1, "y": 2}


def test_parse_bound_period_units():
    assert parse_bound(3.5, 0.2, "w") == 3.5
    assert parse_bound("15/T", 0.2, "w") == pytest.approx(75.0)
    with pytest.raises(ConfigError):
        parse_bound("abc", 0.2, "w")


def test_parse_m_range_forms():
    assert parse_m_range(4, "w") == [4]
    assert parse_m_range("0..5", "w") == [0, 1, 2, 3, 4, 5]
    assert parse_m_range([2, 4, 8], "w") == [2, 4, 8]
    with pytest.raises(ConfigError):
        parse_m_range("5..2", "w")
    with pytest.raises(ConfigError):
        parse_m_range([], "w")


def test_parse_grid_forms():
    g = parse_grid({"start": 0, "stop": "4/T", "n": 5}, 2.0, "w")
    assert np.allclose(g, np.linspace(0, 2, 5))
    lst = parse_grid([1, "1/T"], 2.0, "w")
    assert np.allclose(lst, [1.0, 0.5])
    with pytest.raises(ConfigError):
        parse_grid([], 2.0, "w")
    with pytest.raises(ConfigError):
        parse_grid({"start": 0, "stop": 1}, 2.0, "w")


def test_sequence_from_spec_family_and_null():
    seq = sequence_from_spec({"family": "xy8", "tau": 0.1, "tau_pi": 0.001, "t1": 0.05})
    assert seq.label == "xy8"
    assert seq.period == pytest.approx(0.8)
    assert sequence_from_spec(None) is None
    with pytest.raises(ConfigError):
        sequence_from_spec({"family": "xy8", "tau": 0.1, "bogus": 1})


def test_resolve_delta_harmonic_form():
    seq = sequence_from_spec({"family": "xx", "period": 0.2, "tau_pi": 0.001, "t1": 0.1})
    assert resolve_delta(7.5, seq, "w") == 7.5
    d = resolve_delta({"m": 3, "delta_eff": -2.16}, seq, "w")
    assert d == pytest.approx(2 * np.pi * 3 / 0.2 - 2.16)
    with pytest.raises(ConfigError):
        resolve_delta({"m": 3}, None, "w")


def test_system_from_spec_fail_closed():
    good = {
        "sequence": None,
        "g": 1.0,
        "delta": 0.0,
        "fock_cutoff": 3,
        "total_time": 1.0,
        "n_samples": 4,
        "initial": "e0",
        "noise": {"kind": "static", "sigma": 0.2},
    }
    cfg = system_from_spec(good)
    assert cfg.fock_cutoff == 3
    with pytest.raises(ConfigError):
        system_from_spec(good | {"typo_key": 1})
    with pytest.raises(ConfigError):
        system_from_spec(good | {"noise": {"kind": "static", "sigma": 0.2, "tau": 1}})


def test_system_from_spec_requires_time_axis():
    base = {
        "sequence": None,
        "g": 1.0,
        "fock_cutoff": 3,
        "initial": "e0",
        "noise": {"kind": "none"},
    }
    with pytest.raises(ConfigError):
        system_from_spec(base)  # free evolution without total_time


def test_experiment_from_spec_defaults():
    spec = {
        "label": "probe",
        "system": {
            "sequence": None,
            "g": 1.0,
            "delta": 0.0,
            "fock_cutoff": 3,
            "total_time": 0.5,
            "n_samples": 2,
            "initial": "e0",
            "noise": {"kind": "none"},
        },
        "n_traj": 3,
        "seed": 7,
    }
    exp = experiment_from_spec(spec)
    assert exp.label == "probe"
    assert exp.n_traj == 3
    assert exp.observables == ("transfer_fidelity",)
    with pytest.raises(ConfigError):
        experiment_from_spec(spec | {"unknown": True})


def test_sweep_from_spec_values_and_points():
    system = {
        "sequence": None,
        "g": 1.0,
        "delta": 0.0,
        "fock_cutoff": 3,
        "total_time": 0.5,
        "n_samples": 2,
        "initial": "e0",
        "noise": {"kind": "static", "sigma": 0.1},
    }
    plan = sweep_from_spec(
        {
            "label": "s",
            "system": system,
            "n_traj": 2,
            "seed": 1,
            "sweep": {"parameter": "noise.sigma", "values": [0.1, 0.2]},
        },
        ("transfer_fidelity",),
        "s",
    )
    assert [p.value for p in plan.points] == [0.1, 0.2]
    assert plan.points[1].system.noise.sigma == 0.2
    plan2 = sweep_from_spec(
        {
            "label": "s2",
            "system": system,
            "n_traj": 2,
            "seed": 1,
            "sweep": {
                "parameter": "delta",
                "points": [
                    {"value": 5.0, "system": {"delta": 5.0}},
                    {"value": 9.0, "system": {"delta": 9.0, "total_time": 0.25}},
                ],
            },
        },
        ("transfer_fidelity",),
        "s2",
    )
    assert plan2.points[1].system.delta == 9.0
    assert plan2.points[1].system.total_time == 0.25
    with pytest.raises(ConfigError):
        sweep_from_spec(
            {
                "label": "bad",
                "system": system,
                "n_traj": 2,
                "seed": 1,
                "sweep": {"parameter": "noise.sigma"},
            },
            ("transfer_fidelity",),
            "bad",
        )


def test_effective_from_spec_checks_orders():
    spec = {
        "sequence": {"family": "xx", "period": 0.2, "tau_pi": 0.001, "t1": 0.1},
        "delta": {"m": 2, "delta_eff": 0.0},
        "n_tls": 2,
        "n_periods": 10,
        "orders": "first+second",
        "initial": "eg0",
    }
    plan = effective_from_spec(spec)
    assert plan.n_periods == 10
    with pytest.raises(ConfigError):
        effective_from_spec(spec | {"orders": "third"})
    with pytest.raises(ConfigError):
        effective_from_spec(spec | {"sequence": None})
