"""Sequence builders, boundary handling, and segment tilings."""

import math

import numpy as np
import pytest

from ddcavity.pulses import Pulse, PulseSequence, build


def test_xy8_layout():
    seq = build("xy8", tau=0.1, tau_pi=0.01, t1=0.05)
    assert seq.period == pytest.approx(0.8)
    assert len(seq.pulses) == 8
    assert "".join(p.axis for p in seq.pulses) == "xyxyyxyx"
    assert np.allclose(seq.times, 0.05 + 0.1 * np.arange(8))


def test_xx_layout_and_defaults():
    seq = build("xx", period=1.0, tau_pi=0.01)
    assert len(seq.pulses) == 2
    # default first pulse at T/4, partner half a period later
    assert seq.times[1] - seq.times[0] == pytest.approx(0.5)
    assert all(p.angle == pytest.approx(math.pi) for p in seq.pulses)


def test_over_rotation_angles():
    seq = build("yy", period=1.0, tau_pi=0.01, dtheta=0.1)
    assert all(p.angle == pytest.approx(math.pi + 0.1) for p in seq.pulses)
    assert seq.pulses[0].dtheta == pytest.approx(0.1)


def test_boundary_pulse_rigid_shift():
    # nominal centers 0.5 and 1.0; the end pulse would overhang the period,
    # so the whole train shifts back while keeping the spacing intact
    seq = build("xx", period=1.0, t1=0.5, tau_pi=0.1)
    c = seq.times
    assert c[1] - c[0] == pytest.approx(0.5, abs=1e-12)
    assert c[1] + seq.pulses[1].width / 2 == pytest.approx(1.0, abs=1e-12)
    # displaced pulses remember where the ideal flips sit
    assert [p.nominal_time for p in seq.pulses] == pytest.approx([0.5, 1.0])


def test_negative_time_wraps_forward():
    direct = PulseSequence("w", 1.0, (Pulse("x", -0.2, 0.01),))
    assert direct.times[0] == pytest.approx(0.8)


def test_overlapping_supports_rejected():
    with pytest.raises(ValueError, match="overlap"):
        PulseSequence("bad", 1.0, (Pulse("x", 0.5, 0.2), Pulse("y", 0.55, 0.2)))


def test_pulse_validation():
    with pytest.raises(ValueError):
        Pulse("z", 0.5, 0.01)
    with pytest.raises(ValueError):
        Pulse("x", 0.5, 0.0)
    with pytest.raises(ValueError):
        Pulse("x", 0.5, 0.01, angle=0.0)


def test_segments_tile_period_exactly():
    seq = build("xy8", tau=0.1, tau_pi=0.02, t1=0.05)
    segs = seq.segments()
    assert segs[0].t0 == 0.0
    assert segs[-1].t1 == pytest.approx(seq.period)
    for a, b in zip(segs, segs[1:]):
        assert b.t0 == pytest.approx(a.t1)
    pulse_segs = [s for s in segs if s.is_pulse]
    assert len(pulse_segs) == 8
    for s, p in zip(pulse_segs, seq.pulses):
        assert s.width == pytest.approx(p.width)
        assert s.omega == pytest.approx(math.pi / p.width)


def test_envelope_on_supports():
    seq = build("xx", period=1.0, t1=0.25, tau_pi=0.1)
    om_x, om_y = seq.envelope(np.array([0.25, 0.75, 0.5]))
    assert om_x[0] == pytest.approx(math.pi / 0.1)
    assert om_x[1] == pytest.approx(math.pi / 0.1)
    assert om_x[2] == 0.0
    assert np.all(om_y == 0.0)


def test_roundtrip_serialisation(tmp_path):
    seq = build("gklc", period=1.0, tau_pi=0.02)
    path = tmp_path / "seq.json"
    seq.save(path)
    back = PulseSequence.load(path)
    assert back == seq


def test_from_dict_rejects_unknown_keys():
    payload = build("xx", period=1.0, tau_pi=0.01).to_dict()
    payload["extra"] = 1
    with pytest.raises(ValueError, match="unknown"):
        PulseSequence.from_dict(payload)


def test_gklc_geometry():
    T, w = 1.0, 0.02
    seq = build("gklc", period=T, tau_pi=w)
    assert "".join(p.axis for p in seq.pulses) == "xxyy"
    # middle pair abuts back to back; trailing pulse ends exactly at T
    p2, p3 = seq.pulses[1], seq.pulses[2]
    assert p3.center - p2.center == pytest.approx(w)
    assert seq.pulses[-1].center + w / 2 == pytest.approx(T)
    assert [p.nominal_time for p in seq.pulses] == pytest.approx(
        [T / 2, 3 * T / 4, 3 * T / 4, T]
    )


def test_gklc_zero_width_limit_recovers_nominal_times():
    seq = build("gklc", period=1.0, tau_pi=1e-9)
    assert np.allclose(seq.times, [0.5, 0.75, 0.75, 1.0], atol=1e-6)


def test_unknown_family_rejected():
    with pytest.raises(ValueError, match="unknown sequence family"):
        build("zz", period=1.0)


def test_t1_range_enforced():
    with pytest.raises(ValueError, match="t1"):
        build("xy8", tau=0.1, t1=0.25, tau_pi=0.01)
