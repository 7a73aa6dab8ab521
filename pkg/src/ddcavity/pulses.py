"""Periodic pi-pulse sequences: containers, builders and segment tilings.

A sequence is a period T plus a list of rectangular pulses, each with an axis
(x or y), a center time, a width tau_pi and a rotation angle (pi + dtheta).
Centers are normalised into the half-open interval (0, T]: a pulse nominally at
t = T belongs to the *end* of the period (it is not the same thing as a pulse
at t = 0, which would already have acted at the start), and negative times wrap
forward by T.  If the support of an end (or start) pulse would stick out past
the period boundary, the *whole train* is shifted rigidly so that it fits --
a pulse at t = T then ends exactly at T.  The rigid shift keeps every
interpulse spacing, and with it the cancellation structure of the sequence,
exactly intact; the displaced pulses remember the idealised flip instants in
``nominal``.  One period is therefore self-contained: tiling it starts and
ends with no partial pulse, and propagation from t = 0 applies exactly the
rotations the sequence prescribes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

_TIME_TOL = 1e-12  # relative slop when comparing segment edges


@dataclass(frozen=True)
class Pulse:
    """One rectangular rotation pulse.

    ``angle`` is the total rotation angle; a plain pi pulse has angle = pi and
    an over-rotated one pi + dtheta.  The Rabi frequency during the pulse is
    angle / width.

    ``nominal`` is the instant the pulse is attributed to in the zero-width
    limit.  It defaults to the center of the support, but builders that have
    to displace a pulse (to make room for a neighbour sharing the same nominal
    time) keep the original time here, so that step-function quantities flip
    where the idealised sequence says they should.
    """

    axis: str
    center: float
    width: float
    angle: float = math.pi
    nominal: float | None = None

    def __post_init__(self) -> None:
        if self.axis not in ("x", "y"):
            raise ValueError(f"pulse axis must be 'x' or 'y', got {self.axis!r}")
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width}")
        if not 0 < self.angle < 2 * math.pi:
            raise ValueError(f"pulse angle must lie in (0, 2*pi), got {self.angle}")

    @property
    def omega(self) -> float:
        return self.angle / self.width

    @property
    def dtheta(self) -> float:
        return self.angle - math.pi

    @property
    def nominal_time(self) -> float:
        return self.center if self.nominal is None else self.nominal


@dataclass(frozen=True)
class Segment:
    """One interval of a single period: free evolution or a constant drive."""

    t0: float
    t1: float
    axis: str | None = None
    omega: float = 0.0

    @property
    def width(self) -> float:
        return self.t1 - self.t0

    @property
    def is_pulse(self) -> bool:
        return self.axis is not None


def _wrap_center(t: float, period: float) -> float:
    """Map a pulse time into (0, T]; t = 0 and t = T both mean end-of-period."""
    c = math.fmod(t, period)
    if c <= 0.0:
        c += period
    return c


@dataclass(frozen=True)
class PulseSequence:
    """A T-periodic pulse train.  Pulses are kept sorted by center."""

    label: str
    period: float
    pulses: tuple[Pulse, ...]

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        T = self.period
        norm = sorted(
            (
                replace(
                    p,
                    center=_wrap_center(p.center, T),
                    nominal=None if p.nominal is None else _wrap_center(p.nominal, T),
                )
                for p in self.pulses
            ),
            key=lambda p: p.center,
        )
        if norm:
            overhang = max(0.0, max(p.center + p.width / 2 for p in norm) - T)
            underhang = max(0.0, -min(p.center - p.width / 2 for p in norm))
            if overhang > 0.0 and underhang > 0.0:
                raise ValueError(
                    "pulse supports stick out at both ends of the period; "
                    "no rigid shift can fit them"
                )
            shift = underhang - overhang
            if shift != 0.0:
                norm = [
                    replace(
                        p,
                        center=p.center + shift,
                        nominal=p.center if p.nominal is None else p.nominal,
                    )
                    for p in norm
                ]
        object.__setattr__(self, "pulses", tuple(norm))
        self._check_supports()

    def _check_supports(self) -> None:
        tol = _TIME_TOL * self.period
        intervals = sorted(self._support_intervals(), key=lambda iv: iv[0])
        for (a0, a1, _), (b0, b1, _) in zip(intervals, intervals[1:]):
            if b0 < a1 - tol:
                raise ValueError(
                    f"pulse supports overlap: [{a0:g}, {a1:g}] and [{b0:g}, {b1:g}]"
                )
        for p in self.pulses:
            if p.width > self.period + tol:
                raise ValueError("pulse wider than the period")

    def _support_intervals(self) -> list[tuple[float, float, Pulse]]:
        """Pulse supports folded into [0, T] (split at the period boundary)."""
        T = self.period
        out: list[tuple[float, float, Pulse]] = []
        for p in self.pulses:
            lo, hi = p.center - p.width / 2, p.center + p.width / 2
            if lo < 0.0:
                out.append((lo + T, T, p))
                out.append((0.0, hi, p))
            elif hi > T:
                out.append((lo, T, p))
                out.append((0.0, hi - T, p))
            else:
                out.append((lo, hi, p))
        return [iv for iv in out if iv[1] - iv[0] > _TIME_TOL * T]

    # -- derived views -----------------------------------------------------

    @property
    def times(self) -> np.ndarray:
        """Pulse centers within the period (sorted)."""
        return np.array([p.center for p in self.pulses])

    def segments(self) -> list[Segment]:
        """Tile one period [0, T] into alternating free/pulse segments."""
        T = self.period
        tol = _TIME_TOL * T
        pieces = sorted(self._support_intervals(), key=lambda iv: iv[0])
        out: list[Segment] = []
        cursor = 0.0
        for lo, hi, p in pieces:
            if lo > cursor + tol:
                out.append(Segment(cursor, lo))
            out.append(Segment(max(cursor, lo), hi, axis=p.axis, omega=p.omega))
            cursor = hi
        if cursor < T - tol:
            out.append(Segment(cursor, T))
        elif out:
            # snap the last edge onto T exactly
            last = out[-1]
            out[-1] = Segment(last.t0, T, axis=last.axis, omega=last.omega)
        return out

    def envelope(self, t: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
        """Drive amplitudes (Omega_x, Omega_y) at times t, T-periodically."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.mod(t, self.period)
        om_x = np.zeros_like(tau)
        om_y = np.zeros_like(tau)
        for lo, hi, p in self._support_intervals():
            mask = (tau >= lo) & (tau < hi)
            if p.axis == "x":
                om_x[mask] = p.omega
            else:
                om_y[mask] = p.omega
        return om_x, om_y

    # -- (de)serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "period": self.period,
            "pulses": [
                {"axis": p.axis, "center": p.center, "width": p.width, "angle": p.angle}
                | ({} if p.nominal is None else {"nominal": p.nominal})
                for p in self.pulses
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PulseSequence":
        extra = set(payload) - {"label", "period", "pulses"}
        if extra:
            raise ValueError(f"unknown sequence keys: {sorted(extra)}")
        pulses = []
        for entry in payload["pulses"]:
            bad = set(entry) - {"axis", "center", "width", "angle", "nominal"}
            if bad:
                raise ValueError(f"unknown pulse keys: {sorted(bad)}")
            pulses.append(Pulse(**entry))
        return cls(payload["label"], float(payload["period"]), tuple(pulses))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PulseSequence":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _angles(n: int, dtheta) -> list[float]:
    if np.isscalar(dtheta):
        return [math.pi + float(dtheta)] * n
    vals = list(dtheta)
    if len(vals) != n:
        raise ValueError(f"need {n} dtheta values, got {len(vals)}")
    return [math.pi + float(v) for v in vals]


def build_xxyy(
    tau: float, t1: float | None = None, tau_pi: float | None = None, dtheta=0.0
) -> PulseSequence:
    """XXYY sequence: X, X, Y, Y at t1 + k*tau, period T = 4*tau.

    t1 defaults to tau/2 and may lie anywhere in [-tau, tau] (wrapping across
    the period boundary).  tau_pi defaults to 0.1*tau.
    """
    T = 4 * tau
    t1 = tau / 2 if t1 is None else t1
    if not -tau <= t1 <= tau:
        raise ValueError(f"t1 must lie in [-tau, tau], got {t1}")
    w = 0.1 * tau if tau_pi is None else tau_pi
    axes = "xxyy"
    angles = _angles(4, dtheta)
    pulses = tuple(
        Pulse(axes[k], t1 + k * tau, w, angles[k]) for k in range(4)
    )
    return PulseSequence("xxyy", T, pulses)


def build_xy8(
    tau: float, t1: float | None = None, tau_pi: float | None = None, dtheta=0.0
) -> PulseSequence:
    """XY8 sequence: X,Y,X,Y,Y,X,Y,X at t1 + k*tau, period T = 8*tau."""
    T = 8 * tau
    t1 = tau / 2 if t1 is None else t1
    if not -tau <= t1 <= tau:
        raise ValueError(f"t1 must lie in [-tau, tau], got {t1}")
    w = 0.1 * tau if tau_pi is None else tau_pi
    axes = "xyxyyxyx"
    angles = _angles(8, dtheta)
    pulses = tuple(
        Pulse(axes[k], t1 + k * tau, w, angles[k]) for k in range(8)
    )
    return PulseSequence("xy8", T, pulses)


def _two_pulse(label: str, axes: str, period: float, t1, tau_pi, dtheta) -> PulseSequence:
    t1 = period / 4 if t1 is None else t1
    w = 0.01 * (period / 2) if tau_pi is None else tau_pi
    angles = _angles(2, dtheta)
    pulses = (
        Pulse(axes[0], t1, w, angles[0]),
        Pulse(axes[1], t1 + period / 2, w, angles[1]),
    )
    return PulseSequence(label, period, pulses)


def build_xx(
    period: float, t1: float | None = None, tau_pi: float | None = None, dtheta=0.0
) -> PulseSequence:
    """Two X pulses per period, half a period apart (t2 = t1 + T/2)."""
    return _two_pulse("xx", "xx", period, t1, tau_pi, dtheta)


def build_yy(
    period: float, t1: float | None = None, tau_pi: float | None = None, dtheta=0.0
) -> PulseSequence:
    """Two Y pulses per period, half a period apart (t2 = t1 + T/2)."""
    return _two_pulse("yy", "yy", period, t1, tau_pi, dtheta)


def build_gklc(period: float, tau_pi: float | None = None, dtheta=0.0) -> PulseSequence:
    """Four-pulse sequence with nominal times X(T/2), X(3T/4), Y(3T/4), Y(T).

    Two of the pulses share the nominal time 3T/4, so finite-width pulses
    cannot all be centered on their nominal instants.  Instead the free
    evolution is compressed uniformly: with N pulses of width w, pulse k
    (time-ordered, X before Y on ties) occupies

        [t_k (T - N w)/T + k w,  t_k (T - N w)/T + (k + 1) w].

    This keeps the period, makes the middle pair abut back to back ending at
    the compressed 3T/4, lets the trailing Y finish exactly at T, and - for
    any equally spaced train - reduces to pulses centered on their nominal
    times as w -> 0.  tau_pi defaults to 0.1 * (T/4).
    """
    T = period
    w = 0.1 * (T / 4) if tau_pi is None else tau_pi
    angles = _angles(4, dtheta)
    nominal = [(T / 2, "x"), (3 * T / 4, "x"), (3 * T / 4, "y"), (T, "y")]
    scale = (T - 4 * w) / T
    if scale <= 0:
        raise ValueError("pulses do not fit into the period")
    pulses = tuple(
        Pulse(ax, t * scale + k * w + w / 2, w, angles[k], nominal=t)
        for k, (t, ax) in enumerate(nominal)
    )
    return PulseSequence("gklc", T, pulses)


_BUILDERS = {
    "xxyy": build_xxyy,
    "xy8": build_xy8,
    "xx": build_xx,
    "yy": build_yy,
    "gklc": build_gklc,
}


def build(family: str, **kwargs) -> PulseSequence:
    """Dispatch on the family name ("xxyy", "xy8", "xx", "yy", "gklc")."""
    try:
        builder = _BUILDERS[family]
    except KeyError:
        raise ValueError(f"unknown sequence family {family!r}") from None
    return builder(**kwargs)
