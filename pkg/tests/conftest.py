"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from ddcavity import build


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)


def commensurate_delta(seq, m: int) -> float:
    """Detuning sitting exactly on the m-th harmonic of the sequence."""
    return 2.0 * np.pi * m / seq.period


def xy8(tau: float = 0.1, tau_pi: float = 1e-5, t1: float | None = None):
    return build("xy8", tau=tau, tau_pi=tau_pi, t1=tau / 2 if t1 is None else t1)


def xxyy(tau: float = 0.1, tau_pi: float = 1e-5, t1: float | None = None):
    return build("xxyy", tau=tau, tau_pi=tau_pi, t1=tau / 2 if t1 is None else t1)


def xx(period: float = 1.0, tau_pi: float = 1e-5, t1: float | None = None):
    return build("xx", period=period, tau_pi=tau_pi, t1=period / 2 if t1 is None else t1)
