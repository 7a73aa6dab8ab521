"""Pulse-sequence engineering and noisy dynamics for driven spin-cavity systems.

The package splits into small layers:

* :mod:`ddcavity.hilbert` -- dense operators, states and layouts (spin x cavity);
* :mod:`ddcavity.pulses` -- periodic pi-pulse sequences and their envelopes;
* :mod:`ddcavity.toggling` -- toggling-frame modulation functions, effective
  coupling coefficients, Magnus tensors and cavity-induced decay rates;
* :mod:`ddcavity.noise` -- reproducible dephasing-noise trajectories;
* :mod:`ddcavity.dynamics` -- unitary / Lindblad propagation and ensembles;
* :mod:`ddcavity.metrics` -- fidelities and scaling fits;
* :mod:`ddcavity.oracles` -- closed-form error laws used to validate runs;
* :mod:`ddcavity.configio` -- JSON experiment specs shared by library and CLI;
* :mod:`ddcavity.cli` -- the ``ddcavity`` command-line entry point.
"""

__version__ = "0.1.0"

from .configio import (
    ConfigError,
    effective_from_spec,
    experiment_from_spec,
    sequence_from_spec,
    sweep_from_spec,
    system_from_spec,
)
from .dynamics import (
    EnsembleResult,
    SystemConfig,
    delta_from_resonance,
    propagate_lindblad,
    propagate_unitary,
    run_ensemble,
    toggling_check,
)
from .hilbert import (
    HilbertLayout,
    LeakageError,
    Operator,
    State,
    concurrence,
    initial_ket,
    partial_trace,
)
from .metrics import Observable, ScalingFit, evaluate, observable, scaling_fit, standard_error
from .noise import NoiseModel, NoiseTrajectory, sample
from .oracles import (
    CooperativityModel,
    bare_transfer_error,
    delta_j_correction,
    entanglement_error,
    pulse_spacing_error,
    static_shift_fidelity,
    xxyy_transfer_error,
    xy8_transfer_error,
)
from .pulses import Pulse, PulseSequence, build
from .toggling import (
    DecayRates,
    EffectiveModel,
    ExpansionTensors,
    FirstOrderCoefficients,
    closed_form_eta,
    decay_rates,
    effective_hamiltonian,
    expansion_tensors,
    first_order,
    modulation,
    second_order_ruv,
    secular_ruv,
    split_detuning,
    window_eta,
)

__all__ = [
    "ConfigError",
    "CooperativityModel",
    "DecayRates",
    "EffectiveModel",
    "EnsembleResult",
    "ExpansionTensors",
    "FirstOrderCoefficients",
    "HilbertLayout",
    "LeakageError",
    "NoiseModel",
    "NoiseTrajectory",
    "Observable",
    "Operator",
    "Pulse",
    "PulseSequence",
    "ScalingFit",
    "State",
    "SystemConfig",
    "__version__",
    "bare_transfer_error",
    "build",
    "closed_form_eta",
    "concurrence",
    "decay_rates",
    "delta_from_resonance",
    "delta_j_correction",
    "effective_from_spec",
    "effective_hamiltonian",
    "entanglement_error",
    "evaluate",
    "expansion_tensors",
    "experiment_from_spec",
    "first_order",
    "initial_ket",
    "modulation",
    "observable",
    "partial_trace",
    "propagate_lindblad",
    "propagate_unitary",
    "pulse_spacing_error",
    "run_ensemble",
    "sample",
    "scaling_fit",
    "second_order_ruv",
    "secular_ruv",
    "sequence_from_spec",
    "split_detuning",
    "standard_error",
    "static_shift_fidelity",
    "sweep_from_spec",
    "system_from_spec",
    "toggling_check",
    "window_eta",
    "xxyy_transfer_error",
    "xy8_transfer_error",
]
