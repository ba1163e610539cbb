"""Pulse-level simulator of a low-temperature ESR ensemble quantum computer."""

__version__ = "0.1.0"

from .chain import ChainLayout, LineId, addressability_report, cond_matches, line_frequency
from .engine import (
    GradedState,
    GradientStep,
    Pulse,
    apply_gradient,
    apply_pulse,
    fid_line,
    fidelity,
    init_register_state,
    init_state,
)
from .lang import emit, expand, parse, reverse
from .thermal import (
    Ensemble,
    SignalReport,
    ThermalSpec,
    boltzmann_weights,
    build_ensemble,
    ground_fraction,
    q_factor,
    run_program,
)

__all__ = [
    "ChainLayout", "LineId", "addressability_report", "cond_matches", "line_frequency",
    "GradedState", "GradientStep", "Pulse", "apply_gradient", "apply_pulse", "fid_line",
    "fidelity", "init_register_state", "init_state", "emit", "expand", "parse", "reverse",
    "Ensemble", "SignalReport", "ThermalSpec", "boltzmann_weights", "build_ensemble",
    "ground_fraction", "q_factor", "run_program",
]
