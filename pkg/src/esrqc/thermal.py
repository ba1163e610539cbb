"""Boltzmann-weighted molecule ensembles and the thermal figures of merit."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain import ChainLayout, LineId
from .lang import expand
from .engine import (
    GradedState,
    GradientStep,
    Pulse,
    _apply_pulse_inplace,
    apply_gradient,
    check_pulse,
    fid_line,
    gradient_weights,
    init_basis_batch,
)

# single-molecule turn-on coherence magnitude, |conj(1/sqrt2) * (-i/sqrt2)|
SINGLE_REFERENCE = 0.5
DEFAULT_DETECT = 1e-5

Q_ANCHORS = {"solid-state ESR": 1e9, "NMR": 1e7, "ion trap": 1e13}


@dataclass(frozen=True)
class ThermalSpec:
    """Per-spin excitation cost ``x_n = hbar omega_n / k_B T``; a scalar means uniform."""

    x: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        x = self.x if np.isscalar(self.x) else tuple(float(v) for v in self.x)
        object.__setattr__(self, "x", x)
        if np.any(np.asarray(x, dtype=float) < 0) or np.any(np.isnan(np.asarray(x, dtype=float))):
            raise ValueError(f"excitation costs must be >= 0, got {x}")

    @classmethod
    def scaled(cls, x0: float, layout: ChainLayout, omega_ref: float | None = None) -> "ThermalSpec":
        """``x_n = x0 * omega_n / omega_ref``; ``omega_ref`` defaults to the signal spin."""
        ref = layout.base_freq[0] if omega_ref is None else omega_ref
        return cls(tuple(x0 * w / ref for w in layout.base_freq))

    @classmethod
    def from_boltzmann_factor(cls, factor: float) -> "ThermalSpec":
        return cls(float(-np.log(factor)) if factor > 0 else float("inf"))

    def per_spin(self, n: int) -> np.ndarray:
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 0:
            return np.full(n, float(x))
        if x.size != n:
            raise ValueError(f"thermal spec has {x.size} costs for {n} spins")
        return x


def excitation_probability(x) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(np.asarray(x, dtype=float)))


def boltzmann_weights(layout: ChainLayout, thermal: ThermalSpec) -> np.ndarray:
    """``W(B) ∝ exp(-sum_n x_n b_n)``, normalized, indexed by basis."""
    p1 = excitation_probability(thermal.per_spin(layout.total_spins))
    basis = np.arange(layout.dim)
    w = np.ones(layout.dim)
    for k in range(layout.total_spins):
        excited = ((basis >> k) & 1).astype(bool)
        w *= np.where(excited, p1[k], 1.0 - p1[k])
    return w


def ground_fraction(thermal: ThermalSpec, n_spins: int) -> float:
    x = thermal.per_spin(n_spins)
    with np.errstate(over="ignore"):
        return float(np.prod(1.0 / (1.0 + np.exp(-x))))


def sample_ground_fraction(
    thermal: ThermalSpec, n_spins: int, draws: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo estimate of the ground fraction and its standard error."""
    rng = np.random.default_rng(seed)
    p1 = excitation_probability(thermal.per_spin(n_spins))
    ground = np.ones(draws, dtype=bool)
    for k in range(n_spins):
        ground &= rng.random(draws) >= p1[k]
    est = float(ground.mean())
    return est, float(np.sqrt(max(est * (1 - est), 1.0 / draws) / draws))


def q_factor(omega0: float, tau: float) -> float:
    if omega0 < 0 or tau < 0:
        raise ValueError("q_factor takes non-negative inputs")
    return omega0 * tau


def q_label(q: float) -> str | None:
    for label, anchor in Q_ANCHORS.items():
        if q == anchor:
            return label
    return None


@dataclass
class SignalReport:
    lines: dict[LineId, complex]
    reference: complex
    pulse_count: int
    snapshots: list[tuple[int, dict[LineId, complex]]] = field(default_factory=list)
    expanded: list = field(default_factory=list)

    def magnitude(self, line: LineId) -> float:
        return abs(self.lines.get(line, 0j))

    def ratio(self, line: LineId) -> float:
        return self.magnitude(line) / abs(self.reference)


@dataclass
class Ensemble:
    layout: ChainLayout
    initial: np.ndarray
    weights: np.ndarray
    state: GradedState
    mode: str = "exact"
    grid: int = 0
    thetas: np.ndarray | None = None
    reference: complex = SINGLE_REFERENCE

    def copy(self) -> "Ensemble":
        return Ensemble(self.layout, self.initial.copy(), self.weights.copy(), self.state.copy(),
                        self.mode, self.grid, None if self.thetas is None else self.thetas.copy(),
                        self.reference)

    @property
    def n_molecules(self) -> int:
        return self.state.n_molecules

    def aggregate_norm(self) -> float:
        return float(np.dot(self.weights, self.state.norms()))

    def line(self, line: LineId) -> complex:
        return fid_line(self.state, line, self.layout, self.weights)

    def line_table(self) -> dict[LineId, complex]:
        return {line: self.line(line) for line in self.layout.lines()}

    def step(self, instr) -> None:
        """Apply one instruction in place."""
        if isinstance(instr, GradientStep):
            if self.mode == "exact":
                self.state = apply_gradient(self.state, instr, self.layout)
            else:
                w = gradient_weights(self.layout)
                phases = np.exp(1j * instr.sign * np.outer(self.thetas, w))
                self.state.amps *= phases[:, None, :]
        else:
            check_pulse(instr, self.layout)
            _apply_pulse_inplace(self.state, instr, self.layout.total_spins)


def from_state(layout: ChainLayout, state: GradedState, reference: complex = 0.5j) -> Ensemble:
    """Single-molecule ensemble around a loaded register state."""
    return Ensemble(layout, np.array([-1]), np.ones(state.n_molecules) / state.n_molecules,
                    state, reference=reference)


def build_ensemble(
    layout: ChainLayout,
    thermal: ThermalSpec,
    mode: str = "exact",
    weight_floor: float = 0.0,
    grid: int = 64,
    seed: int = 0,
    draws: int | None = None,
) -> Ensemble:
    """Exact mode keeps one molecule per basis state with weight >= floor.

    Sampled mode pairs molecules with explicit gradient phases
    ``2 pi m / grid``: every enumerated basis state is replicated across the
    grid, or, with ``draws``, initial states are drawn with the seeded
    generator and assigned grid phases in turn.
    """
    if not 0 <= weight_floor < 1:
        raise ValueError(f"weight_floor must lie in [0, 1), got {weight_floor}")
    w = boltzmann_weights(layout, thermal)
    keep = np.flatnonzero((w >= weight_floor) & (w > 0))
    if keep.size == 0:
        raise ValueError(f"no basis state has weight >= {weight_floor}")
    if mode == "exact":
        weights = w[keep] / w[keep].sum()
        return Ensemble(layout, keep, weights, init_basis_batch(layout, keep))
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if grid < 1:
        raise ValueError("grid size must be >= 1")
    probs = w[keep] / w[keep].sum()
    if draws is None:
        bases = np.repeat(keep, grid)
        phase_idx = np.tile(np.arange(grid), keep.size)
        weights = np.repeat(probs, grid) / grid
    else:
        rng = np.random.default_rng(seed)
        picks = keep[rng.choice(keep.size, size=draws, p=probs)]
        pairs, counts = np.unique(
            np.stack([picks, np.arange(draws) % grid]), axis=1, return_counts=True
        )
        bases, phase_idx = pairs
        weights = counts / draws
    thetas = 2 * np.pi * phase_idx / grid
    return Ensemble(layout, bases, weights.astype(float), init_basis_batch(layout, bases),
                    mode="sampled", grid=grid, thetas=thetas)


def run_program(ensemble: Ensemble, program, snapshot_lines=True) -> tuple[Ensemble, SignalReport]:
    """Evolve every molecule; snapshot the line table after each closed gradient pair."""
    flat = expand(program, ensemble.layout)
    out = ensemble.copy()
    snapshots = []
    grads = 0
    for i, instr in enumerate(flat):
        out.step(instr)
        if isinstance(instr, GradientStep):
            grads += 1
            if snapshot_lines and grads % 2 == 0:
                snapshots.append((i, out.line_table()))
    report = SignalReport(
        out.line_table(),
        ensemble.reference,
        sum(1 for p in flat if isinstance(p, Pulse)),
        snapshots,
        flat,
    )
    return out, report
