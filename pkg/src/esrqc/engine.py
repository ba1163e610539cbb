"""Single-molecule pure-state evolution with exact gradient-order bookkeeping.

A :class:`GradedState` stores amplitudes indexed by ``(gradient order,
basis index)``.  A molecule whose gradient phase is ``theta`` carries the
factor ``exp(1j * theta * order)`` on each entry, so averaging any bilinear
observable over a uniform ``theta`` keeps only entries of equal order.
States are batched: ``amps`` has shape ``(molecules, orders, 2**spins)``,
which lets an ensemble evolve through one kernel call per pulse.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Union

import numpy as np

from . import kernels
from .chain import ChainError, ChainLayout, LineId

MAX_DENSE_SPINS = 16
NORM_TOL = 1e-12


@dataclass(frozen=True)
class Pulse:
    """Conditional rotation; ``angle`` and ``phase`` are rational multiples of pi."""

    spin: int
    cond: str
    angle: Fraction = Fraction(1)
    phase: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "angle", Fraction(self.angle))
        object.__setattr__(self, "phase", Fraction(self.phase))
        object.__setattr__(self, "cond", self.cond.upper())
        if not -2 < self.angle <= 2:
            raise ValueError(f"pulse angle {self.angle}pi outside (-2pi, 2pi]")

    def inverse(self) -> "Pulse":
        # R(2pi) = -1 is its own inverse and -2pi lies outside the angle domain
        angle = self.angle if self.angle == 2 else -self.angle
        return Pulse(self.spin, self.cond, angle, self.phase)


@dataclass(frozen=True)
class GradientStep:
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"gradient sign must be +1 or -1, got {self.sign}")

    def inverse(self) -> "GradientStep":
        return GradientStep(-self.sign)


Instruction = Union[Pulse, GradientStep]


def _exact_cos_sin(half_turns: Fraction) -> tuple[float, float]:
    """cos and sin of ``half_turns * pi / 2``, exact on multiples of pi/2."""
    if half_turns.denominator == 1:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(half_turns) % 4]
    x = float(half_turns) * np.pi / 2
    return float(np.cos(x)), float(np.sin(x))


def _exact_phase(phase: Fraction) -> complex:
    """exp(1j * phase * pi), exact on multiples of pi/2."""
    quarter = phase * 2
    if quarter.denominator == 1:
        return [1 + 0j, 1j, -1 + 0j, -1j][int(quarter) % 4]
    return complex(np.exp(1j * np.pi * float(phase)))


def rotation_matrix(angle: Fraction, phase: Fraction) -> np.ndarray:
    c, s = _exact_cos_sin(Fraction(angle))
    e = _exact_phase(Fraction(phase))
    return np.array(
        [[c, -1j * e.conjugate() * s], [-1j * e * s, c]], dtype=np.complex128
    )


@lru_cache(maxsize=None)
def _weights(coeffs: tuple[int, ...]) -> np.ndarray:
    basis = np.arange(1 << len(coeffs))
    w = np.zeros_like(basis)
    for k, g in enumerate(coeffs):
        w += g * ((basis >> k) & 1)
    w.setflags(write=False)
    return w


def gradient_weights(layout: ChainLayout) -> np.ndarray:
    """Order shift per basis state for one gradient step (Hamming weight by default)."""
    return _weights(layout.gradient_coeffs)


@lru_cache(maxsize=None)
def pair_indices(total_spins: int, spin: int, cond: str) -> tuple[np.ndarray, np.ndarray]:
    """Basis pairs (target bit 0, target bit 1) whose neighbours satisfy ``cond``."""
    basis = np.arange(1 << total_spins, dtype=np.int64)
    mask = ((basis >> (spin - 1)) & 1) == 0
    if spin == 1:
        neighbours = [2]
    elif spin == total_spins:
        neighbours = [spin - 1]
    else:
        neighbours = [spin - 1, spin + 1]
    for neighbour, c in zip(neighbours, cond):
        if c != "X":
            mask &= ((basis >> (neighbour - 1)) & 1) == int(c)
    idx0 = np.ascontiguousarray(basis[mask])
    idx1 = np.ascontiguousarray(idx0 | (1 << (spin - 1)))
    idx0.setflags(write=False)
    idx1.setflags(write=False)
    return idx0, idx1


def check_pulse(pulse: Pulse, layout: ChainLayout) -> None:
    layout.check_cond(pulse.spin, pulse.cond)


@dataclass
class GradedState:
    """Batch of molecule states; row ``r`` of axis 1 is gradient order ``order_min + r``."""

    amps: np.ndarray
    order_min: int = 0

    @property
    def n_molecules(self) -> int:
        return self.amps.shape[0]

    @property
    def orders(self) -> np.ndarray:
        return np.arange(self.order_min, self.order_min + self.amps.shape[1])

    def copy(self) -> "GradedState":
        return GradedState(self.amps.copy(), self.order_min)

    def molecule(self, i: int) -> "GradedState":
        return GradedState(self.amps[i:i + 1].copy(), self.order_min)

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amps) ** 2, axis=(1, 2))

    def entries(self, molecule: int = 0, tol: float = 0.0) -> dict[tuple[int, int], complex]:
        """Nonzero amplitudes as ``{(basis, order): amplitude}``."""
        out = {}
        rows, cols = np.nonzero(np.abs(self.amps[molecule]) > tol)
        for r, b in zip(rows, cols):
            out[(int(b), int(self.order_min + r))] = complex(self.amps[molecule, r, b])
        return out

    def trimmed(self) -> "GradedState":
        live = np.flatnonzero(np.any(self.amps != 0, axis=(0, 2)))
        if live.size == 0:
            return GradedState(self.amps[:, :1].copy(), self.order_min)
        lo, hi = live[0], live[-1] + 1
        if lo == 0 and hi == self.amps.shape[1]:
            return self
        return GradedState(np.ascontiguousarray(self.amps[:, lo:hi]), self.order_min + int(lo))


def _check_dim(layout: ChainLayout) -> None:
    if layout.total_spins > MAX_DENSE_SPINS:
        raise ChainError(
            f"dense engine supports at most {MAX_DENSE_SPINS} spins, got {layout.total_spins}"
        )


def init_state(layout: ChainLayout, basis: int) -> GradedState:
    _check_dim(layout)
    if not 0 <= basis < layout.dim:
        raise ChainError(f"basis index {basis} outside [0, {layout.dim})")
    amps = np.zeros((1, 1, layout.dim), dtype=np.complex128)
    amps[0, 0, basis] = 1.0
    return GradedState(amps)


def init_basis_batch(layout: ChainLayout, bases) -> GradedState:
    _check_dim(layout)
    bases = np.asarray(bases, dtype=np.int64)
    if bases.size and (bases.min() < 0 or bases.max() >= layout.dim):
        raise ChainError("basis index out of range")
    amps = np.zeros((bases.size, 1, layout.dim), dtype=np.complex128)
    amps[np.arange(bases.size), 0, bases] = 1.0
    return GradedState(amps)


def register_index(pattern: str) -> int:
    """Basis index (signal spin 0) of a big-endian register pattern starting at spin 2."""
    index = 0
    for j, c in enumerate(pattern):
        if c not in "01":
            raise ChainError(f"register pattern {pattern!r} must be binary")
        if c == "1":
            index |= 1 << (j + 1)
    return index


def register_pattern(basis: int, n_register: int) -> str:
    return "".join(str((basis >> (j + 1)) & 1) for j in range(n_register))


def init_register_state(
    layout: ChainLayout,
    amplitudes: Mapping[str, complex],
    signal_coherent: bool = True,
) -> GradedState:
    """Load ``|sigma>|R>``; the signal spin is ``(|0> + i|1>)/sqrt 2`` when coherent."""
    _check_dim(layout)
    norm = sum(abs(a) ** 2 for a in amplitudes.values())
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"register amplitudes not normalized: norm {norm!r}")
    vec = np.zeros(layout.dim, dtype=np.complex128)
    for pattern, amp in amplitudes.items():
        if len(pattern) > layout.n_register:
            raise ChainError(
                f"pattern {pattern!r} longer than register of {layout.n_register} spins"
            )
        vec[register_index(pattern)] += amp
    if signal_coherent:
        shifted = np.zeros_like(vec)
        shifted[1::2] = vec[0::2]
        vec = (vec + 1j * shifted) / np.sqrt(2.0)
    return GradedState(vec.reshape(1, 1, -1))


def _apply_pulse_inplace(state: GradedState, pulse: Pulse, total_spins: int) -> None:
    m = rotation_matrix(pulse.angle, pulse.phase)
    idx0, idx1 = pair_indices(total_spins, pulse.spin, pulse.cond)
    flat = state.amps.reshape(-1, state.amps.shape[-1])
    kernels.rotate_pairs(flat, idx0, idx1, m[0, 0], m[0, 1], m[1, 0], m[1, 1])


def apply_pulse(state: GradedState, pulse: Pulse, layout: ChainLayout) -> GradedState:
    check_pulse(pulse, layout)
    out = state.copy()
    _apply_pulse_inplace(out, pulse, layout.total_spins)
    return out


def apply_gradient(state: GradedState, step: GradientStep, layout: ChainLayout) -> GradedState:
    """Shift every entry ``(B, g)`` to ``(B, g + sign * weight(B))``."""
    weights = gradient_weights(layout)
    n = int(weights.max())
    n_mol, k, dim = state.amps.shape
    new = np.zeros((n_mol, k + n, dim), dtype=np.complex128)
    for w in np.unique(weights):
        cols = weights == w
        start = w if step.sign > 0 else n - w
        new[:, start:start + k, cols] = state.amps[:, :, cols]
    order_min = state.order_min if step.sign > 0 else state.order_min - n
    return GradedState(new, order_min).trimmed()


def apply_instruction(state: GradedState, instr: Instruction, layout: ChainLayout) -> GradedState:
    if isinstance(instr, GradientStep):
        return apply_gradient(state, instr, layout)
    return apply_pulse(state, instr, layout)


def evolve(state: GradedState, instructions, layout: ChainLayout) -> GradedState:
    """Run a flat instruction list, copying the input once."""
    out = state.copy()
    for instr in instructions:
        if isinstance(instr, GradientStep):
            out = apply_gradient(out, instr, layout)
        else:
            check_pulse(instr, layout)
            _apply_pulse_inplace(out, instr, layout.total_spins)
    return out


def fid_line(
    state: GradedState,
    line: LineId,
    layout: ChainLayout,
    weights=None,
) -> complex:
    """Gradient-averaged line amplitude ``sum_m W_m sum_g sum_pairs conj(a0) a1``."""
    spin, cond = line
    layout.check_cond(spin, cond, allow_x=False)
    if weights is None:
        weights = np.ones(state.n_molecules)
    row_weights = np.ascontiguousarray(
        np.repeat(np.asarray(weights, dtype=np.float64), state.amps.shape[1])
    )
    idx0, idx1 = pair_indices(layout.total_spins, spin, cond)
    flat = state.amps.reshape(-1, state.amps.shape[-1])
    return kernels.pair_overlap(flat, row_weights, idx0, idx1)


def line_table(state: GradedState, layout: ChainLayout, weights=None) -> dict[LineId, complex]:
    return {line: fid_line(state, line, layout, weights) for line in layout.lines()}


def molecule_line_table(state: GradedState, layout: ChainLayout) -> np.ndarray:
    """Per-molecule line amplitudes, shape (molecules, lines) in ``layout.lines()`` order."""
    out = np.zeros((state.n_molecules, len(layout.lines())), dtype=np.complex128)
    for j, line in enumerate(layout.lines()):
        idx0, idx1 = pair_indices(layout.total_spins, line.spin, line.cond)
        out[:, j] = np.einsum(
            "mrp,mrp->m", state.amps[:, :, idx0].conj(), state.amps[:, :, idx1]
        )
    return out


def _aligned(a: GradedState, b: GradedState) -> tuple[np.ndarray, np.ndarray]:
    lo = min(a.order_min, b.order_min)
    hi = max(a.order_min + a.amps.shape[1], b.order_min + b.amps.shape[1])

    def pad(s):
        out = np.zeros((s.n_molecules, hi - lo, s.amps.shape[2]), dtype=np.complex128)
        start = s.order_min - lo
        out[:, start:start + s.amps.shape[1]] = s.amps
        return out

    return pad(a), pad(b)


def fidelities(a: GradedState, b: GradedState) -> np.ndarray:
    """Per-molecule ``|<a|b>|`` over matched (basis, order) entries."""
    pa, pb = _aligned(a, b)
    return np.abs(np.einsum("mrb,mrb->m", pa.conj(), pb))


def fidelity(a: GradedState, b: GradedState) -> float:
    if a.n_molecules != 1 or b.n_molecules != 1:
        raise ValueError("fidelity compares single-molecule states; use fidelities()")
    return float(min(1.0, fidelities(a, b)[0]))
