"""Brute-force reference: dense unitaries, basis truth tables and a
density-matrix simulation averaged over a grid of gradient phases.

Nothing here touches the evolution kernels; conditional pulses are built
from Kronecker products of projectors so the engine can be checked
against an independent code path.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .chain import ChainError, ChainLayout, LineId

MAX_ORACLE_SPINS = 11

_P = {"0": np.diag([1.0, 0.0]), "1": np.diag([0.0, 1.0]), "X": np.eye(2)}


def _single_rotation(angle, phase) -> np.ndarray:
    theta = math.pi * float(angle)
    phi = math.pi * float(phase)
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    # snap the π-multiples so truth tables see exact permutations
    c = round(c) if abs(c - round(c)) < 1e-15 else c
    s = round(s) if abs(s - round(s)) < 1e-15 else s
    return np.array(
        [[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]]
    )


def _kron_chain(ops_by_spin: dict[int, np.ndarray], n: int) -> np.ndarray:
    # spin 1 is the least significant bit, so it sits rightmost in the product
    return reduce(np.kron, [ops_by_spin.get(k, np.eye(2)) for k in range(n, 0, -1)])


def pulse_unitary(pulse, layout: ChainLayout) -> np.ndarray:
    n = layout.total_spins
    layout.check_cond(pulse.spin, pulse.cond)
    nbrs = layout.neighbours(pulse.spin)
    proj = {nb: _P[c] for nb, c in zip(nbrs, pulse.cond)}
    p_cond = _kron_chain(proj, n)
    rot = _kron_chain({**proj, pulse.spin: _single_rotation(pulse.angle, pulse.phase)}, n)
    return rot + (np.eye(1 << n) - p_cond)


def _check_size(layout: ChainLayout) -> None:
    if layout.total_spins > MAX_ORACLE_SPINS:
        raise ChainError(f"oracle limited to {MAX_ORACLE_SPINS} spins")


def _is_gradient(instr) -> bool:
    return hasattr(instr, "sign")


def dense_unitary(pulses, layout: ChainLayout) -> np.ndarray:
    _check_size(layout)
    u = np.eye(layout.dim, dtype=np.complex128)
    for p in pulses:
        if _is_gradient(p):
            raise ValueError("dense_unitary takes gradient-free pulse lists")
        u = pulse_unitary(p, layout) @ u
    return u


@dataclass
class TruthTable:
    """``out[b]`` and ``phase[b]`` give ``U|b> = phase[b] |out[b]>`` when a permutation."""

    out: np.ndarray
    phase: np.ndarray
    is_permutation: bool

    def image(self, basis: int) -> int:
        if not self.is_permutation:
            raise ValueError("program is not a basis permutation")
        return int(self.out[basis])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["basis_in", "basis_out", "phase_re", "phase_im"])
        for b, (o, ph) in enumerate(zip(self.out, self.phase)):
            w.writerow([b, int(o), repr(float(ph.real)), repr(float(ph.imag))])
        return buf.getvalue()


def truth_table(pulses, layout: ChainLayout, tol: float = 1e-12) -> TruthTable:
    u = dense_unitary(pulses, layout)
    out = np.argmax(np.abs(u), axis=0)
    phase = u[out, np.arange(layout.dim)]
    residual = np.abs(u).copy()
    residual[out, np.arange(layout.dim)] = 0.0
    is_perm = (
        bool(np.all(np.abs(np.abs(phase) - 1.0) <= tol))
        and bool(np.all(residual <= tol))
        and len(set(out.tolist())) == layout.dim
    )
    return TruthTable(out, phase, is_perm)


def _weights_vector(layout, thermal) -> np.ndarray:
    # independent of the thermal module: product of per-spin two-level occupations
    x = np.broadcast_to(np.asarray(thermal, dtype=float), (layout.total_spins,))
    w = np.ones(1)
    for k in range(layout.total_spins):
        with np.errstate(over="ignore"):
            p1 = 1.0 / (1.0 + np.exp(x[k]))
        w = np.kron(np.array([1 - p1, p1]), w)
    return w


def line_amplitudes(rho: np.ndarray, layout: ChainLayout) -> dict[LineId, complex]:
    """``L = sum over pairs rho[B1, B0]`` with ``B0`` satisfying the line condition."""
    out = {}
    for line in layout.lines():
        total = 0j
        for b0 in range(layout.dim):
            if (b0 >> (line.spin - 1)) & 1:
                continue
            nbrs = layout.neighbours(line.spin)
            if all(((b0 >> (nb - 1)) & 1) == int(c) for nb, c in zip(nbrs, line.cond)):
                total += rho[b0 | (1 << (line.spin - 1)), b0]
        out[line] = complex(total)
    return out


def density_reference(
    layout: ChainLayout,
    thermal,
    program,
    grid_m: int,
    rho0: np.ndarray | None = None,
) -> dict[LineId, complex]:
    """Average the evolved density matrix over gradient phases ``2 pi m / M``.

    ``thermal`` is the per-spin (or uniform) excitation cost ``x``; it is
    ignored when an explicit initial density matrix ``rho0`` is given.
    """
    _check_size(layout)
    if grid_m < 1:
        raise ValueError("grid size must be >= 1")
    if rho0 is None:
        rho0 = np.diag(_weights_vector(layout, thermal)).astype(np.complex128)
    coeffs = layout.gradient_coeffs
    weights = np.array(
        [sum(g for k, g in enumerate(coeffs) if (b >> k) & 1) for b in range(layout.dim)]
    )
    steps = [(p, None) if _is_gradient(p) else (p, pulse_unitary(p, layout)) for p in program]
    acc = np.zeros_like(rho0, dtype=np.complex128)
    for m in range(grid_m):
        theta = 2 * math.pi * m / grid_m
        rho = rho0.astype(np.complex128)
        for instr, u in steps:
            if u is None:
                d = np.exp(1j * instr.sign * theta * weights)
                rho = d[:, None] * rho * d.conj()[None, :]
            else:
                rho = u @ rho @ u.conj().T
        acc += rho
    return line_amplitudes(acc / grid_m, layout)


def pure_rho(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.complex128)
    return np.outer(vec, vec.conj())


@dataclass
class EquivResult:
    passed: bool
    max_deviation: float
    worst_line: LineId | None


def assert_equiv(engine_report, oracle_report, tol: float) -> EquivResult:
    worst, worst_line = 0.0, None
    for line in sorted(set(engine_report) | set(oracle_report)):
        dev = abs(engine_report.get(line, 0j) - oracle_report.get(line, 0j))
        if worst_line is None or dev > worst:
            worst, worst_line = dev, line
    return EquivResult(worst <= tol, worst, worst_line)
