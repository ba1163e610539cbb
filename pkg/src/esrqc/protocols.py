"""End-to-end procedures: preparation, pseudo-projective pattern
measurement, smallest-element (Shor) and dominant-answer (Grover)
readouts, the small-angle probe, and the register-state builders.

Every readout runs on a private copy of the ensemble and keeps a tape of
what it applied, so the interrogations can be undone exactly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .chain import ChainError, ChainLayout, LineId
from .engine import GradientStep, Pulse, init_register_state, molecule_line_table
from .lang import KILL, TURNON, expand, flip, match_pulses, prepare_pulses, reverse, zmatch_pulses
from .thermal import Ensemble, SignalReport, from_state, run_program

GRAD = GradientStep(1)
DEFAULT_DOMINANCE = 0.6
PROBE_ANGLE = Fraction(1, 20)


class ReadoutError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class AmbiguityError(ReadoutError):
    """No branch carries the required signal."""


class DescentStrategy(str, enum.Enum):
    UNWIND_EACH = "unwind_each"
    CUMULATIVE = "cumulative"
    EXHAUSTIVE_SCAN = "exhaustive_scan"


@dataclass
class TraceStep:
    label: str
    pulses: int
    line: LineId | None = None
    signal: float | None = None
    decision: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "pulses": self.pulses,
            "line": None if self.line is None else self.line.key(),
            "signal": self.signal,
            "decision": self.decision,
        }


@dataclass
class ReadoutTrace:
    steps: list[TraceStep] = field(default_factory=list)
    result: dict = field(default_factory=dict)

    @property
    def pulse_count(self) -> int:
        return sum(s.pulses for s in self.steps)

    @property
    def interrogations(self) -> int:
        return sum(1 for s in self.steps if s.signal is not None)

    def to_dict(self) -> dict:
        return {
            "pulse_count": self.pulse_count,
            "steps": [s.to_dict() for s in self.steps],
            "result": self.result,
        }


class _Session:
    def __init__(self, ensemble: Ensemble, trace: ReadoutTrace | None = None):
        self.ens = ensemble.copy()
        self.ref = abs(ensemble.reference)
        self.tape: list = []
        self.trace = trace if trace is not None else ReadoutTrace()
        self.shadow: Ensemble | None = None  # follows every step; see _descent

    def shadow_value(self, line: LineId) -> complex:
        """Shadow line in units of its reference; zero without a shadow."""
        if self.shadow is None:
            return 0j
        return self.shadow.line(line) / self.shadow.reference

    def apply(self, instrs, label: str, keep: bool = True) -> None:
        for instr in instrs:
            self.ens.step(instr)
            if self.shadow is not None:
                self.shadow.step(instr)
        if keep:
            self.tape.extend(instrs)
        n = sum(1 for i in instrs if isinstance(i, Pulse))
        self.trace.steps.append(TraceStep(label, n))

    def read(self, line: LineId, label: str) -> tuple[complex, float]:
        value = self.ens.line(line)
        ratio = abs(value) / self.ref
        self.trace.steps.append(TraceStep(label, 0, line, ratio))
        return value, ratio

    def decide(self, text: str) -> None:
        self.trace.steps[-1].decision = text

    def undo_last(self, block, label: str) -> None:
        if self.tape[len(self.tape) - len(block):] != list(block):
            raise RuntimeError("undo target is not the last applied block")
        del self.tape[len(self.tape) - len(block):]
        self.apply(reverse(block), label, keep=False)

    def restore(self) -> None:
        if self.tape:
            self.apply(reverse(self.tape), "restore", keep=False)
            self.tape = []


@dataclass
class PipelineResult:
    ensemble: Ensemble
    echo: SignalReport
    final: SignalReport
    echo_line: LineId
    contributions: np.ndarray  # per-molecule echo-line amplitude (unweighted)
    computational: np.ndarray  # per-molecule flag: starts in |sigma>|0...0>

    @property
    def signed_ratio(self) -> float:
        return abs(self.echo.lines[self.echo_line]) / abs(self.echo.reference)

    @property
    def incoherent_ratio(self) -> float:
        """Weighted sum of per-molecule echo magnitudes over the reference."""
        w = self.ensemble.weights
        return float(np.dot(w, np.abs(self.contributions)) / abs(self.echo.reference))

    def computational_weight(self) -> float:
        return float(self.ensemble.weights[self.computational].sum())


def prepare_pipeline(ensemble: Ensemble) -> PipelineResult:
    """Turn on, then gradient / prepare / gradient, read the echo, then undo prepare."""
    layout = ensemble.layout
    head = [TURNON, GRAD, *prepare_pulses(layout), GRAD]
    mid, echo = run_program(ensemble, head)
    echo_line = LineId(1, "1")
    per_mol = molecule_line_table(mid.state, layout)
    contributions = per_mol[:, layout.lines().index(echo_line)]
    out, final = run_program(mid, reverse(prepare_pulses(layout)))
    final.pulse_count += echo.pulse_count
    final.expanded = echo.expanded + final.expanded
    computational = np.isin(ensemble.initial, [0, 1])
    return PipelineResult(out, echo, final, echo_line, contributions, computational)


def interrogation_program(pattern: str, layout: ChainLayout, staged: bool = True) -> list:
    """Gradient-sandwiched match blocks; staged runs every prefix of the pattern in turn."""
    lengths = range(1, len(pattern) + 1) if staged else [len(pattern)]
    prog: list = []
    for k in lengths:
        prog += [GRAD, *match_pulses(pattern[:k], layout), GRAD]
    return prog


def measure_pattern(
    ensemble: Ensemble,
    pattern: str,
    unwind: bool = True,
    staged: bool = True,
) -> tuple[complex, Ensemble, ReadoutTrace]:
    """Echo amplitude at the signal line of components whose register starts with ``pattern``.

    With ``staged`` the prefixes are interrogated one after the other
    without undoing, so a component rejected at an earlier prefix stays
    dephased; a single block admits false matches (see
    :func:`classify_zmatch`).
    """
    layout = ensemble.layout
    if not pattern or len(pattern) > layout.n_register or set(pattern) - {"0", "1"}:
        raise ChainError(f"pattern {pattern!r} invalid for a register of {layout.n_register}")
    session = _Session(ensemble)
    signal = _measure(session, pattern, staged, unwind)
    return signal, session.ens, session.trace


def _measure(session: _Session, pattern: str, staged: bool, unwind: bool) -> complex:
    prog = interrogation_program(pattern, session.ens.layout, staged)
    session.apply(prog, f"match {pattern}")
    value, ratio = session.read(LineId(1, pattern[0]), f"read {pattern}")
    if unwind:
        session.undo_last(prog, f"unwind {pattern}")
    return value


def _descent(
    ensemble: Ensemble,
    width: int,
    threshold: float,
    cumulative: bool,
    exclude_zero: bool,
    trace: ReadoutTrace,
    ambiguity: bool,
) -> tuple[str | None, Ensemble]:
    """Bit-by-bit prefix search; prefers 0 when its branch clears ``threshold``.

    Known bits are folded into a frame of unconditional flips so every
    interrogation is a plain zero-prefix test.
    """
    layout = ensemble.layout
    session = _Session(ensemble, trace)
    excl = 0.0
    if exclude_zero:
        z = _measure(session, "0" * width, staged=True, unwind=True)
        excl = abs(z) / session.ref
        session.decide(f"excluded zero weight {excl:.6g}")
        if excl > 0:
            # the zero state moves under the frame flips and can fall into a
            # false-match class, so its share of each reading is tracked exactly
            zero = {"0" * layout.n_register: 1.0}
            session.shadow = from_state(layout, init_register_state(layout, zero))

    def net(line: LineId, label: str) -> float:
        # line amplitudes add coherently, so the zero share is removed before |.|
        value, _ = session.read(line, label)
        return abs(value / session.ens.reference - excl * session.shadow_value(line))

    def fail(msg):
        session.restore()
        if ambiguity:
            raise AmbiguityError(msg, trace)
        trace.result["failure"] = msg
        return None, session.ens

    s0 = net(LineId(1, "0"), "leading 0")
    s1 = net(LineId(1, "1"), "leading 1")
    if s0 > threshold:
        prefix, s_prefix = "0", s0
    elif s1 > threshold:
        prefix, s_prefix = "1", s1
        session.apply([flip(2, layout)], "frame flip 2")
    else:
        return fail(f"no leading digit above {threshold}: {s0:.4g}, {s1:.4g}")
    session.decide(f"bit 2 = {prefix}")
    session.apply([KILL], "kill")

    for k in range(2, width + 1):
        block = [GRAD, *zmatch_pulses(k, layout), GRAD]
        session.apply(block, f"zmatch {k}")
        s = net(LineId(1, "0"), f"read zmatch {k}")
        if s > threshold:
            prefix += "0"
            s_prefix = s
            session.decide(f"bit {k + 1} = 0")
            if not cumulative:
                session.undo_last(block, f"unwind zmatch {k}")
            continue
        session.undo_last(block, f"unwind zmatch {k}")
        session.apply([flip(k + 1, layout)], f"frame flip {k + 1}")
        if cumulative:
            session.apply(block, f"zmatch {k} (bit 1)")
            s1 = net(LineId(1, "0"), f"read zmatch {k} (bit 1)")
        else:
            s1 = s_prefix - s
        if s1 <= threshold:
            return fail(f"neither branch at spin {k + 1} above {threshold}: {s:.4g}, {s1:.4g}")
        prefix += "1"
        s_prefix = s1
        session.decide(f"bit {k + 1} = 1")
    session.restore()
    return prefix, session.ens


def find_smallest_element(
    ensemble: Ensemble,
    strategy: DescentStrategy | str = DescentStrategy.EXHAUSTIVE_SCAN,
    threshold: float = 0.01,
    width: int | None = None,
) -> tuple[int | None, ReadoutTrace]:
    """Smallest nonzero register value in the first ``width`` bits with weight above ``threshold``."""
    strategy = DescentStrategy(strategy)
    layout = ensemble.layout
    width = layout.n_register if width is None else width
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if not 1 <= width <= layout.n_register:
        raise ChainError(f"width {width} outside 1..{layout.n_register}")
    trace = ReadoutTrace()
    trace.result.update(strategy=strategy.value, threshold=threshold, width=width)

    if strategy is DescentStrategy.EXHAUSTIVE_SCAN:
        session = _Session(ensemble, trace)
        for v in range(1, 1 << width):
            pattern = format(v, f"0{width}b")
            signal = _measure(session, pattern, staged=True, unwind=True)
            ratio = abs(signal) / session.ref
            if ratio > threshold:
                session.decide("found")
                trace.result.update(found=True, value=v, signal=ratio, verified=True)
                return v, trace
            session.decide("below threshold")
        trace.result.update(found=False, value=None)
        return None, trace

    prefix, restored = _descent(
        ensemble, width, threshold,
        cumulative=strategy is DescentStrategy.CUMULATIVE,
        exclude_zero=True, trace=trace, ambiguity=False,
    )
    if prefix is None or set(prefix) == {"0"}:
        trace.result.update(found=False, value=None)
        return None, trace
    # confirm with the staged measurement, which admits no false matches
    check = _Session(restored, trace)
    signal = _measure(check, prefix, staged=True, unwind=True)
    ratio = abs(signal) / check.ref
    value = int(prefix, 2)
    trace.result.update(found=True, value=value, signal=ratio, verified=ratio > threshold)
    return value, trace


def grover_readout(
    ensemble: Ensemble, dominance: float = DEFAULT_DOMINANCE
) -> tuple[str, ReadoutTrace]:
    """Recover the dominant register pattern; every interrogation is undone."""
    trace = ReadoutTrace()
    n = ensemble.layout.n_register
    bits, _ = _descent(ensemble, n, dominance, cumulative=False, exclude_zero=False,
                       trace=trace, ambiguity=True)
    trace.result.update(bits=bits, pulse_count=trace.pulse_count,
                        budget_constant=trace.pulse_count / n**2)
    return bits, trace


@dataclass
class ProbeResult:
    lines: dict[LineId, complex]
    strongest: dict[int, LineId]
    bits: str


def small_angle_probe(ensemble: Ensemble, angle: Fraction = PROBE_ANGLE) -> ProbeResult:
    """Rotate every spin by a small angle and decode the register from the strongest lines."""
    layout = ensemble.layout
    ens = ensemble.copy()
    for spin in range(1, layout.total_spins + 1):
        ens.step(Pulse(spin, "X" * layout.cond_width(spin), Fraction(angle)))
    table = ens.line_table()
    strongest = {}
    for spin in range(1, layout.total_spins + 1):
        cands = [l for l in table if l.spin == spin]
        mags = sorted((abs(table[l]), l) for l in cands)
        if len(mags) > 1 and math.isclose(mags[-1][0], mags[-2][0], rel_tol=1e-9, abs_tol=1e-15):
            strongest[spin] = None
        else:
            strongest[spin] = mags[-1][1]
    bits = []
    for j in range(2, layout.total_spins + 1):
        votes = set()
        left, right = strongest.get(j - 1), strongest.get(j + 1)
        if left is not None:
            votes.add(left.cond[-1])
        if right is not None:
            votes.add(right.cond[0])
        if len(votes) != 1:
            raise AmbiguityError(f"spin {j} undetermined by probe lines: {sorted(votes)}")
        bits.append(votes.pop())
    return ProbeResult(table, strongest, "".join(bits))


def build_periodic_state(w_bits: int, period: int) -> dict[str, complex]:
    """Uniform superposition of the multiples of ``period`` below ``2**w_bits``."""
    if w_bits < 1 or period < 1:
        raise ValueError("need w_bits >= 1 and period >= 1")
    if period > 1 << w_bits:
        raise ValueError(f"period {period} exceeds register size {1 << w_bits}")
    values = range(0, 1 << w_bits, period)
    amp = 1 / math.sqrt(len(values))
    return {format(v, f"0{w_bits}b"): amp for v in values}


def periodic_terms(w_bits: int, period: int) -> int:
    return len(range(0, 1 << w_bits, period))


def build_shifted_periodic_state(
    w_bits: int, x: int, modulus: int, s: int, n_register: int | None = None
) -> dict[str, complex]:
    """``sum_a sum_{n<=s} |a>|x^(a+n) mod modulus>``, normalized; first register leads."""
    if math.gcd(x, modulus) != 1:
        raise ValueError(f"x={x} is not coprime to modulus {modulus}")
    if s < 0 or w_bits < 1 or modulus < 2:
        raise ValueError("need s >= 0, w_bits >= 1 and modulus >= 2")
    m_bits = (modulus - 1).bit_length()
    if n_register is not None and w_bits + m_bits > n_register:
        raise ChainError(f"{w_bits}+{m_bits} register bits exceed chain of {n_register}")
    acc: dict[str, complex] = {}
    for a in range(1 << w_bits):
        for n in range(s + 1):
            key = format(a, f"0{w_bits}b") + format(pow(x, a + n, modulus), f"0{m_bits}b")
            acc[key] = acc.get(key, 0) + 1
    norm = math.sqrt(sum(abs(v) ** 2 for v in acc.values()))
    return {k: v / norm for k, v in acc.items()}


def parse_register_value(text: str, width: int) -> str:
    """Register pattern from binary text (``1011``, ``0b1011``) or decimal (``d11``)."""
    text = text.strip()
    if text.startswith("d"):
        pattern = format(int(text[1:]), f"0{width}b")
    else:
        pattern = text[2:] if text.startswith("0b") else text
        if not pattern or set(pattern) - {"0", "1"}:
            raise ValueError(f"{text!r} is neither binary nor d<decimal>")
    if len(pattern) > width:
        raise ValueError(f"{text!r} does not fit in {width} bits")
    return pattern


def classify_zmatch(layout: ChainLayout, k: int) -> list[dict]:
    """Outcome class of one ``[grad, zmatch k, grad]`` block for every register basis state.

    Classes: ``true_match`` (register zero on spins 2..k+1 and echo kept),
    ``false_match`` (echo kept otherwise), ``rejected_no_coherence`` (the
    two signal branches no longer differ in the signal spin alone),
    ``rejected_dephased`` (still a signal pair but with unequal order).
    """
    from .engine import evolve, init_register_state

    prog = [GRAD, *zmatch_pulses(k, layout), GRAD]
    n = layout.n_register
    rows = []
    for v in range(1 << n):
        pattern = format(v, f"0{n}b")
        st = evolve(init_register_state(layout, {pattern: 1.0}), prog, layout)
        entries = st.entries()
        (b0, g0), (b1, g1) = sorted(entries)
        kept = (b0 ^ b1) == 1 and g0 == g1
        if kept:
            cls = "true_match" if set(pattern[:k]) == {"0"} else "false_match"
        elif (b0 ^ b1) != 1:
            cls = "rejected_no_coherence"
        else:
            cls = "rejected_dephased"
        rows.append({"register": pattern, "k": k, "class": cls})
    return rows
