"""Spin chain layout, basis conventions and the resonance line table.

Spin 1 is the signal spin; spins 2..N+1 form the computing register.
Basis index bit ``k - 1`` holds spin ``k`` and ``1`` means the excited
state.  A neighbour condition for an interior spin is two characters
``(left, right)`` over ``{0, 1, X}``; edge spins take a single character
for their only neighbour.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import NamedTuple, Sequence


class ChainError(ValueError):
    """Invalid spin index, condition pattern or layout parameters."""


class LineId(NamedTuple):
    spin: int
    cond: str

    def key(self) -> str:
        return f"{self.spin}:{self.cond}"

    @classmethod
    def from_key(cls, text: str) -> "LineId":
        spin, _, cond = text.partition(":")
        return cls(int(spin), cond)


@dataclass(frozen=True)
class ChainLayout:
    total_spins: int
    base_freq: tuple[float, ...]
    coupling: tuple[float, ...]
    linewidth: float = 0.1
    # per-spin integer gradient coefficients; None means a uniform gradient
    gradient: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.total_spins < 2:
            raise ChainError(f"total_spins must be >= 2, got {self.total_spins}")
        object.__setattr__(self, "base_freq", tuple(float(w) for w in self.base_freq))
        object.__setattr__(self, "coupling", tuple(float(j) for j in self.coupling))
        if len(self.base_freq) != self.total_spins:
            raise ChainError(
                f"base_freq has {len(self.base_freq)} entries for {self.total_spins} spins"
            )
        if len(self.coupling) != self.total_spins - 1:
            raise ChainError(
                f"coupling has {len(self.coupling)} entries, need {self.total_spins - 1} bonds"
            )
        if self.gradient is not None:
            object.__setattr__(self, "gradient", tuple(int(g) for g in self.gradient))
            if len(self.gradient) != self.total_spins or min(self.gradient) < 0:
                raise ChainError("gradient needs one non-negative integer per spin")
        if not self.linewidth > 0:
            raise ChainError(f"linewidth must be positive, got {self.linewidth}")

    @classmethod
    def default(cls, total_spins: int, linewidth: float = 0.1) -> "ChainLayout":
        """``omega_n = 100 + 10 n`` with bond couplings alternating 1, 3."""
        return cls.alternating(total_spins, 1.0, 3.0, linewidth=linewidth)

    @classmethod
    def alternating(
        cls,
        total_spins: int,
        j_odd: float,
        j_even: float,
        base_freq: Sequence[float] | None = None,
        linewidth: float = 0.1,
        gradient: Sequence[int] | None = None,
    ) -> "ChainLayout":
        if base_freq is None:
            base_freq = [100.0 + 10.0 * n for n in range(1, total_spins + 1)]
        coupling = [j_odd if b % 2 == 1 else j_even for b in range(1, total_spins)]
        return cls(total_spins, tuple(base_freq), tuple(coupling), linewidth,
                   None if gradient is None else tuple(gradient))

    @property
    def n_register(self) -> int:
        return self.total_spins - 1

    @property
    def dim(self) -> int:
        return 1 << self.total_spins

    @property
    def gradient_coeffs(self) -> tuple[int, ...]:
        return self.gradient if self.gradient is not None else (1,) * self.total_spins

    def bond(self, left_spin: int) -> float:
        """Coupling of bond (left_spin, left_spin + 1)."""
        return self.coupling[left_spin - 1]

    def is_edge(self, spin: int) -> bool:
        return spin == 1 or spin == self.total_spins

    def cond_width(self, spin: int) -> int:
        self.check_spin(spin)
        return 1 if self.is_edge(spin) else 2

    def check_spin(self, spin: int) -> None:
        if not 1 <= spin <= self.total_spins:
            raise ChainError(f"spin {spin} outside 1..{self.total_spins}")

    def check_cond(self, spin: int, cond: str, allow_x: bool = True) -> None:
        width = self.cond_width(spin)
        if len(cond) != width:
            raise ChainError(
                f"condition {cond!r} for spin {spin} must have {width} character(s)"
            )
        allowed = "01X" if allow_x else "01"
        bad = [c for c in cond if c not in allowed]
        if bad:
            raise ChainError(f"condition {cond!r} has invalid characters {bad}")

    def neighbours(self, spin: int) -> tuple[int, ...]:
        """Neighbour spins in condition order (left, right)."""
        self.check_spin(spin)
        if spin == 1:
            return (2,)
        if spin == self.total_spins:
            return (spin - 1,)
        return (spin - 1, spin + 1)

    def check_invariants(self) -> list[str]:
        problems = []
        for a, b in combinations(range(self.total_spins), 2):
            if self.base_freq[a] == self.base_freq[b]:
                problems.append(f"spins {a + 1} and {b + 1} share base frequency")
        for b in range(len(self.coupling) - 1):
            if self.coupling[b] == self.coupling[b + 1]:
                problems.append(f"bonds {b + 1} and {b + 2} have equal coupling")
        return problems

    def lines(self) -> list[LineId]:
        out = []
        for spin in range(1, self.total_spins + 1):
            for bits in product("01", repeat=self.cond_width(spin)):
                out.append(LineId(spin, "".join(bits)))
        return out


def bit(basis: int, spin: int) -> int:
    return (basis >> (spin - 1)) & 1


def line_frequency(layout: ChainLayout, line: LineId) -> float:
    spin, cond = line
    layout.check_cond(spin, cond, allow_x=False)
    freq = layout.base_freq[spin - 1]
    for neighbour, c in zip(layout.neighbours(spin), cond):
        if c == "1":
            freq += layout.bond(min(spin, neighbour))
    return freq


def cond_matches(basis: int, spin: int, cond: str, layout: ChainLayout) -> bool:
    layout.check_cond(spin, cond)
    return all(
        c == "X" or int(c) == bit(basis, neighbour)
        for neighbour, c in zip(layout.neighbours(spin), cond)
    )


@dataclass
class AddressabilityReport:
    lines: list[tuple[LineId, float]]
    min_gap: float
    collisions: list[tuple[LineId, LineId, float]] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    @property
    def addressable(self) -> bool:
        return not self.collisions and not self.problems

    def to_dict(self) -> dict:
        return {
            "addressable": self.addressable,
            "min_gap": self.min_gap,
            "lines": [{"line": l.key(), "frequency": f} for l, f in self.lines],
            "collisions": [
                {"a": a.key(), "b": b.key(), "gap": g} for a, b, g in self.collisions
            ],
            "problems": list(self.problems),
        }


def addressability_report(layout: ChainLayout) -> AddressabilityReport:
    table = [(line, line_frequency(layout, line)) for line in layout.lines()]
    ordered = sorted(table, key=lambda item: item[1])
    min_gap = float("inf")
    collisions = []
    # sorted neighbours give the minimum; collisions need every close pair
    for i, (la, fa) in enumerate(ordered):
        for lb, fb in ordered[i + 1:]:
            gap = fb - fa
            if gap >= layout.linewidth:
                break
            collisions.append((la, lb, gap))
        if i + 1 < len(ordered):
            min_gap = min(min_gap, ordered[i + 1][1] - fa)
    return AddressabilityReport(table, min_gap, collisions, layout.check_invariants())
