"""Verification suites shared by the test-suite and ``esrqc verify``.

Truth-table checks use the oracle alone; the differential and
reversibility checks pit the engine against the oracle or against itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .chain import ChainLayout
from .engine import GradientStep, Pulse, evolve, fidelities, init_basis_batch
from .lang import prepare_pulses, reverse, zmatch_pulses
from .oracle import assert_equiv, density_reference, truth_table
from .thermal import ThermalSpec, build_ensemble, run_program


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    failures: list[str] = field(default_factory=list)
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"name": self.name, "checked": self.checked, "failed": len(self.failures),
                "worst_deviation": self.worst, "failures": self.failures[:20]}


def _bits(v: int, n: int) -> str:
    return format(v, f"0{n}b") if n else ""


def _basis(sigma: int, register: str) -> int:
    idx = sigma
    for j, c in enumerate(register):
        idx |= int(c) << (j + 1)
    return idx


def _split(basis: int, n: int) -> tuple[int, str]:
    return basis & 1, "".join(str((basis >> (j + 1)) & 1) for j in range(n))


def random_program(rng: np.random.Generator, layout: ChainLayout,
                   max_pulses: int = 40, max_grad_pairs: int = 3) -> list:
    prog: list = []
    for _ in range(int(rng.integers(1, max_pulses + 1))):
        spin = int(rng.integers(1, layout.total_spins + 1))
        cond = "".join(rng.choice(list("01X"), size=layout.cond_width(spin)))
        angle = Fraction(int(rng.integers(-7, 9)), 4)
        phase = Fraction(int(rng.integers(0, 8)), 4)
        prog.append(Pulse(spin, cond, angle, phase))
    for _ in range(2 * int(rng.integers(0, max_grad_pairs + 1))):
        pos = int(rng.integers(0, len(prog) + 1))
        prog.insert(pos, GradientStep(int(rng.choice([1, -1]))))
    return prog


def prepare_table_suite(n_values=range(4, 8)) -> SuiteResult:
    """Published preparation mappings, checked row by row on the oracle table."""
    res = SuiteResult("prepare truth tables")
    for n in n_values:
        layout = ChainLayout.default(n + 1)
        tt = truth_table(prepare_pulses(layout), layout)
        if not tt.is_permutation:
            res.failures.append(f"N={n}: prepare is not a basis permutation")
            continue

        def image(sigma, reg):
            return _split(tt.image(_basis(sigma, reg)), n)

        def expect(cond, msg):
            res.checked += 1
            if not cond:
                res.failures.append(f"N={n}: {msg}")

        ones = "1" * (n - 1) + "0"
        expect(image(1, "0" * n) == (0, ones), "|1>|0..0> -> |0>|1..10>")
        expect(image(0, "0" * n) == (1, ones), "|0>|0..0> -> |1>|1..10>")
        # first 1 after m zeros, with a nonempty tail A
        for m in range(1, n - 1):
            tail = n - m - 1
            seen = {}
            for a in range(1 << tail):
                big_a = _bits(a, tail)
                reg = "0" * m + "1" + big_a
                s1, r1 = image(1, reg)
                s0, r0 = image(0, reg)
                a1, a0 = r1[m + 1:], r0[m + 1:]
                if m == 1:
                    want1, want0 = (1, "00"), (1, "10")
                else:
                    want1 = (0, "1" * (m - 1) + "00")
                    want0 = (1, "1" * m + "0")
                expect((s1, r1[:m + 1]) == want1 and (s0, r0[:m + 1]) == want0,
                       f"m={m} A={big_a}: images {s1}|{r1}, {s0}|{r0}")
                expect(a1 == a0, f"m={m} A={big_a}: tails differ {a1} vs {a0}")
                diff = [j for j in range(n) if r1[j] != r0[j]]
                expect(diff == [m - 1], f"m={m} A={big_a}: register differs at {diff}")
                seen.setdefault(a1, big_a)
                expect(seen[a1] == big_a, f"m={m}: A'' not unique for A={big_a}")
    return res


def zmatch_table_suite(n: int = 6, ks=range(2, 6)) -> SuiteResult:
    res = SuiteResult("zmatch truth tables")
    layout = ChainLayout.default(n + 1)
    for k in ks:
        tt = truth_table(zmatch_pulses(k, layout), layout)

        def image(sigma, reg):
            return _split(tt.image(_basis(sigma, reg)), n)

        def expect(cond, msg):
            res.checked += 1
            if not cond:
                res.failures.append(f"k={k}: {msg}")

        tail = n - k
        for a in range(1 << tail):
            big_a = _bits(a, tail)
            for sigma in (0, 1):
                reg = "0" * k + big_a
                expect(image(sigma, reg) == (1 - sigma, reg), f"|{sigma}>|{reg}> not conjugated")
            reg = "0" * (k - 1) + "1" + big_a
            expect(image(1, reg) == (1, "1" * k + big_a), f"|1>|{reg}> not marked")
            expect(image(0, reg) == (1, reg), f"|0>|{reg}> not left with signal 1")
        if k == 2:
            tail = n - 2
            for a in range(1 << tail):
                big_a = _bits(a, tail)
                expect(image(1, "01" + big_a) == (1, "11" + big_a), "|1>|01A> -> |1>|11A>")
                expect(image(1, "00" + big_a) == (0, "00" + big_a), "|1>|00A> -> |0>|00A>")
                expect(image(0, "00" + big_a) == (1, "00" + big_a), "|0>|00A> -> |1>|00A>")
                expect(image(0, "01" + big_a) == (1, "01" + big_a), "|0>|01A> -> |1>|01A>")
    return res


def reversibility_suite(n_programs: int = 100, seed: int = 0, max_register: int = 6,
                        tol: float = 1e-12) -> SuiteResult:
    res = SuiteResult("reversibility")
    rng = np.random.default_rng(seed)
    for i in range(n_programs):
        n = int(rng.integers(2, max_register + 1))
        layout = ChainLayout.default(n + 1)
        prog = random_program(rng, layout)
        start = init_basis_batch(layout, np.arange(layout.dim))
        # a coherent start exercises phases as well as populations
        start.amps[:, 0, :] = rng.normal(size=(layout.dim, layout.dim)) + 1j * rng.normal(
            size=(layout.dim, layout.dim))
        start.amps /= np.sqrt(start.norms())[:, None, None]
        back = evolve(evolve(start, prog, layout), reverse(prog), layout)
        worst = float(np.max(1 - fidelities(start, back)))
        res.checked += 1
        res.worst = max(res.worst, worst)
        if worst > tol:
            res.failures.append(f"program {i} (N={n}): 1 - fidelity = {worst:.3g}")
    return res


def differential_suite(n_programs: int = 100, seed: int = 1, max_register: int = 5,
                       grid_m: int = 64, tol: float = 1e-10, perturb: float = 0.0) -> SuiteResult:
    """Exact-mode engine line tables against the gradient-grid density matrix."""
    res = SuiteResult("engine vs oracle")
    rng = np.random.default_rng(seed)
    for i in range(n_programs):
        n = int(rng.integers(1, max_register + 1))
        layout = ChainLayout.default(n + 1)
        x = tuple(float(v) for v in rng.uniform(0, 3, size=layout.total_spins))
        thermal = ThermalSpec(x)
        prog = random_program(rng, layout)
        _, report = run_program(build_ensemble(layout, thermal), prog, snapshot_lines=False)
        engine = dict(report.lines)
        if perturb:
            first = next(iter(engine))
            engine[first] += perturb
        ref = density_reference(layout, np.array(x), prog, grid_m)
        eq = assert_equiv(engine, ref, tol)
        res.checked += 1
        res.worst = max(res.worst, eq.max_deviation)
        if not eq.passed:
            res.failures.append(f"program {i} (N={n}): line {eq.worst_line.key()} off by "
                                f"{eq.max_deviation:.3g}")
    return res


def sampled_suite(n_programs: int = 20, seed: int = 2, max_register: int = 5,
                  tol: float = 1e-10) -> SuiteResult:
    """Explicit gradient-phase grid against exact order bookkeeping."""
    res = SuiteResult("sampled vs exact")
    rng = np.random.default_rng(seed)
    for i in range(n_programs):
        n = int(rng.integers(1, max_register + 1))
        layout = ChainLayout.default(n + 1)
        thermal = ThermalSpec(float(rng.uniform(0, 3)))
        prog = random_program(rng, layout)
        steps = sum(isinstance(p, GradientStep) for p in prog)
        grid = 2 * layout.total_spins * max(steps, 1) + 1
        _, exact = run_program(build_ensemble(layout, thermal), prog, snapshot_lines=False)
        _, sampled = run_program(build_ensemble(layout, thermal, mode="sampled", grid=grid),
                                 prog, snapshot_lines=False)
        eq = assert_equiv(sampled.lines, exact.lines, tol)
        res.checked += 1
        res.worst = max(res.worst, eq.max_deviation)
        if not eq.passed:
            res.failures.append(f"program {i}: line {eq.worst_line.key()} off by "
                                f"{eq.max_deviation:.3g}")
    return res


def run_all(seed: int = 0, n_programs: int = 100, perturb: float = 0.0) -> list[SuiteResult]:
    return [
        prepare_table_suite(),
        zmatch_table_suite(),
        reversibility_suite(n_programs, seed),
        differential_suite(n_programs, seed + 1, perturb=perturb),
        sampled_suite(max(1, n_programs // 5), seed + 2),
    ]
