from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esrqc.chain import ChainError, ChainLayout, LineId
from esrqc.engine import (
    GradientStep,
    Pulse,
    apply_gradient,
    apply_pulse,
    evolve,
    fid_line,
    fidelity,
    init_register_state,
    init_state,
    line_table,
    register_index,
    register_pattern,
    rotation_matrix,
)
from esrqc.lang import reverse

LAYOUT = ChainLayout.default(5)


def test_rotation_matrix_exact_at_quarter_turns():
    assert np.array_equal(rotation_matrix(Fraction(1), Fraction(0)), np.array([[0, -1j], [-1j, 0]]))
    assert np.array_equal(rotation_matrix(Fraction(2), Fraction(0)), -np.eye(2))
    half = rotation_matrix(Fraction(1, 2), Fraction(1, 2))
    assert np.allclose(half @ half.conj().T, np.eye(2), atol=1e-15)


def test_pi_pulse_on_matching_component():
    # |0>|000> with spin 2 cond "00": signal and spin 3 are 0
    out = apply_pulse(init_state(LAYOUT, 0), Pulse(2, "00"), LAYOUT)
    assert out.entries() == {(0b10, 0): -1j}


def test_pulse_skips_non_matching_component():
    out = apply_pulse(init_state(LAYOUT, 0), Pulse(2, "10"), LAYOUT)
    assert out.entries() == {(0, 0): 1}


def test_two_pi_inverse_is_itself():
    p = Pulse(2, "XX", Fraction(2))
    assert p.inverse() == p
    assert Pulse(2, "XX", Fraction(1, 2)).inverse().angle == Fraction(-1, 2)


def test_pulse_validation():
    with pytest.raises(ValueError):
        Pulse(2, "00", Fraction(3))
    with pytest.raises(ChainError):
        apply_pulse(init_state(LAYOUT, 0), Pulse(1, "00"), LAYOUT)
    with pytest.raises(ChainError):
        apply_pulse(init_state(LAYOUT, 0), Pulse(9, "0"), LAYOUT)


def test_gradient_shifts_order_by_weight():
    st = init_state(LAYOUT, 0b10110)
    out = apply_gradient(st, GradientStep(1), LAYOUT)
    assert out.entries() == {(0b10110, 3): 1}
    back = apply_gradient(out, GradientStep(-1), LAYOUT)
    assert back.entries() == {(0b10110, 0): 1}


def test_custom_gradient_coefficients():
    layout = ChainLayout.alternating(4, 1, 3, gradient=(1, 2, 3, 4))
    out = apply_gradient(init_state(layout, 0b1010), GradientStep(1), layout)
    assert out.entries() == {(0b1010, 6): 1}


def test_turnon_line_on_ground_state():
    st = apply_pulse(init_state(LAYOUT, 0), Pulse(1, "0", Fraction(1, 2)), LAYOUT)
    assert abs(fid_line(st, LineId(1, "0"), LAYOUT)) == pytest.approx(0.5)
    assert fid_line(st, LineId(1, "1"), LAYOUT) == 0


def test_echo_needs_equal_order():
    st = apply_pulse(init_state(LAYOUT, 0), Pulse(1, "0", Fraction(1, 2)), LAYOUT)
    # the |1> branch carries weight 1, the |0> branch weight 0
    dephased = apply_gradient(st, GradientStep(1), LAYOUT)
    assert fid_line(dephased, LineId(1, "0"), LAYOUT) == 0
    echo = evolve(dephased, [Pulse(1, "0"), GradientStep(1)], LAYOUT)
    assert abs(fid_line(echo, LineId(1, "0"), LAYOUT)) == pytest.approx(0.5)


def test_register_patterns():
    assert register_index("101") == 0b1010
    assert register_pattern(0b1010, 3) == "101"
    st = init_register_state(LAYOUT, {"1000": 1.0})
    assert set(b for b, _ in st.entries()) == {0b0010, 0b0011}
    with pytest.raises(ValueError):
        init_register_state(LAYOUT, {"1000": 0.5})


def test_dense_size_limit():
    with pytest.raises(ChainError):
        init_state(ChainLayout.default(17), 0)


def test_line_table_covers_all_lines():
    assert set(line_table(init_state(LAYOUT, 0), LAYOUT)) == set(LAYOUT.lines())


_conds = {1: ["0", "1", "X"], 5: ["0", "1", "X"]}
_pulse = st.builds(
    lambda spin, c, a, p: Pulse(spin, c if spin in (1, 5) else c * 2 if len(c) == 1 else c, a, p),
    st.integers(1, 5),
    st.sampled_from(["0", "1", "X", "00", "01", "10", "11", "X0", "1X"]),
    st.integers(-7, 8).map(lambda k: Fraction(k, 4)),
    st.integers(-4, 4).map(lambda k: Fraction(k, 4)),
).filter(lambda p: len(p.cond) == (1 if p.spin in (1, 5) else 2))
_instr = st.one_of(_pulse, st.sampled_from([GradientStep(1), GradientStep(-1)]))


@settings(max_examples=60, deadline=None)
@given(st.lists(_instr, max_size=25), st.integers(0, 31))
def test_program_then_reverse_restores(prog, basis):
    start = init_state(LAYOUT, basis)
    out = evolve(start, list(prog) + list(reverse(prog)), LAYOUT)
    assert fidelity(start, out) >= 1 - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(_instr, max_size=25), st.integers(0, 31))
def test_evolution_preserves_norm(prog, basis):
    out = evolve(init_state(LAYOUT, basis), prog, LAYOUT)
    assert out.norms()[0] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(_pulse, st.integers(0, 31))
def test_pulse_locality(pulse, basis):
    """A pulse changes only its target spin's bit."""
    out = apply_pulse(init_state(LAYOUT, basis), pulse, LAYOUT)
    mask = ~(1 << (pulse.spin - 1))
    for b, _ in out.entries(tol=1e-15):
        assert b & mask == basis & mask
