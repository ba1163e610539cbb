from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from esrqc.chain import ChainError, ChainLayout
from esrqc.engine import GradientStep, Pulse
from esrqc.lang import (
    MacroRef,
    ProgramError,
    ReverseBlock,
    emit,
    expand,
    format_angle,
    parse,
    parse_angle,
    prepare_pulses,
    pulse_count,
    reverse,
    zmatch_pulses,
)


@pytest.mark.parametrize("text,value", [
    ("pi", Fraction(1)), ("-pi", Fraction(-1)), ("1/2pi", Fraction(1, 2)),
    ("pi/4", Fraction(1, 4)), ("3/4*pi", Fraction(3, 4)), ("0", Fraction(0)),
    ("2pi", Fraction(2)),
])
def test_parse_angle(text, value):
    assert parse_angle(text) == value
    assert parse_angle(format_angle(value)) == value


def test_parse_statements():
    prog = parse("turnon\ngrad +\npi 3 10; pi2 1 0\nflip 2\nzmatch 3\nmatch 101\ngrad -\n")
    assert prog == (
        MacroRef("turnon"),
        GradientStep(1),
        Pulse(3, "10"),
        Pulse(1, "0", Fraction(1, 2)),
        MacroRef("flip", (2,)),
        MacroRef("zmatch", (3,)),
        MacroRef("match", ("101",)),
        GradientStep(-1),
    )


def test_parse_collects_all_errors():
    with pytest.raises(ProgramError) as info:
        parse("pi 3 102\nfoo 1\ngrad *\nreverse {\n")
    lines = [ln for ln, _ in info.value.errors]
    assert lines == [1, 2, 3, 4]


def test_unmatched_brace():
    with pytest.raises(ProgramError):
        parse("grad +\n}\n")


def test_expand_prepare_sizes():
    # 2N - 1 pulses for a register of N
    for n in range(2, 9):
        layout = ChainLayout.default(n + 1)
        assert pulse_count(expand(parse("prepare"), layout)) == 2 * n - 1
    assert len(prepare_pulses(ChainLayout.default(5))) == 7


def test_zmatch_shape():
    layout = ChainLayout.default(7)
    assert zmatch_pulses(1, layout) == [Pulse(1, "0")]
    assert zmatch_pulses(3, layout) == [Pulse(2, "10"), Pulse(3, "11"), Pulse(2, "10"), Pulse(1, "0")]
    with pytest.raises(ChainError):
        zmatch_pulses(7, layout)


def test_expand_rejects_bad_condition_width():
    with pytest.raises(ChainError):
        expand(parse("pi 1 00"), ChainLayout.default(4))


def test_reverse_is_inverse_sequence():
    prog = parse("grad +\npulse 2 1X 1/4pi 1/2pi\nprepare\ngrad +")
    rev = reverse(prog)
    assert rev[0] == GradientStep(-1)
    assert rev[1] == ReverseBlock((MacroRef("prepare"),))
    assert rev[2] == Pulse(2, "1X", Fraction(-1, 4), Fraction(1, 2))
    assert reverse(rev) == prog


def test_reverse_block_expands_to_inverse():
    layout = ChainLayout.default(5)
    flat = expand(parse("reverse { prepare }"), layout)
    assert flat == [p.inverse() for p in reversed(prepare_pulses(layout))]


def test_emit_round_trip():
    text = "turnon\ngrad +\npi 3 10\nreverse {\n  match 101\n  pi2 2 X1\n}\ngrad -\n"
    prog = parse(text)
    assert parse(emit(prog)) == prog
    assert "pulse 3 10 pi 0" in emit(prog)


_pulses = st.builds(
    Pulse,
    st.integers(2, 4),
    st.sampled_from(["00", "01", "10", "11", "X0", "1X", "XX"]),
    st.fractions(-1, 2, max_denominator=8).filter(lambda f: -2 < f <= 2),
    st.fractions(-1, 1, max_denominator=8),
)
_nodes = st.one_of(_pulses, st.builds(GradientStep, st.sampled_from([1, -1])),
                   st.just(MacroRef("prepare")), st.just(MacroRef("zmatch", (2,))))


@given(st.lists(_nodes, max_size=12))
def test_emit_parse_round_trip_property(nodes):
    prog = tuple(nodes)
    assert parse(emit(prog)) == prog
    rev = reverse(prog)
    assert parse(emit(rev)) == rev
