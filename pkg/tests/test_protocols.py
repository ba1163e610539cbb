import math

import pytest

from esrqc.chain import ChainError, ChainLayout
from esrqc.engine import init_register_state
from esrqc.protocols import (
    AmbiguityError,
    DescentStrategy,
    build_periodic_state,
    build_shifted_periodic_state,
    classify_zmatch,
    find_smallest_element,
    grover_readout,
    measure_pattern,
    parse_register_value,
    periodic_terms,
    prepare_pipeline,
    small_angle_probe,
)
from esrqc.thermal import ThermalSpec, build_ensemble, from_state


def load(amps, n):
    layout = ChainLayout.default(n + 1)
    return from_state(layout, init_register_state(layout, amps))


def test_measure_pattern_weight_and_unwind():
    amps = {"0110": math.sqrt(0.3), "1001": math.sqrt(0.7)}
    ens = load(amps, 4)
    signal, after, trace = measure_pattern(ens, "0110")
    assert abs(signal) / 0.5 == pytest.approx(0.3, abs=1e-12)
    assert after.state.entries() == pytest.approx(ens.state.entries())
    assert trace.interrogations == 1


def test_single_block_has_false_matches():
    n = 5
    amp = 1 / math.sqrt(1 << n)
    ens = load({format(v, f"0{n}b"): amp for v in range(1 << n)}, n)
    staged, _, _ = measure_pattern(ens, "00000")
    single, _, _ = measure_pattern(ens, "00000", staged=False)
    assert abs(staged) / 0.5 == pytest.approx(2.0**-n)
    assert abs(abs(single) / 0.5 - 2.0**-n) > 0.05


def test_measure_pattern_rejects_bad_pattern():
    with pytest.raises(ChainError):
        measure_pattern(load({"00": 1.0}, 2), "0101")


def test_pipeline_signed_and_incoherent_echo():
    layout = ChainLayout.default(5)
    res = prepare_pipeline(build_ensemble(layout, ThermalSpec(0.0)))
    w = res.computational_weight()
    assert w == pytest.approx(2 / 32)
    assert res.incoherent_ratio == pytest.approx(w)
    # |0>|0000> and |1>|0000> echo with opposite sign
    assert res.signed_ratio == pytest.approx(0.0, abs=1e-12)


def test_periodic_builder():
    st = build_periodic_state(4, 3)
    assert sorted(st) == ["0000", "0011", "0110", "1001", "1100", "1111"]
    assert periodic_terms(4, 3) == 6
    assert len(build_periodic_state(4, 16)) == 1
    with pytest.raises(ValueError):
        build_periodic_state(4, 17)


def test_shifted_builder_matches_modular_exponentiation():
    st = build_shifted_periodic_state(4, 2, 15, 0)
    for a in range(16):
        key = format(a, "04b") + format(pow(2, a, 15), "04b")
        assert key in st
    assert sum(abs(v) ** 2 for v in st.values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        build_shifted_periodic_state(4, 3, 15, 0)
    with pytest.raises(ChainError):
        build_shifted_periodic_state(4, 2, 15, 0, n_register=6)


@pytest.mark.parametrize("strategy", list(DescentStrategy))
@pytest.mark.parametrize("w,t", [(5, 3), (6, 8), (4, 1)])
def test_smallest_element_on_single_dominant_states(strategy, w, t):
    amps = {"0" * w: math.sqrt(0.5), format(t, f"0{w}b"): math.sqrt(0.5)}
    value, trace = find_smallest_element(load(amps, w), strategy)
    assert value == t
    assert trace.result["verified"]


def test_exhaustive_scan_on_periodic_state():
    ens = load(build_periodic_state(6, 5), 6)
    value, trace = find_smallest_element(ens, "exhaustive_scan")
    assert value == 5
    assert trace.result["signal"] == pytest.approx(1 / periodic_terms(6, 5))


def test_smallest_element_of_first_register_only():
    ens = load(build_shifted_periodic_state(4, 7, 15, 1), 8)
    value, _ = find_smallest_element(ens, "cumulative", width=4)
    assert value == 1


def test_smallest_element_none_for_zero_register():
    value, trace = find_smallest_element(load({"0000": 1.0}, 4), "exhaustive_scan")
    assert value is None and trace.result["found"] is False


def test_grover_readout_and_budget():
    n, answer = 6, "110010"
    rest = math.sqrt(0.2 / ((1 << n) - 1))
    amps = {format(v, f"0{n}b"): rest for v in range(1 << n)}
    amps[answer] = math.sqrt(0.8)
    bits, trace = grover_readout(load(amps, n))
    assert bits == answer
    assert trace.pulse_count <= 3 * n * n


def test_grover_ambiguity():
    amps = {"0011": math.sqrt(0.5), "1100": math.sqrt(0.5)}
    with pytest.raises(AmbiguityError):
        grover_readout(load(amps, 4), 0.6)


def test_small_angle_probe_decodes_basis_state():
    layout = ChainLayout.default(9)
    ens = from_state(layout, init_register_state(layout, {"10100010": 1.0}, signal_coherent=False))
    probe = small_angle_probe(ens)
    assert probe.bits == "10100010"
    assert probe.strongest[3].cond == "11"
    assert probe.strongest[4].cond == "00"
    assert probe.strongest[5].cond == "10"


@pytest.mark.parametrize("text,width,out", [("1011", 4, "1011"), ("0b11", 4, "11"),
                                             ("d5", 4, "0101")])
def test_parse_register_value(text, width, out):
    assert parse_register_value(text, width) == out


@pytest.mark.parametrize("text", ["12", "d40", "0b"])
def test_parse_register_value_errors(text):
    with pytest.raises(ValueError):
        parse_register_value(text, 4)


def test_zmatch_classification():
    layout = ChainLayout.default(6)
    for k in range(1, 6):
        rows = classify_zmatch(layout, k)
        assert len(rows) == 32
        for row in rows:
            reg = row["register"]
            if set(reg[:k]) == {"0"}:
                assert row["class"] == "true_match"
            elif row["class"] == "false_match":
                # first 1 falls inside the ladder, on spins 3..k
                first = reg.index("1") + 2
                assert 3 <= first <= k
