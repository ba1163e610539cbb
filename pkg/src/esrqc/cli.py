"""Command-line front end: ``esrqc {run,spectrum,shor,grover,verify}``.

Exit codes: 0 ok, 2 usage, 3 config, 4 runtime, 5 verification failure,
6 program parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from itertools import product
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, kernels
from .chain import ChainError, ChainLayout, addressability_report
from .engine import init_register_state
from .lang import ProgramError, emit, parse
from .protocols import (
    AmbiguityError,
    DescentStrategy,
    build_periodic_state,
    build_shifted_periodic_state,
    classify_zmatch,
    find_smallest_element,
    grover_readout,
    parse_register_value,
    periodic_terms,
    small_angle_probe,
)
from .thermal import DEFAULT_DETECT, ThermalSpec, build_ensemble, from_state, run_program
from .verify import run_all

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY, EXIT_PARSE = 0, 2, 3, 4, 5, 6

_NUM_OR_INF = {"oneOf": [{"type": "number", "minimum": 0}, {"enum": ["inf"]}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "spins": {"type": "integer", "minimum": 2, "maximum": 16},
        "base_freq": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"offset": {"type": "number"}, "step": {"type": "number"}},
                },
            ]
        },
        "couplings": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "linewidth": {"type": "number", "exclusiveMinimum": 0},
        "gradient": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "thermal": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x": {"oneOf": [_NUM_OR_INF, {"type": "array", "items": _NUM_OR_INF}]},
                "scaled": {"type": "boolean"},
                "omega_ref": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "mode": {"enum": ["exact", "sampled"]},
        "grid": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "draws": {"type": ["integer", "null"], "minimum": 1},
        "weight_floor": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "detect": {"type": "number", "exclusiveMinimum": 0},
                "dominance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "element": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "strategies": {
            "type": "array",
            "items": {"enum": [s.value for s in DescentStrategy]},
        },
        "out": {"type": "string"},
    },
}

DEFAULTS = {
    "couplings": [1.0, 3.0],
    "linewidth": 0.1,
    "thermal": {"x": "inf"},
    "mode": "exact",
    "grid": 64,
    "seed": 0,
    "draws": None,
    "weight_floor": 0.0,
    "thresholds": {"detect": DEFAULT_DETECT, "dominance": 0.6, "element": 0.01},
    "strategies": ["exhaustive_scan", "cumulative", "unwind_each"],
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    raw = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid at {list(exc.absolute_path)}: {exc.message}") from exc
    cfg = {**DEFAULTS, **raw}
    cfg["thresholds"] = {**DEFAULTS["thresholds"], **raw.get("thresholds", {})}
    return cfg


def _inf(v):
    return float("inf") if v == "inf" else float(v)


def make_layout(cfg: dict, n_register: int | None = None) -> ChainLayout:
    spins = cfg.get("spins")
    if spins is None:
        spins = (n_register or 4) + 1
    elif n_register is not None and spins - 1 < n_register:
        raise ConfigError(f"config has {spins} spins; need a register of {n_register}")
    bf = cfg.get("base_freq", {"offset": 100.0, "step": 10.0})
    if isinstance(bf, dict):
        freqs = [bf.get("offset", 100.0) + bf.get("step", 10.0) * n for n in range(1, spins + 1)]
    else:
        freqs = bf
    j_odd, j_even = cfg["couplings"]
    try:
        return ChainLayout.alternating(spins, j_odd, j_even, base_freq=freqs,
                                       linewidth=cfg["linewidth"], gradient=cfg.get("gradient"))
    except ChainError as exc:
        raise ConfigError(str(exc)) from exc


def make_thermal(cfg: dict, layout: ChainLayout) -> ThermalSpec:
    t = cfg["thermal"]
    x = t.get("x", "inf")
    if isinstance(x, list):
        return ThermalSpec(tuple(_inf(v) for v in x))
    if t.get("scaled"):
        return ThermalSpec.scaled(_inf(x), layout, t.get("omega_ref"))
    return ThermalSpec(_inf(x))


def cplx(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag, "abs": abs(z)}


def lines_json(table: dict) -> dict:
    return {line.key(): cplx(v) for line, v in sorted(table.items())}


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, target)


def emit_report(report: dict, cfg: dict, args, stem: str) -> str:
    report = {
        "metadata": {"tool": "esrqc", "version": __version__, "seed": cfg["seed"],
                     "command": stem},
        "config": cfg,
        **report,
    }
    text = json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n"
    out = args.out or cfg.get("out")
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)
    return text


def _apply_overrides(cfg: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "mode", None):
        cfg["mode"] = args.mode
    if getattr(args, "strategy", None):
        cfg["strategies"] = list(args.strategy)
    return cfg


def cmd_run(args, cfg) -> int:
    try:
        program = parse(Path(args.program).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read program: {exc}") from exc
    layout = make_layout(cfg)
    thermal = make_thermal(cfg, layout)
    ens = build_ensemble(layout, thermal, mode=cfg["mode"], weight_floor=cfg["weight_floor"],
                         grid=cfg["grid"], seed=cfg["seed"], draws=cfg["draws"])
    _, report = run_program(ens, program)
    detect = cfg["thresholds"]["detect"] * abs(report.reference)
    emit_report({
        "program": emit(program).splitlines(),
        "expanded": emit(report.expanded).splitlines(),
        "pulse_count": report.pulse_count,
        "molecules": ens.n_molecules,
        "reference": cplx(report.reference),
        "blocks": [{"after_instruction": i, "lines": lines_json(t)} for i, t in report.snapshots],
        "lines": lines_json(report.lines),
        "detected": sorted(l.key() for l, v in report.lines.items() if abs(v) > detect),
    }, cfg, args, "run")
    return EXIT_OK


def cmd_spectrum(args, cfg) -> int:
    layout = make_layout(cfg)
    rep = addressability_report(layout)
    text = emit_report({"spectrum": rep.to_dict()}, cfg, args, "spectrum")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spin", "cond", "frequency"])
    for line, f in rep.lines:
        w.writerow([line.spin, line.cond, repr(f)])
    out = args.out or cfg.get("out")
    if out:
        write_atomic(str(Path(out).with_suffix(".csv")), buf.getvalue())
    return EXIT_OK if text else EXIT_RUNTIME


def _readouts(ens, width: int, cfg) -> dict:
    results = {}
    for name in cfg["strategies"]:
        value, trace = find_smallest_element(ens, name, cfg["thresholds"]["element"], width=width)
        results[name] = {
            "value": value,
            "found": trace.result.get("found", False),
            "verified": trace.result.get("verified"),
            "signal": trace.result.get("signal"),
            "failure": trace.result.get("failure"),
            "pulse_count": trace.pulse_count,
            "budget_constant": trace.pulse_count / width**2,
            "trace": [s.to_dict() for s in trace.steps if s.signal is not None],
        }
    return results


def cmd_shor(args, cfg) -> int:
    if args.period is not None:
        amps = build_periodic_state(args.w_bits, args.period)
        layout = make_layout(cfg, args.w_bits)
        ens = from_state(layout, init_register_state(layout, amps))
        r = periodic_terms(args.w_bits, args.period)
        body = {"state": {"kind": "periodic", "w_bits": args.w_bits, "period": args.period,
                          "terms": r, "expected_ratio": 1 / r},
                "readouts": _readouts(ens, args.w_bits, cfg)}
    else:
        if args.x is None or args.modulus is None:
            raise ConfigError("shor needs --period, or --x and --modulus")
        m_bits = (args.modulus - 1).bit_length()
        amps = build_shifted_periodic_state(args.w_bits, args.x, args.modulus, args.s)
        layout = make_layout(cfg, args.w_bits + m_bits)
        ens = from_state(layout, init_register_state(layout, amps))
        norm = sum(abs(a) ** 2 for a in amps.values())
        body = {"state": {"kind": "shifted", "w_bits": args.w_bits, "x": args.x,
                          "modulus": args.modulus, "s": args.s, "terms": len(amps), "norm": norm},
                "readouts": _readouts(ens, args.w_bits, cfg)}
    if args.classify:
        body["zmatch_classes"] = [row for k in range(1, layout.n_register + 1)
                                  for row in classify_zmatch(layout, k)]
    emit_report(body, cfg, args, "shor")
    return EXIT_OK


def dominant_state(answer: str, weight: float) -> dict[str, complex]:
    n = len(answer)
    rest = (1 - weight) / ((1 << n) - 1)
    return {"".join(p): math.sqrt(weight if "".join(p) == answer else rest)
            for p in product("01", repeat=n)}


def cmd_grover(args, cfg) -> int:
    width = len(args.answer.removeprefix("0b")) if not args.answer.startswith("d") else None
    if width is None:
        width = max(1, int(args.answer[1:]).bit_length())
    answer = parse_register_value(args.answer, width)
    if not 0.5 < args.weight <= 1:
        raise ConfigError("weight must lie in (0.5, 1]")
    layout = make_layout(cfg, len(answer))
    answer = answer.ljust(layout.n_register, "0")
    amps = dominant_state(answer, args.weight)
    ens = from_state(layout, init_register_state(layout, amps))
    body = {"answer": answer, "weight": args.weight}
    try:
        bits, trace = grover_readout(ens, cfg["thresholds"]["dominance"])
        body["grover"] = {"bits": bits, "recovered": bits == answer, **trace.to_dict(),
                          "budget_constant": trace.pulse_count / layout.n_register**2}
    except AmbiguityError as exc:
        body["grover"] = {"error": str(exc), "recovered": False}
    probe_ens = from_state(layout, init_register_state(layout, amps, signal_coherent=False))
    try:
        probe = small_angle_probe(probe_ens)
        s2 = probe.strongest.get(2)
        body["probe"] = {
            "bits": probe.bits,
            "recovered": probe.bits == answer,
            "strongest": {str(k): (v.key() if v else None) for k, v in probe.strongest.items()},
            "spin2_strongest": None if s2 is None else s2.key(),
            "lines": lines_json(probe.lines),
        }
    except AmbiguityError as exc:
        body["probe"] = {"error": str(exc), "recovered": False}
    emit_report(body, cfg, args, "grover")
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    suites = run_all(seed=cfg["seed"], n_programs=args.programs, perturb=args.perturb)
    ok = all(s.passed for s in suites)
    emit_report({"passed": ok, "backend": kernels.BACKEND,
                 "suites": [s.to_dict() for s in suites]}, cfg, args, "verify")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esrqc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="report path (stdout when omitted)")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=["exact", "sampled"])
    common.add_argument("--strategy", action="append",
                        choices=[s.value for s in DescentStrategy])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="execute a pulse program")
    p.add_argument("program")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("spectrum", parents=[common], help="line table and addressability")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("shor", parents=[common], help="smallest-element readout")
    p.add_argument("--w-bits", type=int, required=True)
    p.add_argument("--period", type=int)
    p.add_argument("--x", type=int)
    p.add_argument("--modulus", type=int)
    p.add_argument("--s", type=int, default=0)
    p.add_argument("--classify", action="store_true", help="add zmatch outcome classes")
    p.set_defaults(func=cmd_shor)

    p = sub.add_parser("grover", parents=[common], help="dominant-answer readout and probe")
    p.add_argument("--answer", required=True)
    p.add_argument("--weight", type=float, default=0.8)
    p.set_defaults(func=cmd_grover)

    p = sub.add_parser("verify", parents=[common], help="oracle and truth-table suites")
    p.add_argument("--programs", type=int, default=100)
    p.add_argument("--perturb", type=float, default=0.0,
                   help="offset one engine line per program; the suite must then fail")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.func(args, cfg)
    except ProgramError as exc:
        print(f"esrqc: program errors:\n{exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"esrqc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ChainError, ValueError, RuntimeError) as exc:
        print(f"esrqc: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
