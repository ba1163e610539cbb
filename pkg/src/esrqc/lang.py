"""Pulse-program text format: parser, macro expansion, reversal and emitter.

Grammar, one statement per line (``;`` also separates statements)::

    grad [+|-]
    pulse <spin> <cond> <angle> <phase>     # angles like pi, 1/2pi, -pi/4, 0
    pi <spin> <cond>        pi2 <spin> <cond>        flip <spin>
    turnon | kill | prepare | zmatch <k> | match <pattern>
    reverse { ... }
    # comment
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .chain import ChainError, ChainLayout
from .engine import GradientStep, Instruction, Pulse


class ProgramError(ValueError):
    """Parse or expansion failure; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(f"line {ln}: {msg}" for ln, msg in self.errors))


@dataclass(frozen=True)
class MacroRef:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class ReverseBlock:
    body: tuple


Node = Union[Pulse, GradientStep, MacroRef, ReverseBlock]
Program = tuple

MACROS = {"turnon": 0, "kill": 0, "prepare": 0, "zmatch": 1, "match": 1}

_ANGLE = re.compile(r"^([+-]?)(\d+(?:/\d+)?)?\*?(pi)?(?:/(\d+))?$")


def parse_angle(text: str) -> Fraction:
    """Rational multiple of pi from ``pi``, ``-1/2pi``, ``pi/4``, ``3/4*pi`` or ``0``."""
    m = _ANGLE.match(text.strip().lower())
    if not m or (m.group(2) is None and m.group(3) is None):
        raise ValueError(f"bad angle {text!r}")
    sign, coeff, has_pi, div = m.groups()
    value = Fraction(coeff) if coeff else Fraction(1)
    if div:
        if not has_pi:
            raise ValueError(f"bad angle {text!r}")
        value /= int(div)
    if not has_pi and value != 0:
        raise ValueError(f"angle {text!r} must be a rational multiple of pi")
    return -value if sign == "-" else value


def format_angle(value: Fraction) -> str:
    value = Fraction(value)
    if value == 0:
        return "0"
    if value == 1:
        return "pi"
    if value == -1:
        return "-pi"
    return f"{value}pi"


def _check_cond_text(cond: str) -> str:
    cond = cond.upper()
    if len(cond) not in (1, 2):
        raise ValueError(f"cond length {len(cond)} invalid in {cond!r}")
    if any(c not in "01X" for c in cond):
        raise ValueError(f"malformed cond {cond!r}")
    return cond


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{what} must be an integer, got {text!r}") from None


def _tokenize(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        line = line.replace("{", " { ").replace("}", " } ").replace(";", " ; ")
        for tok in line.split():
            yield tok, lineno
        yield "\n", lineno


def _statement(words: list[str]) -> Node:
    kw, args = words[0].lower(), words[1:]

    def arity(n):
        if len(args) != n:
            raise ValueError(f"{kw} takes {n} argument(s), got {len(args)}")

    if kw == "grad":
        if len(args) > 1:
            raise ValueError(f"grad takes at most 1 argument, got {len(args)}")
        sign = args[0] if args else "+"
        if sign not in ("+", "-"):
            raise ValueError(f"grad sign must be + or -, got {sign!r}")
        return GradientStep(1 if sign == "+" else -1)
    if kw == "pulse":
        arity(4)
        return Pulse(_int(args[0], "spin"), _check_cond_text(args[1]),
                     parse_angle(args[2]), parse_angle(args[3]))
    if kw in ("pi", "pi2"):
        arity(2)
        angle = Fraction(1) if kw == "pi" else Fraction(1, 2)
        return Pulse(_int(args[0], "spin"), _check_cond_text(args[1]), angle)
    if kw == "flip":
        arity(1)
        # width of the all-X condition is fixed during expansion
        return MacroRef("flip", (_int(args[0], "spin"),))
    if kw in MACROS:
        arity(MACROS[kw])
        if kw == "zmatch":
            return MacroRef(kw, (_int(args[0], "k"),))
        if kw == "match":
            if not args[0] or any(c not in "01" for c in args[0]):
                raise ValueError(f"match pattern must be binary, got {args[0]!r}")
            return MacroRef(kw, (args[0],))
        return MacroRef(kw)
    raise ValueError(f"unknown keyword {words[0]!r}")


def parse(text: str) -> Program:
    """Parse program text; every error in the file is collected before raising."""
    errors: list[tuple[int, str]] = []
    stack: list[tuple[list, int]] = [([], 0)]
    words: list[str] = []
    word_line = 0

    def flush():
        nonlocal words
        if words:
            try:
                stack[-1][0].append(_statement(words))
            except ValueError as exc:
                errors.append((word_line, str(exc)))
            words = []

    toks = list(_tokenize(text))
    i = 0
    while i < len(toks):
        tok, ln = toks[i]
        if tok in ("\n", ";"):
            flush()
        elif tok == "{":
            if words == ["reverse"]:
                words = []
                stack.append(([], ln))
            else:
                errors.append((ln, "'{' only allowed after 'reverse'"))
                words = []
        elif tok == "}":
            flush()
            if len(stack) == 1:
                errors.append((ln, "unmatched '}'"))
            else:
                body, _ = stack.pop()
                stack[-1][0].append(ReverseBlock(tuple(body)))
        else:
            if not words:
                word_line = ln
            words.append(tok)
        i += 1
    flush()
    while len(stack) > 1:
        _, opened = stack.pop()
        errors.append((opened, "unclosed 'reverse {' block"))
    if errors:
        raise ProgramError(sorted(errors))
    return tuple(stack[0][0])


def reverse(program) -> Program:
    """Exact inverse: reversed order, negated angles and gradient signs.

    Macro references become single-element reverse blocks and reverse blocks
    unwrap into their bodies.
    """
    out: list = []
    for node in reversed(tuple(program)):
        if isinstance(node, (Pulse, GradientStep)):
            out.append(node.inverse())
        elif isinstance(node, MacroRef):
            out.append(ReverseBlock((node,)))
        elif isinstance(node, ReverseBlock):
            out.extend(node.body)
        else:
            raise TypeError(f"not a program node: {node!r}")
    return tuple(out)


def _pi(spin: int, cond: str, angle=Fraction(1)) -> Pulse:
    return Pulse(spin, cond, angle)


def flip(spin: int, layout: ChainLayout) -> Pulse:
    return _pi(spin, "X" * layout.cond_width(spin))


def zmatch_pulses(k: int, layout: ChainLayout) -> list[Pulse]:
    """Signal conjugation iff spins 2..k+1 read zero, given the known-zero prefix."""
    n = layout.n_register
    if not 1 <= k <= n:
        raise ChainError(f"zmatch {k} needs 1 <= k <= {n}")
    if k == 1:
        return [_pi(1, "0")]
    ladder = [_pi(m, "10") for m in range(2, k)]
    return ladder + [_pi(k, "11")] + ladder[::-1] + [_pi(1, "0")]


def match_pulses(pattern: str, layout: ChainLayout) -> list[Pulse]:
    if not pattern or len(pattern) > layout.n_register:
        raise ChainError(
            f"match pattern {pattern!r} must have 1..{layout.n_register} characters"
        )
    flips = [flip(j + 2, layout) for j, c in enumerate(pattern) if c == "1"]
    return flips + zmatch_pulses(len(pattern), layout) + flips[::-1]


def prepare_pulses(layout: ChainLayout) -> list[Pulse]:
    n = layout.n_register
    if n < 2:
        raise ChainError("prepare needs a register of at least 2 spins")
    return (
        [_pi(m, "10") for m in range(2, n + 1)]
        + [_pi(m, "0X") for m in range(n, 1, -1)]
        + [_pi(1, "1")]
    )


TURNON = Pulse(1, "0", Fraction(1, 2))
KILL = Pulse(1, "1", Fraction(1, 2))


def expand_macro(ref: MacroRef, layout: ChainLayout) -> list[Instruction]:
    name, args = ref.name, ref.args
    if name == "turnon":
        return [TURNON]
    if name == "kill":
        return [KILL]
    if name == "prepare":
        return prepare_pulses(layout)
    if name == "zmatch":
        return zmatch_pulses(args[0], layout)
    if name == "match":
        return match_pulses(args[0], layout)
    if name == "flip":
        return [flip(args[0], layout)]
    raise ChainError(f"unknown macro {name!r}")


def expand(program, layout: ChainLayout) -> list[Instruction]:
    """Flatten macros and reverse blocks into pulses and gradient steps."""
    flat: list[Instruction] = []
    for node in program:
        if isinstance(node, GradientStep):
            flat.append(node)
        elif isinstance(node, Pulse):
            layout.check_cond(node.spin, node.cond)
            flat.append(node)
        elif isinstance(node, MacroRef):
            flat.extend(expand_macro(node, layout))
        elif isinstance(node, ReverseBlock):
            flat.extend(reverse(expand(node.body, layout)))
        else:
            raise TypeError(f"not a program node: {node!r}")
    return flat


def pulse_count(flat) -> int:
    return sum(1 for node in flat if isinstance(node, Pulse))


def _emit_lines(program, indent: str) -> list[str]:
    lines = []
    for node in program:
        if isinstance(node, GradientStep):
            lines.append(f"{indent}grad {'+' if node.sign > 0 else '-'}")
        elif isinstance(node, Pulse):
            lines.append(
                f"{indent}pulse {node.spin} {node.cond} "
                f"{format_angle(node.angle)} {format_angle(node.phase)}"
            )
        elif isinstance(node, MacroRef):
            lines.append(" ".join([indent + node.name, *map(str, node.args)]))
        elif isinstance(node, ReverseBlock):
            lines.append(f"{indent}reverse {{")
            lines.extend(_emit_lines(node.body, indent + "    "))
            lines.append(f"{indent}}}")
    return lines


def emit(program) -> str:
    """Canonical text; sugar (``pi``, ``pi2``) is written in ``pulse`` form."""
    return "\n".join(_emit_lines(program, "")) + "\n"
