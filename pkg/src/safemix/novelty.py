"""Stopping complexity and stopping probability on the reference machine.

``k_stop_upper`` and ``m_stop_lower`` are budgeted versions of the shortest
exactly-halting program length and of the summed ``2**-|p|`` over exactly
halting programs.  Both come from one exhaustive enumeration, so the first is
an upper bound and the second a lower bound on the unbudgeted quantities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .histories import Codebook, DomainError, Step, elias_delta, encode_history_action, integer_code_length
from .machine import (
    DEFAULT_FUEL,
    HALTED,
    INITIAL_STATE,
    MACHINE_VERSION,
    NEED_INPUT,
    NEED_PROGRAM,
    UNBOUNDED,
    Verdict,
    assemble,
    execute,
    is_complete_program,
    run_machine,
    stopping_profile,
)

# Bits charged for the fixed instruction that runs a base model and a stop
# program side by side (the hell-model construction).  It is not a program of
# the reference machine; it only sets the weight ratio between a base model
# and its hell variants.
INTERLEAVER_BITS = 3


class PredicateInvalid(DomainError):
    """A predicate program failed to decide some prefix."""


@dataclass(frozen=True)
class Predicate:
    """A decidable set of bit strings, given as a reference-machine program.

    The program reads its input one bit at a time and executes MARK right
    after reading each prefix that belongs to the set (at most once per
    prefix).  ``complexity_bits`` is the program length.
    """

    id: str
    program: str
    description: str = ""

    def __post_init__(self):
        if not is_complete_program(self.program):
            raise DomainError(f"predicate {self.id}: program is not whole instructions")

    @property
    def complexity_bits(self) -> int:
        return len(self.program)

    def member_positions(self, x: str, fuel: int = DEFAULT_FUEL) -> list[int]:
        """Lengths ``j`` such that ``x[:j]`` is in the set."""
        marks: list[int] = []
        state = INITIAL_STATE[:5] + (UNBOUNDED,) + INITIAL_STATE[6:]
        status, _ = execute(state, self.program, x, fuel * (len(x) + 1), marks)
        if status != NEED_INPUT:
            raise PredicateInvalid(f"predicate {self.id} does not decide every prefix of the input")
        if len(set(marks)) != len(marks):
            raise PredicateInvalid(f"predicate {self.id} marks a prefix twice")
        return marks

    def contains(self, x: str) -> bool:
        positions = self.member_positions(x)
        return bool(positions) and positions[-1] == len(x)


def nth_occurrence(E: Predicate, x: str) -> int | None:
    """``n`` such that ``x`` is the ``n``-th prefix of itself lying in ``E``."""
    positions = E.member_positions(x)
    if not positions or positions[-1] != len(x):
        return None
    return len(positions)


def first_occurrence(E: Predicate, x: str) -> int | None:
    """Length of the shortest prefix of ``x`` in ``E``."""
    positions = E.member_positions(x)
    return positions[0] if positions else None


class OccurrenceCounter:
    """Runs a predicate over a growing string, one chunk at a time."""

    def __init__(self, E: Predicate, fuel: int = DEFAULT_FUEL):
        self.E = E
        self.fuel = fuel
        self.x = ""
        self.count = 0
        self._state = INITIAL_STATE[:5] + (UNBOUNDED,) + INITIAL_STATE[6:]

    def feed(self, bits: str) -> list[int]:
        """Append ``bits``; return the new member prefix lengths."""
        self.x += bits
        marks: list[int] = []
        status, st = execute(self._state[:8] + (0,), self.E.program, self.x, self.fuel * (len(bits) + 1), marks)
        if status != NEED_INPUT:
            raise PredicateInvalid(f"predicate {self.E.id} does not decide every prefix of the input")
        self._state = st
        self.count += len(marks)
        return marks


def watcher_program(E: Predicate, n: int, x: str, fuel: int = DEFAULT_FUEL) -> str:
    """A program halting exactly on ``x`` when ``x`` is the ``n``-th occurrence of ``E``.

    For ``n = 1`` this is the part of ``E.program`` fetched before its first
    MARK; otherwise ``SETC n`` is prepended.
    """
    if nth_occurrence(E, x) != n:
        raise DomainError(f"{x!r} is not occurrence {n} of {E.id}")
    prog = E.program if n == 1 else assemble(("SETC", n)) + E.program
    status, st = execute(INITIAL_STATE, prog, x, fuel * (len(x) + 1))
    assert status == HALTED and st[7] == len(x)
    return prog[: st[1]]


def counting_program(n: int) -> str:
    """A program that reads exactly ``n`` input bits and halts."""
    if n == 0:
        return assemble(("HALT",))
    if n == 1:
        return assemble(("READ",), ("HALT",))
    return assemble(("SETC", n), ("READ",), ("MARK",), ("RESTART",))


# ---------------------------------------------------------------------------
# estimators


@lru_cache(maxsize=4096)
def _profile(x: str, max_len: int, fuel: int):
    return stopping_profile(x, max_len, fuel)


def k_stop_upper(x: str, max_len: int = 16, fuel: int = DEFAULT_FUEL) -> int | None:
    return _profile(x, max_len, fuel).shortest[-1]


def m_stop_lower(x: str, max_len: int = 16, fuel: int = DEFAULT_FUEL) -> float:
    return _profile(x, max_len, fuel).mass[-1]


def witnesses(x: str, max_len: int = 16, fuel: int = DEFAULT_FUEL) -> list[str]:
    return list(_profile(x, max_len, fuel).programs[-1])


def prefix_masses(x: str, max_len: int = 16, fuel: int = DEFAULT_FUEL) -> list[float]:
    """``m_stop_lower(x[:j])`` for ``j = 0..len(x)`` from a single enumeration."""
    return _profile(x, max_len, fuel).mass


def novelty_of_history(h: Sequence[Step], a: int, codebook: Codebook, max_len: int = 16, fuel: int = DEFAULT_FUEL) -> float:
    return m_stop_lower(encode_history_action(h, a, codebook), max_len, fuel)


def action_boundary_novelty(
    h: Sequence[Step], codebook: Codebook, max_len: int = 16, fuel: int = DEFAULT_FUEL
) -> list[float]:
    """Novelty of ``h_{<t} a_t`` for every step of a finished history.

    One enumeration over the whole encoding covers every action boundary.
    """
    bits, ends = [], []
    pos = 0
    for step in h:
        act = codebook.encode_action(step.a)
        pos += len(act)
        ends.append(pos)
        perc = codebook.encode_percept(step.o, step.r)
        pos += len(perc)
        bits.append(act + perc)
    if not ends:
        return []
    x = "".join(bits)[: ends[-1]]
    mass = stopping_profile(x, max_len, fuel).mass
    return [mass[e] for e in ends]


class NoveltyTracker:
    """Stopping mass at successive ends of a growing bit string.

    Keeps the suspended runs of every program (up to ``max_len`` bits) that
    is still waiting for input, so each extension only does new work.  The
    step budget applies per extension, the same way a hell model feeds its
    stop program, so the programs credited here are exactly the stop
    programs that fire at that point.
    """

    def __init__(self, max_len: int = 16, fuel: int = DEFAULT_FUEL):
        self.max_len = max_len
        self.fuel = fuel
        self.x = ""
        self._frontier = [("", INITIAL_STATE)]
        self.last_programs: list[str] = []
        self.extend("")

    def extend(self, bits: str) -> float:
        """Append ``bits``; return the mass of programs halting exactly at the new end."""
        self.x += bits
        end = len(self.x)
        stack = self._frontier
        stack.reverse()
        waiting, halted = [], []
        while stack:
            prog, st = stack.pop()
            status, st2 = execute(st[:8] + (0,), prog, self.x, self.fuel)
            if status == HALTED:
                if st2[7] == end:
                    halted.append(prog)
            elif status == NEED_INPUT:
                waiting.append((prog, st2))
            elif status == NEED_PROGRAM and len(prog) < self.max_len:
                stack.append((prog + "1", st2))
                stack.append((prog + "0", st2))
        self._frontier = waiting
        self.last_programs = sorted(halted, key=lambda p: (len(p), p))
        return math.fsum(2.0 ** -len(p) for p in halted)

    @property
    def waiting(self) -> int:
        return len(self._frontier)


# ---------------------------------------------------------------------------
# predicate library

ENDS_IN_ONE = Predicate(
    "ends-in-1",
    assemble(("READ",), ("GUARDB",), ("MARK",), ("RESTART",)),
    "strings whose last bit is 1",
)

ESCAPE_CODE = Predicate(
    "escape-codeword",
    assemble(("READ",), ("GUARDB",), ("GUARDW",), ("MARK",), ("RESTART",)),
    "strings ending in 11; with stuffed codewords this is exactly the moment a "
    "novel (escape-coded) action has been written",
)

NEVER = Predicate(
    "never",
    assemble(("READ",), ("RESTART",)),
    "the empty set",
)

PREDICATES = {p.id: p for p in (ENDS_IN_ONE, ESCAPE_CODE, NEVER)}


# ---------------------------------------------------------------------------
# constants manifest


def measure_constants(max_n: int = 64) -> dict:
    """Measure the machine-relative constants by building and running programs.

    ``c_count``: ``|counting_program(n)| - |code(n)|`` maximised over ``n``.
    ``c_hook``: bits added in front of a predicate to wait for occurrence ``n``
    beyond ``|code(n)|``.
    """
    c_count = 0
    for n in range(1, max_n + 1):
        prog = counting_program(n)
        assert run_machine("0" * n, prog).verdict is Verdict.HALTS_EXACTLY
        c_count = max(c_count, len(prog) - integer_code_length(n))
    halt = assemble(("HALT",))
    assert run_machine("", halt).verdict is Verdict.HALTS_EXACTLY
    hook = len(assemble(("SETC", 2))) - len(elias_delta(2))
    return {
        "machine_version": MACHINE_VERSION,
        "immediate_halt_bits": len(halt),
        "c_count": c_count,
        "c_hook": hook,
        "interleaver_bits": INTERLEAVER_BITS,
        "c_ref": 2 ** (INTERLEAVER_BITS + 1),
        "corollary_c_bits": INTERLEAVER_BITS + 1,
        "predicates": {p.id: p.complexity_bits for p in PREDICATES.values()},
    }


def shipped_constants() -> dict:
    text = resources.files("safemix").joinpath("constants.json").read_text()
    return json.loads(text)


def corollary_level(E: Predicate, constants: dict | None = None) -> float:
    """Smallest ``L`` covered by the never-first-trigger guarantee for ``E``."""
    constants = constants or shipped_constants()
    return 2.0 ** (E.complexity_bits + constants["corollary_c_bits"])


def log2_or_inf(m: float) -> float:
    return -math.log2(m) if m > 0 else math.inf
