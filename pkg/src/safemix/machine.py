"""A small monotone reference machine and exhaustive program enumeration.

Instruction set (version ``rm-v1``); every opcode is three bits::

    000 HALT             stop
    001 READ             w <- b; b <- next input bit
    010 MARK             c <- c - 1; stop when c reaches 0
    011 GUARDB           if b == 0: pc <- origin
    100 GUARDW           if w == 0: pc <- origin
    101 RESTART          pc <- origin
    110 SETC  <n>        c <- n; origin <- pc + 1      (n Elias-delta coded)
    111 JMP   <d><m>     d=0: pc <- pc - (m - 1);  d=1: pc <- pc + 1 + m

Registers start at ``b = w = 0``, ``c = 1``, ``origin = 0``.  Both tapes are
read one way: instructions are fetched from the program tape only when the
program counter first reaches them, and input bits only by READ.  A run
*halts exactly* on ``(x, p)`` when it stops having consumed all of ``x`` and
all of ``p`` and nothing more.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .histories import DomainError, decode_elias_delta, elias_delta

MACHINE_VERSION = "rm-v1"

HALT, READ, MARK, GUARDB, GUARDW, RESTART, SETC, JMP = range(8)
OPCODE_NAMES = ("HALT", "READ", "MARK", "GUARDB", "GUARDW", "RESTART", "SETC", "JMP")
OPCODE_BITS = 3

# execution statuses
HALTED, NEED_INPUT, NEED_PROGRAM, DIVERGED = range(4)

UNBOUNDED = -1  # counter value used when deciding predicates: MARK never stops

DEFAULT_FUEL = 10_000


class Verdict(Enum):
    HALTS_EXACTLY = "halts_exactly"
    HALTS_SHORT = "halts_short"
    READS_PAST = "reads_past"
    DIVERGED = "diverged"


def decode_instruction(bits: str, pos: int):
    """Return ``(op, arg, new_pos)`` or ``None`` if ``bits`` runs out."""
    if pos + OPCODE_BITS > len(bits):
        return None
    op = int(bits[pos : pos + OPCODE_BITS], 2)
    pos += OPCODE_BITS
    if op == SETC:
        got = decode_elias_delta(bits, pos)
        if got is None:
            return None
        return op, got[0], got[1]
    if op == JMP:
        if pos >= len(bits):
            return None
        forward = bits[pos] == "1"
        got = decode_elias_delta(bits, pos + 1)
        if got is None:
            return None
        m, end = got
        return op, (1 + m) if forward else -(m - 1), end
    return op, 0, pos


def assemble(*instructions) -> str:
    """Assemble ``("READ",)``, ``("SETC", 5)``, ``("JMP", -1)`` style tuples.

    JMP takes the signed pc offset: ``0`` jumps to itself, ``-k`` jumps back
    ``k`` instructions and ``+k`` (``k >= 2``) skips ``k - 1`` instructions.
    """
    out = []
    for ins in instructions:
        name, *args = ins
        op = OPCODE_NAMES.index(name)
        out.append(format(op, "03b"))
        if op == SETC:
            out.append(elias_delta(args[0]))
        elif op == JMP:
            off = args[0]
            if off >= 2:
                out.append("1" + elias_delta(off - 1))
            elif off <= 0:
                out.append("0" + elias_delta(1 - off))
            else:
                raise DomainError("JMP offset +1 is not encodable; use no jump")
    return "".join(out)


def disassemble(bits: str) -> list[str]:
    pos, out = 0, []
    while pos < len(bits):
        got = decode_instruction(bits, pos)
        if got is None:
            out.append(f"<partial {bits[pos:]}>")
            break
        op, arg, pos = got
        out.append(OPCODE_NAMES[op] + (f" {arg}" if op in (SETC, JMP) else ""))
    return out


def is_complete_program(bits: str) -> bool:
    """True when ``bits`` splits into whole instructions."""
    pos = 0
    while pos < len(bits):
        got = decode_instruction(bits, pos)
        if got is None:
            return False
        pos = got[2]
    return True


# A machine configuration.  ``instrs`` holds the decoded instructions fetched
# so far; ``head`` is the number of program bits consumed by them.
INITIAL_STATE = ((), 0, 0, 0, 0, 1, 0, 0, 0)  # instrs, head, pc, b, w, c, origin, inpos, steps


def execute(state, prog: str, inp: str, fuel: int, marks: list | None = None):
    """Run from ``state`` until the machine halts, needs a bit it does not
    have, or diverges.

    Divergence is reported when the step budget is exhausted or when a
    configuration repeats without any tape being read (a certain loop).
    Returns ``(status, state)``; the returned state can be resumed after
    more bits are supplied.
    """
    instrs, head, pc, b, w, c, origin, inpos, steps = state
    instrs = list(instrs)
    seen = set()
    n_inp = len(inp)
    while True:
        if pc >= len(instrs):
            while pc >= len(instrs):
                got = decode_instruction(prog, head)
                if got is None:
                    return NEED_PROGRAM, (tuple(instrs), head, pc, b, w, c, origin, inpos, steps)
                instrs.append((got[0], got[1]))
                head = got[2]
            seen.clear()
        if steps >= fuel:
            return DIVERGED, (tuple(instrs), head, pc, b, w, c, origin, inpos, steps)
        key = (pc, b, w, c, origin)
        if key in seen:
            return DIVERGED, (tuple(instrs), head, pc, b, w, c, origin, inpos, steps)
        seen.add(key)
        op, arg = instrs[pc]
        steps += 1
        if op == READ:
            if inpos >= n_inp:
                steps -= 1
                return NEED_INPUT, (tuple(instrs), head, pc, b, w, c, origin, inpos, steps)
            w = b
            b = 1 if inp[inpos] == "1" else 0
            inpos += 1
            pc += 1
            seen.clear()
        elif op == HALT:
            return HALTED, (tuple(instrs), head, pc, b, w, c, origin, inpos, steps)
        elif op == MARK:
            if c == UNBOUNDED:
                if marks is not None:
                    marks.append(inpos)
            else:
                c -= 1
                if c == 0:
                    return HALTED, (tuple(instrs), head, pc, b, w, c, origin, inpos, steps)
            pc += 1
        elif op == GUARDB:
            pc = origin if b == 0 else pc + 1
        elif op == GUARDW:
            pc = origin if w == 0 else pc + 1
        elif op == RESTART:
            pc = origin
        elif op == SETC:
            if c != UNBOUNDED:
                c = arg
            origin = pc + 1
            pc += 1
        else:  # JMP
            pc = max(0, pc + arg)


@dataclass(frozen=True)
class RunResult:
    verdict: Verdict
    steps: int
    input_read: int
    program_read: int


def run_machine(x: str, p: str, fuel: int = DEFAULT_FUEL) -> RunResult:
    """Classify the behaviour of program ``p`` on input ``x``."""
    if fuel < 1:
        raise DomainError("fuel must be >= 1")
    status, st = execute(INITIAL_STATE, p, x, fuel)
    head, inpos, steps = st[1], st[7], st[8]
    if status == HALTED:
        exact = inpos == len(x) and head == len(p)
        verdict = Verdict.HALTS_EXACTLY if exact else Verdict.HALTS_SHORT
    elif status == DIVERGED:
        verdict = Verdict.DIVERGED
    else:
        verdict = Verdict.READS_PAST
    return RunResult(verdict, steps, inpos, head)


# ---------------------------------------------------------------------------
# enumeration


@dataclass
class StoppingProfile:
    """Programs of length <= ``max_len`` halting exactly on each prefix of ``x``.

    ``mass[j]`` is the summed ``2**-|p|`` of programs halting exactly on
    ``x[:j]`` and ``shortest[j]`` the length of the shortest (``None`` when no
    program was found).
    """

    x: str
    max_len: int
    fuel: int
    programs: list[list[str]]
    diverged: int

    @property
    def mass(self) -> list[float]:
        return [sum(2.0 ** -len(p) for p in progs) for progs in self.programs]

    @property
    def shortest(self) -> list[int | None]:
        return [min(map(len, progs)) if progs else None for progs in self.programs]


def stopping_profile(x: str, max_len: int = 16, fuel: int = DEFAULT_FUEL) -> StoppingProfile:
    """Enumerate every program of length <= ``max_len`` against input ``x``.

    One depth-first pass over the program tree handles all prefixes of ``x``
    at once: each program either halts exactly at some input position, reads
    past the end of ``x``, diverges, or wants more program bits (and then
    branches on the next bit).  Programs are only ever extended when the
    machine asks for another bit, so the credited set is prefix-free.
    """
    found: list[list[str]] = [[] for _ in range(len(x) + 1)]
    diverged = 0
    stack = [("", INITIAL_STATE)]
    while stack:
        prog, state = stack.pop()
        status, st = execute(state, prog, x, fuel)
        if status == HALTED:
            found[st[7]].append(prog)
        elif status == NEED_PROGRAM:
            if len(prog) < max_len:
                stack.append((prog + "1", st))
                stack.append((prog + "0", st))
        elif status == DIVERGED:
            diverged += 1
    for progs in found:
        progs.sort(key=lambda p: (len(p), p))
    return StoppingProfile(x, max_len, fuel, found, diverged)


def halting_programs(max_len: int, fuel: int = DEFAULT_FUEL) -> list[str]:
    """All programs of length <= ``max_len`` that halt exactly on some input.

    Input bits are branched on like program bits, but configurations are
    deduplicated per program prefix (the input position does not influence
    future behaviour), which keeps input-reading loops finite.
    """
    result = set()
    stack = [("", INITIAL_STATE)]
    seen = set()
    while stack:
        prog, state = stack.pop()
        key = (prog, state[0], state[1]) + state[2:7]
        if key in seen:
            continue
        seen.add(key)
        status, st = execute(state[:8] + (0,), prog, "", fuel)
        if status == HALTED:
            result.add(prog)
        elif status == NEED_PROGRAM:
            if len(prog) < max_len:
                stack.append((prog + "0", st))
                stack.append((prog + "1", st))
        elif status == NEED_INPUT:
            for bit in (0, 1):
                instrs, head, pc, b, w, c, origin, inpos, steps = st
                stack.append((prog, (instrs, head, pc + 1, bit, b, c, origin, inpos + 1, 0)))
    return sorted(result, key=lambda p: (len(p), p))


# ---------------------------------------------------------------------------
# incremental runs of a fixed stop program (used by hell-augmented models)


TRIGGERED = "triggered"
INERT = "inert"


def advance_stop_program(q: str, state, bits: str, fuel: int = DEFAULT_FUEL):
    """Feed more input bits to a suspended run of ``q``.

    Returns ``TRIGGERED`` if ``q`` halts exactly (all of ``q`` read) within
    the supplied bits, ``INERT`` if it can never do so (halts short, needs
    program bits past ``q``, or diverges), otherwise the new suspended state.
    The state's ``inpos`` is relative to ``bits`` and the step budget applies
    per call.
    """
    state = state[:7] + (0, 0)
    status, st = execute(state, q, bits, fuel)
    if status == HALTED:
        return TRIGGERED if st[1] == len(q) else INERT
    if status == NEED_INPUT:
        return st
    return INERT


_reach_cache: dict = {}


def can_still_halt(q: str, state, fuel: int = DEFAULT_FUEL) -> bool:
    """Whether some continuation of the input makes ``q`` halt exactly."""
    if state in (TRIGGERED, INERT):
        return state == TRIGGERED
    key = (q, state[:7])
    hit = _reach_cache.get(key)
    if hit is not None:
        return hit
    frontier = [state[:7] + (0, 0)]
    seen = set()
    answer = False
    while frontier:
        st = frontier.pop()
        k = st[:7]
        if k in seen:
            continue
        seen.add(k)
        status, nxt = execute(st, q, "", fuel)
        if status == HALTED:
            if nxt[1] == len(q):
                answer = True
                break
        elif status == NEED_INPUT:
            instrs, head, pc, b, w, c, origin, inpos, steps = nxt
            for bit in (0, 1):
                frontier.append((instrs, head, pc + 1, bit, b, c, origin, 0, 0))
    _reach_cache[key] = answer
    return answer
