"""Alphabets, codeword tables and bit encodings of interaction histories.

Every alphabet gets a prefix code built the same way: the symbol index is
written in a fixed number of binary digits and each digit is then "stuffed"
(``0 -> "0"``, ``1 -> "10"``).  Stuffed words never contain ``"11"`` and
always end in ``"0"``, so a concatenation of regular codewords never
contains ``"11"`` either.  Symbols declared *novel* (e.g. a trap-entering
action) get codewords starting with ``"11"``, which makes their first use
detectable by a very short program on the reference machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Protocol, Sequence

CODEBOOK_VERSION = "stuffed-v1"


class DomainError(ValueError):
    """A symbol, program or argument lies outside its declared domain."""


# ---------------------------------------------------------------------------
# integer codes


def elias_delta(n: int) -> str:
    """Elias delta code of a positive integer (self-delimiting)."""
    if n < 1:
        raise DomainError(f"elias_delta needs n >= 1, got {n}")
    binary = format(n, "b")
    width = format(len(binary), "b")
    return "0" * (len(width) - 1) + width + binary[1:]


def decode_elias_delta(bits: str, pos: int = 0) -> tuple[int, int] | None:
    """Decode one delta-coded integer starting at ``pos``.

    Returns ``(n, new_pos)`` or ``None`` when ``bits`` ends before the
    codeword does.
    """
    zeros = 0
    while pos + zeros < len(bits) and bits[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > len(bits):
        return None
    width = int(bits[pos + zeros : end], 2)
    stop = end + width - 1
    if stop > len(bits):
        return None
    return int("1" + bits[end:stop], 2), stop


def integer_code_length(n: int) -> int:
    return len(elias_delta(n))


# ---------------------------------------------------------------------------
# alphabets


def _stuff(index: int, width: int) -> str:
    return "".join("10" if d == "1" else "0" for d in format(index, f"0{width}b"))


def _width(count: int) -> int:
    return max(1, math.ceil(math.log2(count))) if count > 1 else 1


@dataclass(frozen=True)
class Alphabet:
    """A finite symbol set with a frozen prefix code."""

    name: str
    codewords: tuple[str, ...]
    values: tuple[Fraction, ...] | None = None
    _lookup: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        words = self.codewords
        for i, u in enumerate(words):
            for j, v in enumerate(words):
                if i != j and v.startswith(u):
                    raise DomainError(f"{self.name}: {u!r} is a prefix of {v!r}")
        object.__setattr__(self, "_lookup", {w: i for i, w in enumerate(words)})

    @classmethod
    def build(cls, name: str, size: int, novel: Iterable[int] = (), values=None) -> "Alphabet":
        novel = sorted(set(novel))
        regular = [i for i in range(size) if i not in novel]
        words = [""] * size
        w = _width(len(regular))
        for k, i in enumerate(regular):
            words[i] = _stuff(k, w)
        if novel:
            nw = _width(len(novel)) if len(novel) > 1 else 0
            for k, i in enumerate(novel):
                words[i] = "11" + (_stuff(k, nw) if nw else "")
        return cls(name, tuple(words), values)

    def __len__(self) -> int:
        return len(self.codewords)

    def encode(self, index: int) -> str:
        if not 0 <= index < len(self.codewords):
            raise DomainError(f"{self.name} index {index} outside 0..{len(self) - 1}")
        return self.codewords[index]

    def decode(self, bits: str, pos: int) -> tuple[int, int]:
        longest = max(map(len, self.codewords))
        for end in range(pos + 1, min(len(bits), pos + longest) + 1):
            hit = self._lookup.get(bits[pos:end])
            if hit is not None:
                return hit, end
        raise DomainError(f"no {self.name} codeword at bit {pos}")


class Step(NamedTuple):
    """One interaction step ``a_t o_t r_t``; the reward is a float holding an
    exact dyadic rational."""

    a: int
    o: int
    r: float


History = tuple  # tuple[Step, ...]


def dyadic(value) -> Fraction:
    """Validate that a reward level is exactly representable as a float."""
    frac = Fraction(value)
    if frac.denominator & (frac.denominator - 1):
        raise DomainError(f"reward {value} is not a dyadic rational")
    return frac


@dataclass(frozen=True)
class Codebook:
    """Codeword tables for actions, observations and rewards.

    ``rewards.values`` lists the model reward set; its first element is the
    minimum ``-L``.
    """

    actions: Alphabet
    observations: Alphabet
    rewards: Alphabet
    version: str = CODEBOOK_VERSION
    _reward_index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        idx = {float(v): i for i, v in enumerate(self.rewards.values)}
        object.__setattr__(self, "_reward_index", idx)

    @classmethod
    def build(
        cls,
        n_actions: int,
        n_observations: int,
        reward_levels: Sequence,
        L,
        novel_actions: Iterable[int] = (),
    ) -> "Codebook":
        levels = sorted({dyadic(v) for v in reward_levels})
        if levels[0] < 0 or levels[-1] > 1:
            raise DomainError("true reward levels must lie in [0, 1]")
        minimum = -dyadic(L)
        values = tuple([minimum] + [v for v in levels if v != minimum])
        return cls(
            Alphabet.build("action", n_actions, novel_actions),
            Alphabet.build("observation", n_observations),
            Alphabet.build("reward", len(values), values=values),
        )

    @property
    def L(self) -> float:
        return -float(self.rewards.values[0])

    def reward_index(self, r: float) -> int:
        try:
            return self._reward_index[float(r)]
        except KeyError:
            raise DomainError(f"reward {r} not in the model reward set") from None

    def encode_action(self, a: int) -> str:
        return self.actions.encode(a)

    def encode_percept(self, o: int, r: float) -> str:
        return self.observations.encode(o) + self.rewards.encode(self.reward_index(r))

    def encode_step(self, step: Step) -> str:
        return self.encode_action(step.a) + self.encode_percept(step.o, step.r)

    def to_table(self) -> str:
        """Serialize as ``set index bitstring`` lines."""
        lines = [f"# codebook {self.version}"]
        lines.append("# reward values " + " ".join(str(v) for v in self.rewards.values))
        for alpha in (self.actions, self.observations, self.rewards):
            lines += [f"{alpha.name} {i} {w}" for i, w in enumerate(alpha.codewords)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_table(cls, text: str) -> "Codebook":
        words: dict[str, dict[int, str]] = {"action": {}, "observation": {}, "reward": {}}
        values = None
        for line in text.splitlines():
            if line.startswith("# reward values "):
                values = tuple(Fraction(v) for v in line.split()[3:])
            elif line and not line.startswith("#"):
                name, index, bits = line.split()
                words[name][int(index)] = bits

        def alpha(name, vals=None):
            table = words[name]
            return Alphabet(name, tuple(table[i] for i in range(len(table))), vals)

        return cls(alpha("action"), alpha("observation"), alpha("reward", values))


def encode_history(h: Sequence[Step], codebook: Codebook) -> str:
    return "".join(codebook.encode_step(step) for step in h)


def encode_history_action(h: Sequence[Step], a: int, codebook: Codebook) -> str:
    """Encoding of ``h_{<t} a_t``."""
    return encode_history(h, codebook) + codebook.encode_action(a)


def decode_history(bits: str, codebook: Codebook) -> History:
    steps, pos = [], 0
    while pos < len(bits):
        a, pos = codebook.actions.decode(bits, pos)
        o, pos = codebook.observations.decode(bits, pos)
        r, pos = codebook.rewards.decode(bits, pos)
        steps.append(Step(a, o, float(codebook.rewards.values[r])))
    return tuple(steps)


# ---------------------------------------------------------------------------
# joint probabilities


class Policy(Protocol):
    def action_probs(self, h: History) -> Mapping[int, float]: ...


class PerceptModel(Protocol):
    def predict_history(self, h: History, a: int) -> Mapping[tuple[int, float], float]: ...


def policy_causal(policy: Policy, h: Sequence[Step]) -> float:
    """``pi(a_{1:T} || or_{<T})``."""
    p = 1.0
    for t, step in enumerate(h):
        p *= policy.action_probs(tuple(h[:t])).get(step.a, 0.0)
        if p == 0.0:
            break
    return p


def environment_causal(env: PerceptModel, h: Sequence[Step]) -> float:
    """``nu(or_{1:T} || a_{1:T})``."""
    p = 1.0
    for t, step in enumerate(h):
        p *= env.predict_history(tuple(h[:t]), step.a).get((step.o, step.r), 0.0)
        if p == 0.0:
            break
    return p


def history_probability(policy: Policy, env: PerceptModel, h: Sequence[Step]) -> float:
    """Joint probability that the interaction starts with ``h``."""
    p = 1.0
    for t, step in enumerate(h):
        prefix = tuple(h[:t])
        p *= policy.action_probs(prefix).get(step.a, 0.0)
        p *= env.predict_history(prefix, step.a).get((step.o, step.r), 0.0)
        if p == 0.0:
            return 0.0
    return p
