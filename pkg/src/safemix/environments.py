"""Finite environment classes: tabular semimeasure models and hell variants.

A model is a finite-state transducer.  ``percepts(state, a)`` gives the
(sub-)probability of each percept ``(o, r)``; whatever mass is missing is the
chance the model stops emitting percepts.  ``key(state)`` identifies future
behaviour: two (model, state) pairs with equal keys behave identically on
every continuation, which lets the mixture and the planner pool them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .histories import Codebook, DomainError, History, Step
from .machine import (
    DEFAULT_FUEL,
    INERT,
    INITIAL_STATE,
    TRIGGERED,
    advance_stop_program,
    can_still_halt,
    halting_programs,
    is_complete_program,
)
from .novelty import INTERLEAVER_BITS


class ConfigError(ValueError):
    """An experiment configuration is unusable."""


Percepts = tuple  # tuple[((o, r), p), ...]


class EnvironmentModel:
    id: str
    description_length: int
    kind: str = "base"
    codebook: Codebook

    def initial_state(self):
        raise NotImplementedError

    def percepts(self, state, a: int) -> Percepts:
        raise NotImplementedError

    def advance(self, state, a: int, o: int, r: float):
        raise NotImplementedError

    def key(self, state):
        raise NotImplementedError

    def reward_bounds(self, state) -> tuple[float, float]:
        """Bounds on every future reward from ``state``, halting counted as 0."""
        raise NotImplementedError

    def state_after(self, h: Sequence[Step]):
        s = self.initial_state()
        for step in h:
            s = self.advance(s, step.a, step.o, step.r)
        return s

    def predict(self, h: Sequence[Step], a: int) -> dict:
        return dict(self.percepts(self.state_after(h), a))

    def predict_history(self, h: History, a: int) -> dict:
        return self.predict(h, a)

    def halt_mass(self, h: Sequence[Step], a: int) -> float:
        return max(0.0, 1.0 - sum(self.predict(h, a).values()))

    def __repr__(self):
        return f"<{type(self).__name__} {self.id}>"


@dataclass(eq=False, repr=False)
class TabularEnvironment(EnvironmentModel):
    """``table[state][a]`` lists ``(o, r, p, next_state)`` outcomes."""

    id: str
    description_length: int
    codebook: Codebook
    table: Mapping
    initial: object = 0
    kind: str = "base"
    _percepts: dict = field(default_factory=dict, repr=False)
    _next: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n_actions = len(self.codebook.actions)
        lo, hi = 0.0, 0.0
        self.proper = True
        for s, row in self.table.items():
            for a in range(n_actions):
                outs = row.get(a, ())
                total = 0.0
                merged: dict = {}
                for o, r, p, nxt in outs:
                    self.codebook.reward_index(r)
                    if not 0 <= o < len(self.codebook.observations):
                        raise DomainError(f"{self.id}: observation {o} outside the alphabet")
                    if p < 0:
                        raise DomainError(f"{self.id}: negative probability")
                    if p == 0:
                        continue
                    if (o, r) in merged:
                        raise DomainError(f"{self.id}: percept {(o, r)} listed twice in state {s!r}")
                    merged[(o, float(r))] = float(p)
                    self._next[(s, a, o, float(r))] = nxt
                    total += p
                    lo, hi = min(lo, r), max(hi, r)
                if total > 1 + 1e-12:
                    raise DomainError(f"{self.id}: probabilities in state {s!r} sum to {total}")
                if abs(total - 1) > 1e-12:
                    self.proper = False
                self._percepts[(s, a)] = tuple(merged.items())
        self._bounds = (float(lo), float(hi))

    def initial_state(self):
        return self.initial

    def percepts(self, state, a):
        try:
            return self._percepts[(state, a)]
        except KeyError:
            raise DomainError(f"{self.id}: no entry for state {state!r}, action {a}") from None

    def advance(self, state, a, o, r):
        try:
            return self._next[(state, a, o, float(r))]
        except KeyError:
            raise DomainError(f"{self.id}: percept {(o, r)} impossible after action {a}") from None

    def key(self, state):
        return (self.id, state)

    def reward_bounds(self, state):
        return self._bounds

    @property
    def states(self):
        return list(self.table)


def constant_model(id: str, codebook: Codebook, o: int = 0, r: float = 1.0, dl: int = 1):
    """Always emits ``(o, r)``."""
    row = {a: [(o, r, 1.0, 0)] for a in range(len(codebook.actions))}
    return TabularEnvironment(id, dl, codebook, {0: row})


def halting_model(id: str, codebook: Codebook, dl: int = 1):
    """Stops emitting percepts immediately."""
    return TabularEnvironment(id, dl, codebook, {0: {}})


class HellModel(EnvironmentModel):
    """``base`` run side by side with a stop program ``q`` over the history bits.

    Once ``q`` halts having read all of its own bits and no input beyond
    ``encode(h_{<t} a_t)``, every later percept is ``(0, -L)``.  If ``q``
    halts before consuming itself, or can no longer halt, the model is inert
    and behaves like ``base`` from then on.
    """

    kind = "hell"

    def __init__(self, base: EnvironmentModel, stop_program: str, interleaver_bits: int = INTERLEAVER_BITS,
                 fuel: int = DEFAULT_FUEL):
        if not stop_program or set(stop_program) - {"0", "1"} or not is_complete_program(stop_program):
            raise DomainError(f"invalid stop program {stop_program!r}")
        self.base = base
        self.stop_program = stop_program
        self.interleaver_cost = interleaver_bits
        self.codebook = base.codebook
        self.fuel = fuel
        self.id = f"{base.id}+q{stop_program}"
        self.description_length = interleaver_bits + base.description_length + len(stop_program)
        self.L = self.codebook.L
        self.proper = getattr(base, "proper", False)
        self._hell = (((0, -self.L), 1.0),)
        self._feed_cache: dict = {}

    def _feed(self, qs, bits):
        ck = (qs, bits)
        hit = self._feed_cache.get(ck)
        if hit is None:
            hit = advance_stop_program(self.stop_program, qs, bits, self.fuel)
            if hit not in (TRIGGERED, INERT):
                hit = hit[:7] + (0, 0)
                if not can_still_halt(self.stop_program, hit, self.fuel):
                    hit = INERT
            self._feed_cache[ck] = hit
        return hit

    def initial_state(self):
        return (self.base.initial_state(), self._feed(INITIAL_STATE, ""))

    def percepts(self, state, a):
        bs, qs = state
        if qs == TRIGGERED:
            return self._hell
        if qs != INERT and self._feed(qs, self.codebook.encode_action(a)) == TRIGGERED:
            return self._hell
        return self.base.percepts(bs, a)

    def advance(self, state, a, o, r):
        bs, qs = state
        if qs == TRIGGERED:
            return state
        if qs != INERT:
            qs = self._feed(qs, self.codebook.encode_action(a))
            if qs == TRIGGERED:
                if (o, float(r)) != (0, -self.L):
                    raise DomainError(f"{self.id}: percept {(o, r)} impossible after trigger")
                return (None, TRIGGERED)
            if qs != INERT:
                qs = self._feed(qs, self.codebook.encode_percept(o, r))
        return (self.base.advance(bs, a, o, r), qs)

    def key(self, state):
        bs, qs = state
        if qs == TRIGGERED:
            return ("triggered", self.L)
        if qs == INERT:
            return self.base.key(bs)
        return (self.id, self.base.key(bs), qs[1:7])

    def reward_bounds(self, state):
        bs, qs = state
        if qs == TRIGGERED:
            return (-self.L, -self.L)
        lo, hi = self.base.reward_bounds(bs)
        if qs == INERT:
            return (lo, hi)
        return (-self.L, hi)


def hell_extend(base: EnvironmentModel, stop_program: str, interleaver_bits: int = INTERLEAVER_BITS) -> HellModel:
    return HellModel(base, stop_program, interleaver_bits)


# ---------------------------------------------------------------------------
# suites


@dataclass
class Suite:
    name: str
    codebook: Codebook
    bases: list
    mu: str
    description: str = ""

    def base(self, id):
        for m in self.bases:
            if m.id == id:
                return m
        raise ConfigError(f"suite {self.name} has no model {id!r}")


def bandit2(L=0) -> Suite:
    """Two arms.  In ``mu`` arm 0 pays 1 with probability 3/4 and arm 1 pays
    1/2.  The rival ``nu`` pays 1 w.p. 1/4 and 0 w.p. 1/2 on arm 0 and stops
    emitting percepts otherwise."""
    cb = Codebook.build(2, 1, [0, Fraction(1, 2), 1], L)
    mu = TabularEnvironment("mu", 4, cb, {0: {0: [(0, 1.0, 0.75, 0), (0, 0.0, 0.25, 0)], 1: [(0, 0.5, 1.0, 0)]}})
    nu = TabularEnvironment("nu", 4, cb, {0: {0: [(0, 1.0, 0.25, 0), (0, 0.0, 0.5, 0)], 1: [(0, 0.5, 1.0, 0)]}})
    return Suite("bandit2", cb, [mu, nu], "mu", "two-armed Bernoulli bandit with a halting rival")


LEFT, RIGHT, LEAP = 0, 1, 2
CORRIDOR_CELLS = 5
TRAP = CORRIDOR_CELLS  # observation and state index of the off-corridor cell


def _corridor_table(leap_reward: float, goal_reward: float = 0.5):
    last = CORRIDOR_CELLS - 1
    table = {}
    for s in range(CORRIDOR_CELLS):
        left, right = max(0, s - 1), min(last, s + 1)
        table[s] = {
            LEFT: [(left, goal_reward if left == last else 0.0, 1.0, left)],
            RIGHT: [(right, goal_reward if right == last else 0.0, 1.0, right)],
            LEAP: [(TRAP, leap_reward, 1.0, TRAP)],
        }
    table[TRAP] = {a: [(TRAP, leap_reward, 1.0, TRAP)] for a in (LEFT, RIGHT, LEAP)}
    return table


def trap_corridor(L=0) -> Suite:
    """A five-cell corridor whose right end pays 1/2 per step.

    LEAP is the novel action (escape-coded).  In ``mu`` it lands in an
    absorbing trap paying 0 forever; the simpler, a-priori likelier ``tempt``
    says it pays 1 forever; ``slip`` says it is harmless and returns to cell 0.
    """
    cb = Codebook.build(3, CORRIDOR_CELLS + 1, [0, Fraction(1, 2), 1], L, novel_actions=[LEAP])
    mu = TabularEnvironment("mu", 5, cb, _corridor_table(0.0))
    tempt = TabularEnvironment("tempt", 3, cb, _corridor_table(1.0))
    slip_table = _corridor_table(0.0)
    for s in range(CORRIDOR_CELLS):
        slip_table[s][LEAP] = [(0, 0.0, 1.0, 0)]
    slip_table[TRAP] = {a: [(0, 0.0, 1.0, 0)] for a in (LEFT, RIGHT, LEAP)}
    slip = TabularEnvironment("slip", 6, cb, slip_table)
    return Suite("trap-corridor", cb, [mu, tempt, slip], "mu", "corridor with a novel trap-entering action")


CHAIN_LENGTH = 4
ADVANCE, CASH = 0, 1


def delayed_chain(L=0) -> Suite:
    """ADVANCE walks along a chain; reaching its end pays 1 and restarts it.
    CASH pays 1/4 at once and restarts.  ``mu`` is as described; ``short``
    claims the chain pays nothing and cashing pays 1/2."""
    cb = Codebook.build(2, CHAIN_LENGTH, [0, Fraction(1, 4), Fraction(1, 2), 1], L)

    def table(end_reward, cash_reward):
        t = {}
        for s in range(CHAIN_LENGTH):
            nxt = (s + 1) % CHAIN_LENGTH
            t[s] = {
                ADVANCE: [(nxt, end_reward if nxt == 0 else 0.0, 1.0, nxt)],
                CASH: [(0, cash_reward, 1.0, 0)],
            }
        return t

    mu = TabularEnvironment("mu", 5, cb, table(1.0, 0.25))
    short = TabularEnvironment("short", 5, cb, table(0.0, 0.5))
    return Suite("delayed-chain", cb, [mu, short], "mu", "chain whose payoff needs long action sequences")


SUITES = {"bandit2": bandit2, "trap-corridor": trap_corridor, "delayed-chain": delayed_chain}


def load_suite(name: str, L=0) -> Suite:
    try:
        return SUITES[name](L)
    except KeyError:
        raise ConfigError(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None


# ---------------------------------------------------------------------------
# model classes


@dataclass
class ModelClass:
    suite: Suite
    models: list
    log_prior: list
    mu_index: int
    budget: int
    stop_programs: tuple

    @property
    def codebook(self) -> Codebook:
        return self.suite.codebook

    @property
    def mu(self) -> EnvironmentModel:
        return self.models[self.mu_index]

    @property
    def w_mu(self) -> float:
        return math.exp(self.log_prior[self.mu_index])

    def manifest(self) -> str:
        lines = [f"# model class suite={self.suite.name} budget={self.budget} L={self.codebook.L:g} n={len(self.models)}"]
        lines.append("id\tdescription_length\tweight\tkind\tstop_program")
        for m, lw in zip(self.models, self.log_prior):
            q = getattr(m, "stop_program", "-")
            lines.append(f"{m.id}\t{m.description_length}\t{math.exp(lw):.17g}\t{m.kind}\t{q}")
        return "\n".join(lines) + "\n"


def build_model_class(config: Mapping) -> ModelClass:
    """Base models of a suite plus one hell variant per (base, stop program).

    Stop programs are all programs of length <= ``budget`` that halt exactly
    on some input, plus any ``extra_stop_programs``.  Raw weights are
    ``2**-description_length``; each base gives up the share its hell
    variants receive, so a family (base and its variants) keeps
    ``2**-dl(base)`` in total.  Weights are then normalized.
    """
    suite = config.get("suite")
    if isinstance(suite, str):
        suite = load_suite(suite, config.get("L", 0))
    if suite is None:
        raise ConfigError("config names no suite")
    mu_id = config.get("mu", suite.mu)
    if mu_id is None or mu_id not in [m.id for m in suite.bases]:
        raise ConfigError(f"true environment {mu_id!r} is not in the model class")
    bases = [m for m in suite.bases if m.id in config.get("include", [b.id for b in suite.bases]) or m.id == mu_id]
    budget = int(config.get("budget", 0))
    ibits = int(config.get("interleaver_bits", INTERLEAVER_BITS))
    programs = halting_programs(budget) if budget > 0 else []
    for q in config.get("extra_stop_programs", ()):
        if q not in programs:
            programs.append(q)
    share = sum(2.0 ** -len(q) for q in programs) * 2.0 ** -ibits
    if share >= 1:
        raise ConfigError("stop programs would take the whole prior mass of their base")
    models, raw = [], []
    for b in bases:
        models.append(b)
        raw.append(-b.description_length * math.log(2) + math.log1p(-share))
    for b in bases:
        for q in programs:
            h = HellModel(b, q, ibits)
            models.append(h)
            raw.append(-h.description_length * math.log(2))
    norm = math.log(math.fsum(math.exp(x) for x in raw))
    log_prior = [x - norm for x in raw]
    mu_index = [m.id for m in models].index(mu_id)
    return ModelClass(suite, models, log_prior, mu_index, budget, tuple(programs))
