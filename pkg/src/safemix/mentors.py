"""Mentor policies: trusted fallbacks for deferral and the regret baseline.

A mentor's action distribution depends on the history only through the last
observation (``None`` before the first step).  That keeps their values under
a tabular true environment computable exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .environments import ADVANCE, CASH, LEFT, RIGHT, ConfigError
from .histories import DomainError, Step, encode_history_action
from .novelty import PREDICATES, nth_occurrence


@dataclass(frozen=True)
class MentorPolicy:
    id: str
    probs: Callable  # last observation (or None) -> {action: probability}
    safety_certificate: tuple = ()
    description: str = ""

    def act(self, h: Sequence[Step]) -> dict:
        dist = self.probs(h[-1].o if h else None)
        total = sum(dist.values())
        if abs(total - 1) > 1e-12 or any(p < 0 for p in dist.values()):
            raise DomainError(f"mentor {self.id} returned an improper distribution {dist}")
        return dist

    def action_probs(self, h) -> dict:
        return self.act(h)


def mentor_act(tau: MentorPolicy, h: Sequence[Step], rng: np.random.Generator) -> int:
    dist = tau.act(h)
    actions = sorted(dist)
    if len(actions) == 1:
        return actions[0]
    u = rng.random()
    acc = 0.0
    for a in actions:
        acc += dist[a]
        if u < acc:
            return a
    return actions[-1]


def _const(a):
    return lambda o: {a: 1.0}


def _uniform(actions):
    p = 1.0 / len(actions)
    return lambda o: {a: p for a in actions}


CORRIDOR_SAFE = ("escape-codeword", "ends-in-1", "never")

LIBRARY: dict[str, dict[str, MentorPolicy]] = {
    "bandit2": {
        "good": MentorPolicy("good", _const(0), ("never",), "always pulls arm 0"),
        "mediocre": MentorPolicy("mediocre", _const(1), ("never",), "always pulls arm 1"),
        "cautious": MentorPolicy("cautious", _uniform((0, 1)), ("never",), "pulls either arm at random"),
    },
    "trap-corridor": {
        "good": MentorPolicy("good", _const(RIGHT), CORRIDOR_SAFE, "walks right and stays at the goal"),
        "cautious": MentorPolicy("cautious", _uniform((LEFT, RIGHT)), CORRIDOR_SAFE, "wanders left and right"),
    },
    "delayed-chain": {
        "good": MentorPolicy("good", _const(ADVANCE), ("never",), "always advances along the chain"),
        "mediocre": MentorPolicy("mediocre", _const(CASH), ("never",), "always cashes in"),
        "cautious": MentorPolicy("cautious", _uniform((ADVANCE, CASH)), ("never",), "advances or cashes at random"),
    },
}


def get_mentor(suite: str, id: str) -> MentorPolicy:
    try:
        return LIBRARY[suite][id]
    except KeyError:
        raise ConfigError(f"no mentor {id!r} for suite {suite!r}") from None


@dataclass(frozen=True)
class MentorSet:
    mentors: tuple
    sample_weights: tuple  # Fractions summing to exactly 1
    default_index: int = 0
    _cum: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        ws = tuple(Fraction(w) for w in self.sample_weights)
        if len(ws) != len(self.mentors) or not self.mentors:
            raise ConfigError("need one weight per mentor and at least one mentor")
        if any(w < 0 for w in ws) or sum(ws) != 1:
            raise ConfigError(f"mentor weights must be nonnegative and sum to 1, got {ws}")
        if not 0 <= self.default_index < len(self.mentors):
            raise ConfigError("default mentor index out of range")
        object.__setattr__(self, "sample_weights", ws)
        object.__setattr__(self, "_cum", tuple(float(sum(ws[: i + 1])) for i in range(len(ws))))

    @property
    def default(self) -> MentorPolicy:
        return self.mentors[self.default_index]

    def sample(self, rng: np.random.Generator) -> int:
        u = rng.random()
        for i, c in enumerate(self._cum):
            if u < c:
                return i
        return len(self._cum) - 1

    def eligible(self, epsilon) -> list[int]:
        """Indices of mentors with sampling weight at least ``epsilon``."""
        return [i for i, w in enumerate(self.sample_weights) if w >= Fraction(epsilon)]


# ---------------------------------------------------------------------------
# values under the true environment


def _joint_chain(mentor: MentorPolicy, env):
    """Every ``(env state, last observation)`` pair reachable under any
    actions, with the mentor's expected reward and transitions on them."""
    n_actions = len(env.codebook.actions)
    start = (env.initial_state(), None)
    index = {start: 0}
    order = [start]
    i = 0
    while i < len(order):
        s, _ = order[i]
        for a in range(n_actions):
            for (o, r), p in env.percepts(s, a):
                nxt = (env.advance(s, a, o, r), o)
                if nxt not in index:
                    index[nxt] = len(order)
                    order.append(nxt)
        i += 1
    rho = np.zeros(len(order))
    P = np.zeros((len(order), len(order)))
    for i, (s, last) in enumerate(order):
        for a, pa in mentor.probs(last).items():
            for (o, r), p in env.percepts(s, a):
                rho[i] += pa * p * r
                P[i, index[(env.advance(s, a, o, r), o)]] += pa * p
    return index, rho, P


def mentor_values(mentor: MentorPolicy, env, gamma: float) -> dict:
    """Exact normalized infinite-horizon value of ``mentor`` in ``env`` for
    every reachable ``(state, last observation)`` pair."""
    index, rho, P = _joint_chain(mentor, env)
    v = np.linalg.solve(np.eye(len(index)) - gamma * P, (1 - gamma) * rho)
    return {k: float(v[i]) for k, i in index.items()}


def best_mentor_value(mentors: MentorSet, epsilon, true_env, h: Sequence[Step], gamma: float,
                      horizon: int | None = None) -> float:
    """``max`` over mentors with weight ``>= epsilon`` of their value in
    ``true_env`` from history ``h``; exact when ``horizon`` is None."""
    from .planning import value_truncated

    chosen = mentors.eligible(epsilon)
    if not chosen:
        raise DomainError(f"no mentor has sampling weight >= {epsilon}")
    if horizon is not None:
        return max(value_truncated(mentors.mentors[i], true_env, h, horizon, gamma).value for i in chosen)
    pair = (true_env.state_after(h), h[-1].o if h else None)
    return max(mentor_values(mentors.mentors[i], true_env, gamma)[pair] for i in chosen)


# ---------------------------------------------------------------------------
# safety certificates


def certificate_violations(mentor: MentorPolicy, models: Sequence, depth: int = 6) -> list:
    """Histories (from any action sequence, with percepts any model in
    ``models`` allows) after which ``mentor`` could take an action that makes
    ``h a`` the first occurrence of a certified predicate.
    """
    codebook = models[0].codebook
    n_actions = len(codebook.actions)
    bad = []
    preds = [PREDICATES[p] for p in mentor.safety_certificate]
    frontier = {(): tuple((m, m.initial_state()) for m in models)}
    for d in range(depth):
        nxt_frontier = {}
        for h, sts in frontier.items():
            for a, pa in mentor.act(h).items():
                if pa <= 0:
                    continue
                x = encode_history_action(h, a, codebook)
                for E in preds:
                    if nth_occurrence(E, x) == 1:
                        bad.append((h, a, E.id))
            if d == depth - 1:
                continue
            for a in range(n_actions):
                for m, s in sts:
                    for (o, r), p in m.percepts(s, a):
                        hh = h + (Step(a, o, r),)
                        if hh not in nxt_frontier:
                            nxt_frontier[hh] = []
                        nxt_frontier[hh].append((m, m.advance(s, a, o, r)))
        frontier = {h: tuple(v) for h, v in nxt_frontier.items()}
    return bad


def library_set(suite: str, ids: Sequence[str], weights: Sequence, default: str | None = None) -> MentorSet:
    mentors = tuple(get_mentor(suite, i) for i in ids)
    d = list(ids).index(default) if default is not None else 0
    return MentorSet(mentors, tuple(Fraction(w) for w in weights), d)

