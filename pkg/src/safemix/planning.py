"""Discounted values and expectimax over mixtures, with certified truncation.

Values are normalized: ``V = (1 - gamma) * E[sum_k gamma^k r_{t+k}]``, and a
reward that never arrives (the model stopped) counts as 0.

The planner computes three numbers per node in one pass: the depth-``n``
optimal value with leaf value 0, and the same recursion with each leaf
replaced by a lower or an upper bound on every future reward of the surviving
components.  Those bounds come from the models themselves (a hell variant
that can still fire may pay ``-L``; one that has fired pays exactly ``-L``;
ordinary models pay within their reward range), so they always lie inside
the generic interval ``[-gamma^n L, gamma^n]`` around the truncated value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bayes import BudgetError, MixtureState, mixture_predict, posterior_update
from .histories import DomainError, Step

TIE_EPS = 1e-12
CLEAR_MARGIN = 1e-9  # keeps float noise from clearing a value sitting exactly at -1
DEFAULT_MEMO_DIGITS = 12


@dataclass(frozen=True)
class ValueEstimate:
    value: float
    horizon_n: int
    error_lo: float
    error_hi: float

    @property
    def lo(self) -> float:
        return self.value + self.error_lo

    @property
    def hi(self) -> float:
        return self.value + self.error_hi

    def contains(self, v: float, slack: float = 1e-12) -> bool:
        return self.lo - slack <= v <= self.hi + slack


def generic_interval(gamma: float, L: float, n: int) -> tuple[float, float]:
    return (-(gamma**n) * L, gamma**n)


def choose_horizon(gamma: float, L: float, tolerance: float) -> int:
    """Smallest ``n >= 1`` with ``(L + 1) * gamma**n <= tolerance``."""
    if tolerance <= 0:
        raise DomainError("tolerance must be positive")
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    n = max(1, math.ceil(math.log(tolerance / (L + 1)) / math.log(gamma)) - 1)
    while (L + 1) * gamma**n > tolerance:
        n += 1
    return n


def argmax_lowest(values) -> int:
    best = max(values)
    for i, v in enumerate(values):
        if v >= best - TIE_EPS:
            return i
    raise AssertionError


# ---------------------------------------------------------------------------
# fixed-policy values


def _root_of(env_or_mixture, h):
    if isinstance(env_or_mixture, MixtureState):
        if len(h) != env_or_mixture.t:
            raise DomainError("history length does not match the mixture")
        return env_or_mixture
    return (env_or_mixture, env_or_mixture.state_after(h))


def _predict(node, a):
    if isinstance(node, MixtureState):
        return mixture_predict(node, None, a)
    model, state = node
    return dict(model.percepts(state, a))


def _child(node, a, o, r):
    if isinstance(node, MixtureState):
        return posterior_update(node, a, o, r)
    model, state = node
    return (model, model.advance(state, a, o, r))


def _reward_floor(env_or_mixture) -> float:
    if isinstance(env_or_mixture, MixtureState):
        return env_or_mixture.models[0].codebook.L
    return env_or_mixture.codebook.L


def value_truncated(policy, env_or_mixture, h, n: int, gamma: float = 0.9, cap: int = 16) -> ValueEstimate:
    """Exact ``(1-gamma) E[sum_{s<n} gamma^s r_{t+s}]`` by tree expansion."""
    if n < 0:
        raise DomainError("n must be >= 0")
    if n > cap:
        raise BudgetError(f"horizon {n} exceeds cap {cap}")
    h = tuple(h)

    def rec(node, hh, d):
        if d == 0:
            return 0.0
        total = 0.0
        for a, pa in policy.action_probs(hh).items():
            if pa == 0:
                continue
            for (o, r), p in _predict(node, a).items():
                if p == 0:
                    continue
                total += pa * p * ((1 - gamma) * r + gamma * rec(_child(node, a, o, r), hh + (Step(a, o, r),), d - 1))
        return total

    v = rec(_root_of(env_or_mixture, h), h, n)
    lo, hi = generic_interval(gamma, _reward_floor(env_or_mixture), n)
    return ValueEstimate(v, n, lo, hi)


# ---------------------------------------------------------------------------
# expectimax


@dataclass(frozen=True)
class RootValues:
    """Per-action ``(value, lo, hi)`` at the root of a depth-``n`` search."""

    n: int
    q: tuple
    action: int

    @property
    def value(self) -> float:
        return self.q[self.action][0]

    @property
    def lo(self) -> float:
        return max(t[1] for t in self.q)

    @property
    def hi(self) -> float:
        return max(t[2] for t in self.q)

    def estimate(self) -> ValueEstimate:
        v = self.value
        return ValueEstimate(v, self.n, self.lo - v, self.hi - v)


@dataclass(frozen=True)
class SafetyDecision:
    trigger: bool
    forced: bool  # undecided at the horizon cap, triggered conservatively
    root: RootValues

    @property
    def estimate(self) -> ValueEstimate:
        return self.root.estimate()


class Planner:
    """Memoized expectimax over pooled mixture beliefs.

    The memo maps ``(pooled belief, depth)`` to a value triple.  Weights in
    the key are rounded to ``memo_digits`` decimals; two beliefs that agree
    to that precision share an entry.  The memo persists across calls so a
    run reuses work from earlier steps.
    """

    def __init__(self, gamma: float, n_actions: int, horizon: int = 6, max_horizon: int = 48,
                 memo_digits: int = DEFAULT_MEMO_DIGITS, memo_limit: int = 2_000_000):
        if not 0 < gamma < 1:
            raise DomainError("gamma must lie in (0, 1)")
        if horizon < 1:
            raise DomainError("horizon must be >= 1")
        self.gamma = gamma
        self.n_actions = n_actions
        self.horizon = horizon
        self.max_horizon = max(horizon, max_horizon)
        self.memo_digits = memo_digits
        self.memo_limit = memo_limit
        self.memo: dict = {}
        self.nodes = 0

    # components are tuples (key, weight, model, state), sorted by key repr

    @staticmethod
    def _pool(items):
        pooled: dict = {}
        for k, w, model, state in items:
            if k in pooled:
                pooled[k][1] += w
            else:
                pooled[k] = [k, w, model, state]
        return tuple(sorted((tuple(v) for v in pooled.values()), key=lambda c: repr(c[0])))

    def components(self, m: MixtureState):
        return self._pool((model.key(s), w, model, s) for model, s, w in m.components())

    def _memo_key(self, comps, d):
        dg = self.memo_digits
        return (tuple((c[0], round(c[1], dg)) for c in comps), d)

    def _q(self, comps, a, d):
        gamma = self.gamma
        by_percept: dict = {}
        for k, w, model, state in comps:
            for pr, p in model.percepts(state, a):
                by_percept.setdefault(pr, []).append((w * p, model, state))
        v = lo = hi = 0.0
        for pr in sorted(by_percept):
            parts = by_percept[pr]
            mass = math.fsum(x[0] for x in parts)
            if mass <= 0.0:
                continue
            o, r = pr
            child = self._pool(
                (model.key(nxt), wp / mass, model, nxt)
                for wp, model, state in parts
                if wp > 0.0
                for nxt in (model.advance(state, a, o, r),)
            )
            cv, clo, chi = self._node(child, d - 1)
            base = (1 - gamma) * r
            v += mass * (base + gamma * cv)
            lo += mass * (base + gamma * clo)
            hi += mass * (base + gamma * chi)
        return (v, lo, hi)

    def _leaf(self, comps):
        lo = hi = 0.0
        for k, w, model, state in comps:
            a, b = model.reward_bounds(state)
            lo += w * a
            hi += w * b
        return (0.0, lo, hi)

    def _node(self, comps, d):
        if d == 0:
            return self._leaf(comps)
        key = self._memo_key(comps, d)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.nodes += 1
        qs = [self._q(comps, a, d) for a in range(self.n_actions)]
        out = (max(q[0] for q in qs), max(q[1] for q in qs), max(q[2] for q in qs))
        if len(self.memo) >= self.memo_limit:
            self.memo.clear()
        self.memo[key] = out
        return out

    def root(self, m: MixtureState, n: int | None = None) -> RootValues:
        n = self.horizon if n is None else n
        if n < 1:
            raise DomainError("n must be >= 1")
        comps = self.components(m)
        qs = tuple(self._q(comps, a, n) for a in range(self.n_actions))
        return RootValues(n, qs, argmax_lowest([q[0] for q in qs]))

    def optimal_value(self, m: MixtureState, n: int | None = None) -> tuple[ValueEstimate, int]:
        r = self.root(m, n)
        return r.estimate(), r.action

    def safety_check(self, m: MixtureState) -> SafetyDecision:
        """Decide ``V*_xi(h) <= -1`` from certified bounds, deepening as needed.

        Trigger when the upper bound is at most -1.  Clear when the lower
        bound of the chosen action exceeds -1.  Otherwise double the depth;
        past ``max_horizon`` trigger conservatively.
        """
        n = self.horizon
        while True:
            r = self.root(m, n)
            if r.hi <= -1:
                return SafetyDecision(True, False, r)
            if r.q[r.action][1] > -1 + CLEAR_MARGIN:
                return SafetyDecision(False, False, r)
            if n >= self.max_horizon:
                return SafetyDecision(True, True, r)
            n = min(2 * n, self.max_horizon)


def optimal_value(m: MixtureState, h, n: int, gamma: float = 0.9, tie_break: str = "lowest"):
    """Depth-``n`` expectimax value and root action for mixture ``m`` at ``h``."""
    if tie_break != "lowest":
        raise DomainError("only lowest-index tie breaking is supported")
    if h is not None and len(h) != m.t:
        raise DomainError("history length does not match the mixture")
    n_actions = len(m.models[0].codebook.actions)
    return Planner(gamma, n_actions, horizon=max(1, n), max_horizon=max(1, n)).optimal_value(m, n)
