"""Bayesian mixtures over a finite model class.

Weights live in log space.  A ``MixtureState`` is a value: updates return a
new state and never touch the old one.  Models with zero posterior weight are
dropped from the active set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .histories import DomainError, Step

DEFAULT_EXPANSION_CAP = 12


class InconsistencyError(RuntimeError):
    """The observed percept has zero probability under the whole mixture."""


class BudgetError(RuntimeError):
    """A requested exact expansion is deeper than the configured cap."""


@dataclass(frozen=True)
class MixtureState:
    models: tuple
    index: tuple  # active model indices
    log_weights: tuple  # normalized log posterior of the active models
    states: tuple
    log_evidence: float = 0.0
    t: int = 0

    @classmethod
    def from_prior(cls, models: Sequence, log_prior: Sequence[float]) -> "MixtureState":
        models = tuple(models)
        if len(models) != len(log_prior):
            raise DomainError("one prior weight per model")
        total = math.log(math.fsum(math.exp(x) for x in log_prior))
        if total > 1e-12:
            raise DomainError("prior weights sum to more than 1")
        keep = [i for i, x in enumerate(log_prior) if x > -math.inf]
        return cls(
            models,
            tuple(keep),
            tuple(log_prior[i] - total for i in keep),
            tuple(models[i].initial_state() for i in keep),
        )

    @classmethod
    def from_class(cls, mc) -> "MixtureState":
        return cls.from_prior(mc.models, mc.log_prior)

    def weights(self) -> list[float]:
        return [math.exp(x) for x in self.log_weights]

    def posterior(self) -> dict:
        """Model id to posterior weight (eliminated models omitted)."""
        return {self.models[i].id: math.exp(w) for i, w in zip(self.index, self.log_weights)}

    def weight_of(self, model_index: int) -> float:
        try:
            return math.exp(self.log_weights[self.index.index(model_index)])
        except ValueError:
            return 0.0

    def components(self):
        """``(model, state, weight)`` for every active model."""
        return [(self.models[i], s, math.exp(w)) for i, s, w in zip(self.index, self.states, self.log_weights)]

    def belief(self):
        """Active models pooled by behaviour key.

        Returns a sorted tuple of ``(key, weight)`` and a parallel tuple of
        ``(model, state)`` representatives.
        """
        pooled: dict = {}
        for i, s, w in zip(self.index, self.states, self.log_weights):
            m = self.models[i]
            k = m.key(s)
            if k in pooled:
                pooled[k][0] += math.exp(w)
            else:
                pooled[k] = [math.exp(w), m, s]
        keys = sorted(pooled, key=repr)
        return tuple((k, pooled[k][0]) for k in keys), tuple((pooled[k][1], pooled[k][2]) for k in keys)


def _check_history(m: MixtureState, h):
    if h is not None and len(h) != m.t:
        raise DomainError(f"mixture is at t={m.t} but the history has {len(h)} steps")


def mixture_predict(m: MixtureState, h: Sequence[Step] | None, a: int) -> dict:
    """``xi(o r | h a)`` as a map from percept to probability."""
    _check_history(m, h)
    out: dict = {}
    for i, s, lw in zip(m.index, m.states, m.log_weights):
        w = math.exp(lw)
        for pr, p in m.models[i].percepts(s, a):
            out[pr] = out.get(pr, 0.0) + w * p
    return out


HALT_EPS = 1e-12  # stop mass below this is float residue of a proper model


def halt_mass(pred: Mapping) -> float:
    rest = 1.0 - math.fsum(pred.values())
    return rest if rest > HALT_EPS else 0.0


def posterior_update(m: MixtureState, a: int, o: int, r: float) -> MixtureState:
    r = float(r)
    liks = []
    for i, s in zip(m.index, m.states):
        liks.append(dict(m.models[i].percepts(s, a)).get((o, r), 0.0))
    xi = math.fsum(math.exp(lw) * p for lw, p in zip(m.log_weights, liks))
    if xi <= 0.0:
        raise InconsistencyError(f"percept {(o, r)} after action {a} has zero mixture probability at t={m.t + 1}")
    log_xi = math.log(xi)
    index, logw, states = [], [], []
    for i, s, lw, p in zip(m.index, m.states, m.log_weights, liks):
        if p > 0.0:
            index.append(i)
            logw.append(lw + math.log(p) - log_xi)
            states.append(m.models[i].advance(s, a, o, r))
    # remove rounding drift so the weights keep summing to one
    drift = math.log(math.fsum(math.exp(x) for x in logw))
    logw = [x - drift for x in logw]
    return MixtureState(m.models, tuple(index), tuple(logw), tuple(states), m.log_evidence + log_xi, m.t + 1)


def update_history(m: MixtureState, h: Sequence[Step]) -> MixtureState:
    for step in h:
        m = posterior_update(m, step.a, step.o, step.r)
    return m


def recompute_posterior(models: Sequence, log_prior: Sequence[float], h: Sequence[Step]) -> dict:
    """From-scratch Bayes: ``w_nu * nu(or_{1:t} || a_{1:t})`` normalized."""
    joint = {}
    for m, lw in zip(models, log_prior):
        s = m.initial_state()
        logp = lw
        for step in h:
            p = dict(m.percepts(s, step.a)).get((step.o, float(step.r)), 0.0)
            if p == 0.0:
                logp = -math.inf
                break
            logp += math.log(p)
            s = m.advance(s, step.a, step.o, step.r)
        joint[m.id] = logp
    top = max(joint.values())
    z = math.fsum(math.exp(v - top) for v in joint.values())
    return {k: math.exp(v - top) / z for k, v in joint.items() if v > -math.inf}


# ---------------------------------------------------------------------------
# violation probabilities


def _is_stationary(policy) -> bool:
    return bool(getattr(policy, "stationary", False))


def _violation(model, state, policy, h, s: int, first_action, memo) -> float:
    """P under ``model`` and ``policy`` that the reward ``s`` steps ahead is
    negative or missing (a stop at any step up to then counts)."""
    if s == 0:
        return 0.0
    if first_action is None:
        ck = (model.key(state), s) if memo is not None else None
        if ck is not None and ck in memo:
            return memo[ck]
        acts = policy.action_probs(h).items()
    else:
        ck = None
        acts = ((first_action, 1.0),)
    total = 0.0
    for a, pa in acts:
        if pa == 0.0:
            continue
        outs = model.percepts(state, a)
        sub = 1.0 - math.fsum(p for _, p in outs)
        if sub <= HALT_EPS:
            sub = 0.0
        for (o, r), p in outs:
            if s == 1:
                sub += p if r < 0 else 0.0
            else:
                nxt = model.advance(state, a, o, r)
                hh = h + (Step(a, o, r),) if h is not None else None
                sub += p * _violation(model, nxt, policy, hh, s - 1, None, memo)
        total += pa * max(0.0, sub)
    if ck is not None:
        memo[ck] = total
    return total


def _alpha_like(m: MixtureState, policy, h, steps: int, first_action, cap: int) -> float:
    if steps > cap:
        raise BudgetError(f"expansion depth {steps} exceeds cap {cap}")
    memo = {} if _is_stationary(policy) else None
    hh = None if memo is not None else tuple(h)
    return math.fsum(
        w * _violation(model, s, policy, hh, steps, first_action, memo) for model, s, w in m.components()
    )


def _steps_ahead(m: MixtureState, h, u: int) -> int:
    t = m.t if h is None else len(h)
    _check_history(m, h)
    if u < t:
        raise DomainError(f"u={u} precedes the end of the history (t={t})")
    return u - t


def alpha(m: MixtureState, policy, h, u: int, cap: int = DEFAULT_EXPANSION_CAP) -> float:
    """``P_xi^pi(r_u < 0 or missing | h)`` where ``h`` holds ``t`` steps and
    ``u >= t`` is a 1-based reward index."""
    s = _steps_ahead(m, h, u)
    if s == 0:
        return 1.0 if h and h[-1].r < 0 else 0.0
    return _alpha_like(m, policy, h, s, None, cap)


def beta(m: MixtureState, policy, h, a: int, u: int, cap: int = DEFAULT_EXPANSION_CAP) -> float:
    """As ``alpha``, additionally conditioning on the next action ``a``."""
    s = _steps_ahead(m, h, u)
    if s == 0:
        raise DomainError("beta needs u > t")
    return _alpha_like(m, policy, h, s, a, cap)


def alpha_per_model(m: MixtureState, policy, s: int, memo: dict | None = None) -> float:
    """Fast ``alpha`` for stationary policies with a caller-owned memo that
    can be reused across time steps."""
    memo = {} if memo is None else memo
    return math.fsum(w * _violation(model, st, policy, None, s, None, memo) for model, st, w in m.components())


# ---------------------------------------------------------------------------
# total variation between the true environment and the mixture


class StatelessPolicy:
    """Adapter giving an ``action_probs`` policy the stateful interface used by
    ``tv_distance``; its internal state is always ``None``."""

    def __init__(self, policy):
        self.policy = policy

    def step_distribution(self, h, sigma):
        return [(a, None, p) for a, p in self.policy.action_probs(h).items() if p > 0]

    def advance_sigma(self, sigma, h):
        return sigma


def tv_distance(m: MixtureState, true_env, true_state, policy, h, sigma, n: int,
                cap: int = DEFAULT_EXPANSION_CAP) -> float:
    """Total variation between the ``true_env``- and mixture-induced laws of
    the next ``n`` steps, actions and policy state included.

    ``policy.step_distribution(h, sigma)`` yields ``(a, sigma_next, p)``.
    A stop of either side is an outcome of its own.
    """
    if n > cap:
        raise BudgetError(f"expansion depth {n} exceeds cap {cap}")
    if n == 0:
        return 0.0
    h = tuple(h)

    def rec(mix, xm, tstate, tm, hh, sig, depth):
        # sum over paths below this node of |P_true - P_mix|; stops are
        # outcomes of their own, so a side with zero mass contributes the
        # other side's whole mass
        if xm == 0.0 or tm == 0.0 or depth == 0:
            return abs(tm - xm) if depth == 0 else tm + xm
        total = 0.0
        for a, sig_next, pa in policy.step_distribution(hh, sig):
            t_out = dict(true_env.percepts(tstate, a))
            x_out = mixture_predict(mix, None, a)
            ta, xa = tm * pa, xm * pa
            total += abs(ta * halt_mass(t_out) - xa * halt_mass(x_out))
            for pr in sorted(set(t_out) | set(x_out)):
                pt, px = t_out.get(pr, 0.0), x_out.get(pr, 0.0)
                o, r = pr
                nt = true_env.advance(tstate, a, o, r) if pt > 0 else None
                nx = posterior_update(mix, a, o, r) if px > 0 else None
                total += rec(nx, xa * px, nt, ta * pt, hh + (Step(a, o, r),), sig_next, depth - 1)
        return total

    return 0.5 * rec(m, 1.0, true_state, 1.0, h, sigma, n)
