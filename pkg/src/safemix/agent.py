"""The deferring agent: Bayes-optimal by default, handing control to mentors
when its own value estimate says catastrophe is likely, and for randomly
scheduled rollouts that keep it learning what the mentors know.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bayes import MixtureState, posterior_update
from .config import RunConfig
from .environments import ConfigError, build_model_class
from .histories import Step
from .mentors import MentorSet, library_set, mentor_act
from .novelty import NoveltyTracker
from .planning import Planner, SafetyDecision

OPTIMIZE, SAFETY, EXPLORE, ROLLOUT = "optimize", "safety", "explore", "rollout"
MENTOR_BRANCHES = (SAFETY, EXPLORE, ROLLOUT)

COLUMNS = ("t", "branch", "action", "obs", "reward", "rollout_steps", "mentor_id",
           "vstar_lo", "vstar_hi", "eta", "novelty", "trigger")


def schedule_eta(t: int) -> float:
    """Probability of starting a random mentor rollout at step ``t``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return t ** (-1.0 / 3.0)


def schedule_horizon(t: int, gamma: float) -> int:
    """Length of a random mentor rollout started at step ``t``."""
    if t < 1 or not 0 < gamma < 1:
        raise ValueError("need t >= 1 and gamma in (0, 1)")
    return max(1, math.ceil(math.log(t) / (6 * (1 - gamma))))


@dataclass(frozen=True)
class AgentState:
    t: int = 1
    rollout_steps: int = 0
    active_mentor: int | None = None

    @property
    def sigma(self):
        return 0 if self.rollout_steps == 0 else (self.rollout_steps, self.active_mentor)


@dataclass
class Streams:
    """Independent generators so each consumer keeps its own sequence."""

    trigger: np.random.Generator
    mentor: np.random.Generator
    environment: np.random.Generator
    policy: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        kids = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.Generator(np.random.PCG64(k)) for k in kids))


@dataclass(frozen=True)
class StepRecord:
    t: int
    branch: str
    action: int
    rollout_steps: int  # remaining after this step
    mentor: int | None
    decision: SafetyDecision | None
    eta: float
    draw: float | None

    @property
    def triggered(self) -> bool:
        return self.decision is not None and self.decision.trigger


def step(state: AgentState, h: Sequence[Step], m: MixtureState, mentors: MentorSet, planner: Planner,
         streams: Streams, gamma: float, eta_on: bool = True, audit: bool = True):
    """One pass through the interaction loop; returns ``(action, new state, record)``.

    With no rollout under way the safety check runs first and may hand one
    step to the default mentor; the random check runs next and may replace
    that with a longer rollout by a sampled mentor.  With ``audit`` the
    check is also evaluated (and logged, not acted on) during rollouts, so
    trigger counts cover every step.
    """
    if state.t != len(h) + 1:
        raise ValueError(f"agent at t={state.t} but history has {len(h)} steps")
    t = state.t
    eta = schedule_eta(t) if eta_on else 0.0
    rollout, mentor = state.rollout_steps, state.active_mentor
    branch, decision, draw = None, None, None
    if rollout == 0 or audit:
        decision = planner.safety_check(m)
    if rollout == 0:
        if decision.trigger:
            rollout, mentor, branch = 1, mentors.default_index, SAFETY
        draw = float(streams.trigger.random())
        if draw < eta:
            rollout, mentor, branch = schedule_horizon(t, gamma), mentors.sample(streams.mentor), EXPLORE
    if rollout > 0:
        rollout -= 1
        action = mentor_act(mentors.mentors[mentor], h, streams.policy)
        branch = branch or ROLLOUT
    else:
        action = decision.root.action
        branch = OPTIMIZE
        mentor = None
    new = AgentState(t + 1, rollout, mentor if rollout > 0 else None)
    return action, new, StepRecord(t, branch, action, rollout, mentor, decision, eta, draw)


# ---------------------------------------------------------------------------
# traces


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class RunTrace:
    config: dict
    seed: int
    rows: list = field(default_factory=list)
    codebook_table: str = ""
    w_mu: float = float("nan")

    def column(self, name: str) -> list:
        i = COLUMNS.index(name)
        return [r[i] for r in self.rows]

    def history(self) -> tuple:
        return tuple(Step(r[2], r[3], r[4]) for r in self.rows)

    def branch_counts(self) -> dict:
        out = {b: 0 for b in (OPTIMIZE,) + MENTOR_BRANCHES}
        for r in self.rows:
            out[r[1]] = out.get(r[1], 0) + 1
        return out

    def to_text(self) -> str:
        lines = ["# safemix trace", f"# seed: {self.seed}", f"# w_mu: {self.w_mu!r}",
                 "# config: " + RunConfig(**self.config).to_json()]
        lines += ["# codebook: " + ln for ln in self.codebook_table.splitlines()]
        lines.append("\t".join(COLUMNS))
        lines += ["\t".join(_fmt(x) for x in r) for r in self.rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunTrace":
        import json

        seed, config, w_mu, cb, rows = 0, {}, float("nan"), [], []
        for line in text.splitlines():
            if line.startswith("# seed: "):
                seed = int(line[8:])
            elif line.startswith("# w_mu: "):
                w_mu = float(line[8:])
            elif line.startswith("# config: "):
                config = json.loads(line[10:])
            elif line.startswith("# codebook: "):
                cb.append(line[12:])
            elif line.startswith("#") or line.startswith("t\t") or not line:
                continue
            else:
                f = line.split("\t")
                rows.append((int(f[0]), f[1], int(f[2]), int(f[3]), float(f[4]), int(f[5]),
                             None if f[6] == "nan" else int(f[6]), float(f[7]), float(f[8]),
                             float(f[9]), float(f[10]), int(f[11])))
        return cls(config, seed, rows, "\n".join(cb) + ("\n" if cb else ""), w_mu)


def sample_percept(env, state, a, rng: np.random.Generator):
    outs = env.percepts(state, a)
    u = rng.random()
    acc = 0.0
    for (o, r), p in outs:
        acc += p
        if u < acc:
            return o, r
    if acc < 1 - 1e-12:
        raise RuntimeError("the true environment stopped emitting percepts")
    return outs[-1][0]


@dataclass
class Setup:
    """Everything a run needs that does not depend on the seed."""

    config: RunConfig
    model_class: object
    mentors: MentorSet

    @classmethod
    def build(cls, config: RunConfig) -> "Setup":
        mc = build_model_class(config.model_config())
        for m in mc.models:
            if m.kind == "base" and m.id == mc.mu.id and not getattr(m, "proper", False):
                raise ConfigError("the true environment must be a proper measure")
        mentors = library_set(config.suite, config.mentors, config.mentor_weights, config.default_mentor or None)
        return cls(config, mc, mentors)

    def planner(self) -> Planner:
        c = self.config
        return Planner(c.gamma, len(self.model_class.codebook.actions), c.horizon, c.max_horizon)


def run_episode(config: RunConfig, seed: int, setup: Setup | None = None, T: int | None = None) -> RunTrace:
    """A ``T``-step interaction with the true environment; a pure function of
    the config and the seed."""
    setup = setup or Setup.build(config)
    T = config.T if T is None else T
    mc, mentors = setup.model_class, setup.mentors
    codebook = mc.codebook
    streams = Streams.from_seed(seed)
    mix = MixtureState.from_class(mc)
    mu = mc.mu
    mu_state = mu.initial_state()
    planner = setup.planner()
    tracker = NoveltyTracker(config.novelty_budget, config.novelty_fuel) if config.record_novelty else None
    fixed = None
    if config.policy.startswith("mentor:"):
        fixed = [x.id for x in mentors.mentors].index(config.policy[7:])
    trace = RunTrace(config.to_dict(), seed, [], codebook.to_table(), mc.w_mu)
    state = AgentState()
    h: list = []
    for _ in range(T):
        t = state.t
        if config.policy == "gh":
            a, state, rec = step(state, h, mix, mentors, planner, streams, config.gamma, config.eta == "schedule")
            branch, rollout, mentor = rec.branch, rec.rollout_steps, rec.mentor
            est = rec.decision.estimate if rec.decision else None
            trig = int(rec.triggered)
            eta = rec.eta
        elif config.policy == "uniform":
            n = len(codebook.actions)
            a = int(streams.policy.integers(n))
            state, branch, rollout, mentor, est, trig, eta = AgentState(t + 1), OPTIMIZE, 0, None, None, 0, 0.0
        else:
            a = mentor_act(mentors.mentors[fixed], h, streams.policy)
            state, branch, rollout, mentor, est, trig, eta = AgentState(t + 1), ROLLOUT, 0, fixed, None, 0, 0.0
        novelty = tracker.extend(codebook.encode_action(a)) if tracker else float("nan")
        o, r = sample_percept(mu, mu_state, a, streams.environment)
        mu_state = mu.advance(mu_state, a, o, r)
        mix = posterior_update(mix, a, o, r)
        if tracker:
            tracker.extend(codebook.encode_percept(o, r))
        h.append(Step(a, o, r))
        lo = est.lo if est else float("nan")
        hi = est.hi if est else float("nan")
        trace.rows.append((t, branch, a, o, float(r), rollout, mentor, lo, hi, eta, novelty, trig))
    return trace
