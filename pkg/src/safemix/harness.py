"""Seeded sweeps, metrics recomputed from traces, bound checks and plots.

Every metric is a function of a persisted trace (plus the config stored in
its header), so a summary can always be rebuilt from the trace files.

Regret terms use the true environment's mean rewards along the realized
path: ``G_t = (1 - gamma) rho_t + gamma G_{t+1}`` where ``rho_t`` is the
expected reward of ``a_t`` in the true state.  ``G_t`` averages to the
agent's value given the history and its internal state, so by convexity
``max(0, V_best - G_t)**2`` overstates the regret term on average.  Runs are
extended by a tail so ``G_t`` is accurate at every counted step.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .agent import OPTIMIZE, ROLLOUT, EXPLORE, SAFETY, RunTrace, Setup, run_episode
from .bayes import MixtureState, alpha_per_model, posterior_update
from .bounds import (
    capability_bound,
    lemma_alpha_bound,
    rollout_step_bound,
    safety_threshold,
    trigger_bound,
)
from .config import RunConfig
from .environments import ConfigError
from .histories import Codebook
from .mentors import mentor_values
from .novelty import INTERLEAVER_BITS, PREDICATES, OccurrenceCounter, corollary_level

__all__ = [
    "RunConfig", "MetricsSummary", "Check", "trace_metrics", "run_sweep", "estimate_alpha_sum",
    "regret_curve", "first_trigger_audit", "emit_plots", "verify_bounds", "regret_tail",
]

Z95 = statistics.NormalDist().inv_cdf(0.975)
TAIL_TOLERANCE = 1e-9


def regret_tail(gamma: float) -> int:
    """Extra steps after the last counted one so the discounted remainder is negligible."""
    return math.ceil(math.log(TAIL_TOLERANCE) / math.log(gamma))


# ---------------------------------------------------------------------------
# per-trace metrics


class UniformPolicy:
    stationary = True

    def __init__(self, n_actions: int):
        self.p = {a: 1.0 / n_actions for a in range(n_actions)}

    def action_probs(self, h):
        return self.p


def _best_values(setup: Setup) -> dict:
    c = setup.config
    mu = setup.model_class.mu
    chosen = setup.mentors.eligible(c.epsilon)
    if not chosen:
        raise ConfigError(f"no mentor has sampling weight >= {c.epsilon}")
    tables = [mentor_values(setup.mentors.mentors[i], mu, c.gamma) for i in chosen]
    return {k: max(t[k] for t in tables) for k in tables[0]}


def _regret_terms(trace: RunTrace, setup: Setup, best: dict):
    """Per-step regret gap ``V_best - G_t`` along the trace."""
    gamma = setup.config.gamma
    mu = setup.model_class.mu
    state = mu.initial_state()
    last = None
    vbest, rho = [], []
    for row in trace.rows:
        a, o, r = row[2], row[3], row[4]
        vbest.append(best[(state, last)])
        rho.append(math.fsum(p * rr for (_, rr), p in mu.percepts(state, a)))
        state = mu.advance(state, a, o, r)
        last = o
    g = np.zeros(len(rho) + 1)
    for t in range(len(rho) - 1, -1, -1):
        g[t] = (1 - gamma) * rho[t] + gamma * g[t + 1]
    return np.asarray(vbest) - g[:-1]


def _incidents(trace: RunTrace, codebook: Codebook, predicates: Sequence[str]) -> dict:
    """1 if the first occurrence of a predicate came from an optimize-branch action."""
    out = {}
    for pid in predicates:
        counter = OccurrenceCounter(PREDICATES[pid])
        result, first_t = 0, 0
        for row in trace.rows:
            t, branch, a, o, r = row[:5]
            end = len(counter.x) + len(codebook.encode_action(a))
            marks = counter.feed(codebook.encode_action(a))
            if marks and counter.count == len(marks):
                first_t = t
                result = int(branch == OPTIMIZE and marks[0] == end)
                break
            marks = counter.feed(codebook.encode_percept(o, r))
            if marks and counter.count == len(marks):
                first_t = t
                break
        out[f"incident:{pid}"] = result
        out[f"first_t:{pid}"] = first_t
    return out


def trace_metrics(trace: RunTrace, setup: Setup | None = None, best: dict | None = None) -> dict:
    """All per-run metrics, computed from the trace and the config it carries."""
    config = RunConfig(**trace.config)
    setup = setup or Setup.build(config)
    codebook = setup.model_class.codebook
    n = len(trace.rows)
    branch = trace.column("branch")
    counts = trace.branch_counts()
    m = {
        "steps": n,
        "optimize_steps": counts[OPTIMIZE],
        "safety_steps": counts[SAFETY],
        "rollout_steps": counts[EXPLORE] + counts[ROLLOUT],
        "mentor_steps": counts[SAFETY] + counts[EXPLORE] + counts[ROLLOUT],
        "triggers": sum(trace.column("trigger")),
    }
    threshold = safety_threshold(config.L, INTERLEAVER_BITS)
    nov = [x for x, b in zip(trace.column("novelty"), branch) if b == OPTIMIZE and not math.isnan(x)]
    m["novelty_checked"] = len(nov)
    m["novelty_violations"] = sum(1 for x in nov if x >= threshold)
    m["novelty_max_ratio"] = max(nov) / threshold if nov else 0.0
    m["novelty_deferred"] = sum(1 for x, b in zip(trace.column("novelty"), branch) if b != OPTIMIZE and x > 0)
    tail = regret_tail(config.gamma)
    grid = [T for T in config.regret_grid if T + tail <= n]
    if grid:
        best = best if best is not None else _best_values(setup)
        gap = _regret_terms(trace, setup, best)
        sq = np.maximum(gap, 0.0) ** 2
        for T in grid:
            m[f"regret_sq@{T}"] = math.fsum(sq[:T])
            m[f"subopt@{T}"] = int(np.count_nonzero(gap[:T] > config.suboptimality))
    m.update(_incidents(trace, codebook, config.predicates))
    return m


# ---------------------------------------------------------------------------
# summaries


def _aggregate(values: list) -> dict:
    n = len(values)
    mean = math.fsum(values) / n
    sd = statistics.stdev(values) if n > 1 else 0.0
    hw = Z95 * sd / math.sqrt(n)
    return {"n": n, "mean": mean, "sd": sd, "half_width": hw, "lower": mean - hw, "upper": mean + hw}


@dataclass
class MetricsSummary:
    """Per-seed metrics and their aggregates.

    Confidence intervals use the normal approximation: ``mean +- z * sd / sqrt(n)``
    with ``z`` the 97.5% standard normal quantile.  ``series`` holds curves
    for plotting: name -> dict with ``x``, ``y`` and optional ``bound``.
    """

    config: dict
    per_seed: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)

    @property
    def seeds(self) -> list:
        return sorted(self.per_seed)

    def keys(self) -> list:
        out = set()
        for m in self.per_seed.values():
            out.update(m)
        return sorted(out)

    def values(self, key: str) -> list:
        return [self.per_seed[s][key] for s in self.seeds if key in self.per_seed[s]]

    @property
    def aggregate(self) -> dict:
        return {k: _aggregate(self.values(k)) for k in self.keys()}

    def mean(self, key: str) -> float:
        return self.aggregate[key]["mean"]

    def merge(self, other: "MetricsSummary") -> "MetricsSummary":
        a = {k: v for k, v in self.config.items() if k != "seeds"}
        b = {k: v for k, v in other.config.items() if k != "seeds"}
        if a != b:
            raise ConfigError("cannot merge summaries of different configs")
        per = dict(self.per_seed)
        for s, m in other.per_seed.items():
            if s in per and per[s] != m:
                raise ConfigError(f"seed {s} has conflicting metrics")
            per[s] = m
        config = dict(self.config, seeds=sorted(per))
        series = dict(self.series)
        series.update(other.series)
        return MetricsSummary(config, {s: per[s] for s in sorted(per)}, series)

    def to_text(self) -> str:
        doc = {
            "config": self.config,
            "per_seed": {str(s): self.per_seed[s] for s in self.seeds},
            "aggregate": self.aggregate if self.per_seed else {},
            "series": self.series,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricsSummary":
        doc = json.loads(text)
        per = {int(s): m for s, m in doc["per_seed"].items()}
        return cls(doc["config"], per, doc.get("series", {}))


def _seed_list(seeds) -> list:
    if isinstance(seeds, int):
        return list(range(seeds))
    return sorted(int(s) for s in seeds)


def _run_dir(config: RunConfig, out_dir) -> Path | None:
    if out_dir is None:
        return None
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def run_sweep(config: RunConfig, seeds=None, out_dir=None, T: int | None = None) -> MetricsSummary:
    """Independent runs for each seed.  Traces are written to ``out_dir``
    when given; the summary depends only on the config and the seed list."""
    seeds = _seed_list(config.seeds if seeds is None else seeds)
    setup = Setup.build(config)
    best = None
    d = _run_dir(config, out_dir)
    per = {}
    for s in seeds:
        try:
            trace = run_episode(config, s, setup, T)
            if best is None and any(x + regret_tail(config.gamma) <= len(trace.rows) for x in config.regret_grid):
                best = _best_values(setup)
            per[s] = trace_metrics(trace, setup, best)
        except Exception as exc:
            raise RuntimeError(f"run with seed {s} failed: {exc}") from exc
        if d is not None:
            (d / f"trace-{s}.tsv").write_text(trace.to_text())
    summary = MetricsSummary(dict(config.to_dict(), seeds=seeds), per)
    if d is not None:
        (d / "summary.json").write_text(summary.to_text())
    return summary


def summary_from_traces(paths: Iterable) -> MetricsSummary:
    traces = [RunTrace.from_text(Path(p).read_text()) for p in paths]
    if not traces:
        raise ValueError("no traces given")
    config = RunConfig(**traces[0].config)
    setup = Setup.build(config)
    per = {t.seed: trace_metrics(t, setup) for t in sorted(traces, key=lambda t: t.seed)}
    return MetricsSummary(dict(config.to_dict(), seeds=sorted(per)), per)


# ---------------------------------------------------------------------------
# experiments


def estimate_alpha_sum(config: RunConfig, s: int, seeds=None, T: int | None = None) -> dict:
    """Monte-Carlo estimate of the sum over ``t = 0..T`` of ``alpha_{t, t+s}``
    under a uniformly random policy in the true environment.

    The infinite sum is truncated at ``T``; all terms are nonnegative, so
    the partial sum underestimates the full one.
    """
    if config.policy != "uniform":
        raise ConfigError("alpha sums are estimated for the uniform policy only")
    if s < 0:
        raise ConfigError("s must be >= 0")
    seeds = _seed_list(config.seeds if seeds is None else seeds)
    T = config.T if T is None else T
    setup = Setup.build(config)
    mc = setup.model_class
    policy = UniformPolicy(len(mc.codebook.actions))
    memo: dict = {}
    sums = []
    for seed in seeds:
        if s == 0:
            sums.append(0.0)
            continue
        trace = run_episode(config.replace(record_novelty=False), seed, setup, T)
        mix = MixtureState.from_class(mc)
        terms = [alpha_per_model(mix, policy, s, memo)]
        for row in trace.rows:
            mix = posterior_update(mix, row[2], row[3], row[4])
            terms.append(alpha_per_model(mix, policy, s, memo))
        sums.append(math.fsum(terms))
    agg = _aggregate(sums)
    agg.update(s=s, T=T, bound=lemma_alpha_bound(s, mc.w_mu), w_mu=mc.w_mu)
    return agg


def _slope(xs, ys) -> float:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def regret_curve(config: RunConfig, grid: Sequence[int] | None = None, seeds=None) -> dict:
    """Summed squared regret at each ``T`` in ``grid`` and the log-log slope."""
    grid = sorted(config.regret_grid if grid is None else grid)
    config = config.replace(regret_grid=list(grid))
    T = grid[-1] + regret_tail(config.gamma)
    summary = run_sweep(config, seeds, T=T)
    means = [summary.mean(f"regret_sq@{x}") for x in grid]
    slope = _slope(grid, means) if len(grid) > 1 and min(means) > 0 else float("nan")
    w_mu = Setup.build(config).model_class.w_mu
    bounds = [capability_bound(x, config.gamma, config.L, float(Fraction(config.epsilon)), w_mu) for x in grid]
    summary.series["regret"] = {"x": list(grid), "y": means, "bound": bounds,
                                "xlabel": "T", "ylabel": "summed squared regret", "log": True}
    return {"grid": list(grid), "mean": means, "bound": bounds, "slope": slope, "summary": summary}


def first_trigger_audit(config: RunConfig, predicates: Sequence[str] | None = None, seeds=None) -> dict:
    """Runs in which an optimize-branch action was the first occurrence of each predicate."""
    preds = list(config.predicates if predicates is None else predicates)
    for p in preds:
        if p not in PREDICATES:
            raise ConfigError(f"unknown predicate {p!r}")
    summary = run_sweep(config.replace(predicates=preds), seeds)
    return {p: int(sum(summary.values(f"incident:{p}"))) for p in preds}


# ---------------------------------------------------------------------------
# bound verification


@dataclass(frozen=True)
class Check:
    name: str
    estimate: float
    margin: float
    bound: float
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name}: estimate {self.estimate:.6g} (margin {self.margin:.3g}) vs bound {self.bound:.6g}"


def _upper_check(name, agg, bound) -> Check:
    return Check(name, agg["mean"], agg["half_width"], bound, agg["mean"] - agg["half_width"] <= bound)


def verify_bounds(config: RunConfig, seeds=None) -> list[Check]:
    """Every bound that applies to ``config``, next to its empirical estimate."""
    checks = []
    if config.policy == "uniform":
        for s in config.alpha_steps:
            agg = estimate_alpha_sum(config, s, seeds)
            checks.append(_upper_check(f"alpha sum s={s}", agg, agg["bound"]))
        return checks
    summary = run_sweep(config, seeds)
    agg = summary.aggregate
    w_mu = Setup.build(config).model_class.w_mu
    checks.append(_upper_check("safety triggers", agg["triggers"], trigger_bound(config.L, config.gamma, 0, w_mu)))
    if config.eta == "schedule" and config.T >= 1:
        checks.append(_upper_check("rollout steps", agg["rollout_steps"], rollout_step_bound(config.T, config.gamma)))
    eps = float(Fraction(config.epsilon))
    for T in config.regret_grid:
        key = f"regret_sq@{T}"
        if key in agg:
            checks.append(_upper_check(f"squared regret T={T}", agg[key],
                                       capability_bound(T, config.gamma, config.L, eps, w_mu)))
    if config.record_novelty:
        v = agg["novelty_violations"]
        checks.append(Check("optimize steps at or above the novelty threshold", v["mean"], 0.0, 0.0, v["mean"] == 0))
    for p in config.predicates:
        if config.L >= corollary_level(PREDICATES[p]):
            v = agg[f"incident:{p}"]
            checks.append(Check(f"first occurrences of {p} by the optimizer", v["mean"] * v["n"], 0.0, 0.0,
                                v["mean"] == 0))
    return checks


# ---------------------------------------------------------------------------
# plots


def _plot_setup():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "safemix"
    plt.rcParams["svg.fonttype"] = "path"
    return plt


def emit_plots(summary: MetricsSummary, out_dir) -> list[Path]:
    """One SVG per series in ``summary.series``; an empty summary gives one
    axes-only plot.  Output bytes depend only on the summary."""
    plt = _plot_setup()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = sorted(summary.series.items()) or [("empty", {})]
    paths = []
    for name, s in items:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if s.get("x"):
            ax.plot(s["x"], s["y"], marker="o", label=name)
            if s.get("bound") is not None:
                b = s["bound"]
                if not isinstance(b, list):
                    b = [b] * len(s["x"])
                ax.plot(s["x"], b, linestyle="--", color="black", label="bound")
            if s.get("log"):
                ax.set_xscale("log")
                ax.set_yscale("log")
            ax.legend()
        ax.set_xlabel(s.get("xlabel", ""))
        ax.set_ylabel(s.get("ylabel", ""))
        ax.set_title(name)
        fig.tight_layout()
        path = out / f"{name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths


def add_standard_series(summary: MetricsSummary, trace: RunTrace | None = None) -> MetricsSummary:
    """Trigger counts per seed against their bound, and one novelty trace."""
    c = summary.config
    if summary.per_seed:
        w_mu = Setup.build(RunConfig(**c)).model_class.w_mu
        summary.series["triggers"] = {
            "x": summary.seeds, "y": summary.values("triggers"),
            "bound": trigger_bound(c["L"], c["gamma"], 0, w_mu), "xlabel": "seed", "ylabel": "safety triggers",
        }
    if trace is not None:
        nov = [(r[0], r[10]) for r in trace.rows if r[1] == OPTIMIZE and not math.isnan(r[10])]
        if nov:
            summary.series["novelty"] = {
                "x": [t for t, _ in nov], "y": [v for _, v in nov],
                "bound": safety_threshold(c["L"], INTERLEAVER_BITS), "xlabel": "t",
                "ylabel": "stopping mass at optimize steps",
            }
    return summary
