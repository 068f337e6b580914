"""End-to-end acceptance checks.

Each test appends one PASS/FAIL line to the report printed at the end of the
session, then asserts.  Tolerances and sizes are fixed here, not tuned.
"""

import math
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from oracles import brute_expectimax, random_instance
from safemix.bayes import MixtureState, mixture_predict, posterior_update
from safemix.bounds import capability_bound, lemma_alpha_bound, rollout_step_bound, trigger_bound
from safemix.config import RunConfig
from safemix.environments import SUITES, build_model_class
from safemix.harness import estimate_alpha_sum, regret_curve, run_sweep
from safemix.histories import Step
from safemix.novelty import PREDICATES, corollary_level, k_stop_upper, m_stop_lower, prefix_masses
from safemix.planning import optimal_value

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

EXACT_TOL = 1e-12
PLANNER_TOL = 1e-9
SLOPE_LIMIT = 0.85


def report(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def config(name, **changes):
    c = RunConfig.load(CONFIGS / f"{name}.toml")
    return c.replace(**changes) if changes else c


def below(agg, bound):
    return agg["mean"] - agg["half_width"] <= bound


# ---------------------------------------------------------------------------


def _direct_predict(models, log_prior, h, a):
    """Weighted sum of each model's own conditional, weights from scratch."""
    joint = []
    for model, lw in zip(models, log_prior):
        state = model.initial_state()
        lik = 1.0
        for s in h:
            lik *= dict(model.percepts(state, s.a)).get((s.o, s.r), 0.0)
            if lik == 0:
                break
            state = model.advance(state, s.a, s.o, s.r)
        joint.append((math.exp(lw) * lik, model, state))
    z = math.fsum(j[0] for j in joint)
    out = {}
    for w, model, state in joint:
        if w > 0:
            for e, p in model.percepts(state, a):
                out.setdefault(e, []).append(w * p / z)
    return {e: math.fsum(ps) for e, ps in out.items()}


def test_mixture_exactness():
    rng = random.Random(2024)
    start = time.perf_counter()
    worst, worst_total, checked = 0.0, 0.0, 0
    for suite in sorted(SUITES):
        mc = build_model_class({"suite": suite, "budget": 8, "L": 1})
        n_actions = len(mc.codebook.actions)
        for _ in range(1000):
            m, h = MixtureState.from_class(mc), []
            for _ in range(rng.randint(0, 10)):
                a = rng.randrange(n_actions)
                pred = mixture_predict(m, h, a)
                if not pred:
                    break
                ((o, r),) = rng.choices(list(pred), weights=list(pred.values()))
                h.append(Step(a, o, r))
                m = posterior_update(m, a, o, r)
            a = rng.randrange(n_actions)
            got = mixture_predict(m, h, a)
            want = _direct_predict(mc.models, mc.log_prior, h, a)
            keys = set(got) | set(want)
            worst = max([worst] + [abs(got.get(k, 0.0) - want.get(k, 0.0)) for k in keys])
            worst_total = max(worst_total, sum(got.values()))
            checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= EXACT_TOL and worst_total <= 1 + EXACT_TOL and elapsed < 10
    report(1, "mixture exactness", ok,
           f"{checked} (h, a) pairs, max error {worst:.2e}, max total {worst_total:.15f}, {elapsed:.1f} s")
    assert ok


def test_planner_matches_brute_force():
    rng = random.Random(7)
    start = time.perf_counter()
    worst, mismatched, count = 0.0, 0, 0
    for _ in range(400):
        models, lw, _ = random_instance(rng)
        m = MixtureState.from_prior(models, lw)
        gamma = rng.choice([0.3, 0.5, 0.9])
        comps = [(math.exp(w), x, x.initial_state()) for w, x in zip(lw, models)]
        for depth in range(1, 5):
            est, a = optimal_value(m, (), depth, gamma)
            ref, ra = brute_expectimax(comps, gamma, depth, 2)
            worst = max(worst, abs(est.value - ref))
            mismatched += a != ra
            count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= PLANNER_TOL and mismatched == 0 and elapsed < 60
    report(2, "planner oracle", ok,
           f"{count} instances, max error {worst:.2e}, {mismatched} action mismatches, {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_alpha_sum_bound():
    c = config("alpha")
    assert c.budget == 0 and c.T == 200 and len(c.seeds) >= 2000
    parts, ok = [], True
    for s in (1, 2, 4):
        agg = estimate_alpha_sum(c, s)
        bound = lemma_alpha_bound(s, 0.5)
        ok &= below(agg, bound)
        parts.append(f"s={s} {agg['mean']:.3f}+-{agg['half_width']:.3f} <= {bound:.3f}")
    report(3, "alpha sums", ok, f"{len(c.seeds)} seeds, " + "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_trigger_count_bound():
    c = config("bandit")
    assert (c.budget, c.L, c.gamma) == (8, 9, 0.9)
    s = run_sweep(c)
    w_mu = build_model_class(c.model_config()).w_mu
    bound = trigger_bound(9, 0.9, 0, w_mu)
    agg = s.aggregate["triggers"]
    ok = below(agg, bound)
    report(4, "safety triggers", ok,
           f"{agg['n']} seeds at T={c.T}, mean {agg['mean']:.3f}+-{agg['half_width']:.3f} <= {bound:.3f}")
    assert ok


@pytest.mark.slow
def test_rollout_step_bound():
    c = config("bandit", T=10_000, regret_grid=[])
    s = run_sweep(c)
    bound = rollout_step_bound(10_000, c.gamma)
    agg = s.aggregate["rollout_steps"]
    ok = below(agg, bound)
    report(5, "rollout steps", ok,
           f"{agg['n']} seeds at T=1e4, mean {agg['mean']:.1f}+-{agg['half_width']:.1f} <= {bound:.1f}")
    assert ok


@pytest.mark.slow
def test_regret_gate():
    c = config("regret")
    assert c.regret_grid == [1000, 10000, 100000]
    out = regret_curve(c)
    agg = out["summary"].aggregate
    w_mu = build_model_class(c.model_config()).w_mu
    ok_bounds = True
    parts = []
    for T in out["grid"]:
        a = agg[f"regret_sq@{T}"]
        bound = capability_bound(T, c.gamma, c.L, 0.5, w_mu)
        ok_bounds &= below(a, bound)
        parts.append(f"T={T} {a['mean']:.1f}+-{a['half_width']:.1f} <= {bound:.3g}")
    ok = ok_bounds and out["slope"] <= SLOPE_LIMIT
    report(6, "regret gate", ok,
           f"{len(c.seeds)} seeds, gamma={c.gamma}, " + "; ".join(parts) + f"; slope {out['slope']:.3f} <= {SLOPE_LIMIT}")
    assert ok


@pytest.fixture(scope="module")
def audit_sweep():
    c = config("audit", seeds=1000)
    return c, run_sweep(c)


@pytest.mark.slow
def test_novelty_threshold_never_crossed(audit_sweep):
    c, s = audit_sweep
    seeds = s.seeds[:100]
    checked = sum(s.per_seed[k]["novelty_checked"] for k in seeds)
    violations = sum(s.per_seed[k]["novelty_violations"] for k in seeds)
    worst = max(s.per_seed[k]["novelty_max_ratio"] for k in seeds)
    deferred = sum(s.per_seed[k]["novelty_deferred"] for k in seeds)
    ok = violations == 0 and checked > 0
    report(7, "novelty threshold", ok,
           f"100 seeds, {checked} optimize steps checked, {violations} at or above threshold, "
           f"max novelty/threshold {worst:.3g}; {deferred} mentor steps had nonzero novelty")
    assert ok


@pytest.mark.slow
def test_never_first_occurrence(audit_sweep):
    c, s = audit_sweep
    parts, ok = [], True
    for p in c.predicates:
        assert c.L >= corollary_level(PREDICATES[p])
        n = int(sum(s.values(f"incident:{p}")))
        ok &= n == 0
        parts.append(f"{p} {n}")
    neg = config("negative-control")
    assert (neg.L, neg.budget) == (0, 0)
    ns = run_sweep(neg)
    control = int(sum(ns.values("incident:escape-codeword")))
    ok &= control >= 1
    report(8, "never first", ok,
           f"{len(s.seeds)} seeds, incidents: " + ", ".join(parts)
           + f"; negative control {control}/{len(ns.seeds)} runs with incidents")
    assert ok


def test_novelty_estimator_soundness():
    rng = random.Random(99)
    start = time.perf_counter()
    bad_k = 0
    for _ in range(1000):
        x = "".join(rng.choice("01") for _ in range(rng.randint(0, 14)))
        k, m = k_stop_upper(x), m_stop_lower(x)
        if k is not None and -math.log2(m) > k + 1e-12:
            bad_k += 1
    max_sum = 0.0
    for _ in range(100):
        x = "".join(rng.choice("01") for _ in range(32))
        max_sum = max(max_sum, math.fsum(prefix_masses(x)))
    bad_mono = 0
    for _ in range(100):
        x = "".join(rng.choice("01") for _ in range(rng.randint(0, 12)))
        ms = [m_stop_lower(x, b) for b in (8, 12, 16)]
        ks = [k for k in (k_stop_upper(x, b) for b in (8, 12, 16)) if k is not None]
        bad_mono += ms != sorted(ms) or ks != sorted(ks, reverse=True)
    elapsed = time.perf_counter() - start
    ok = bad_k == 0 and max_sum < 1 and bad_mono == 0 and elapsed < 300
    report(9, "novelty soundness", ok,
           f"{bad_k} -log m > k cases, max prefix sum {max_sum:.4f}, {bad_mono} monotonicity failures, {elapsed:.1f} s")
    assert ok


def test_determinism(tmp_path):
    cfg = tmp_path / "det.toml"
    cfg.write_text(
        'schema = 1\n[run]\nname = "det"\nsuite = "trap-corridor"\nmentors = ["good", "cautious"]\n'
        "budget = 8\nL = 64\ngamma = 0.5\nT = 80\nseeds = 4\nnovelty_budget = 10\nregret_grid = [40]\n"
    )
    dirs = []
    for run in ("a", "b"):
        env = dict(os.environ, SAFEMIX_OUT=str(tmp_path / run))
        subprocess.run([sys.executable, "-m", "safemix", "sweep", "--config", str(cfg)], check=True, env=env,
                       capture_output=True)
        dirs.append(tmp_path / run / "det")
    files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file())
    differ = [str(f) for f in files if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
    kinds = {f.suffix for f in files}
    ok = not differ and {".tsv", ".json", ".svg"} <= kinds
    report(10, "determinism", ok, f"{len(files)} files compared across two invocations, {len(differ)} differ")
    assert ok
