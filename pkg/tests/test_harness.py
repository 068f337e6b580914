import pytest

from safemix.agent import Setup, run_episode
from safemix.config import RunConfig
from safemix.environments import ConfigError
from safemix.harness import (
    MetricsSummary,
    add_standard_series,
    emit_plots,
    estimate_alpha_sum,
    first_trigger_audit,
    regret_tail,
    run_sweep,
    summary_from_traces,
    trace_metrics,
    verify_bounds,
)


def small(**kw):
    base = dict(suite="bandit2", budget=6, L=3, T=60, record_novelty=True, novelty_budget=8,
                regret_grid=[], predicates=["escape-codeword"], seeds=[0, 1, 2])
    base.update(kw)
    return RunConfig(**base)


def test_regret_tail():
    assert regret_tail(0.9) == 197
    assert regret_tail(0.5) == 30


def test_single_seed_summary_is_the_run_metrics():
    c = small()
    summary = run_sweep(c, [4])
    setup = Setup.build(c)
    assert summary.per_seed[4] == trace_metrics(run_episode(c, 4, setup), setup)
    agg = summary.aggregate["steps"]
    assert agg["n"] == 1 and agg["mean"] == 60 and agg["half_width"] == 0


def test_sweep_deterministic_and_recomputable(tmp_path):
    c = small()
    a = run_sweep(c, None, tmp_path / "a")
    b = run_sweep(c, None, tmp_path / "b")
    assert a.to_text() == b.to_text()
    assert (tmp_path / "a" / "summary.json").read_text() == a.to_text()
    rebuilt = summary_from_traces(sorted((tmp_path / "a").glob("trace-*.tsv")))
    assert rebuilt.per_seed == a.per_seed
    assert MetricsSummary.from_text(a.to_text()).to_text() == a.to_text()


def test_merge_is_associative():
    c = small(T=30)
    parts = [run_sweep(c, [s]) for s in range(3)]
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    assert left.to_text() == right.to_text() == run_sweep(c, [0, 1, 2]).to_text()
    with pytest.raises(ConfigError):
        parts[0].merge(run_sweep(small(T=31), [5]))


def test_branch_metrics_add_up():
    m = run_sweep(small(), [0]).per_seed[0]
    assert m["optimize_steps"] + m["mentor_steps"] == m["steps"]
    assert m["safety_steps"] + m["rollout_steps"] == m["mentor_steps"]
    assert m["novelty_checked"] == m["optimize_steps"]


def test_alpha_zero_cases():
    c = RunConfig(suite="bandit2", policy="uniform", T=20, seeds=[0, 1], predicates=[], regret_grid=[])
    assert estimate_alpha_sum(c, 0)["mean"] == 0
    with pytest.raises(ConfigError):
        estimate_alpha_sum(small(), 1)


def test_alpha_vanishes_without_rivals():
    c = RunConfig(suite="bandit2", policy="uniform", T=20, seeds=[0], predicates=[], regret_grid=[])
    setup = Setup.build(c)
    from safemix.bayes import MixtureState, alpha_per_model
    from safemix.environments import ModelClass
    from safemix.harness import UniformPolicy

    mc = setup.model_class
    single = ModelClass(mc.suite, [mc.mu], [0.0], 0, 0, ())
    assert alpha_per_model(MixtureState.from_class(single), UniformPolicy(2), 3) == 0


def test_regret_near_zero_when_following_best_mentor():
    c = RunConfig(suite="bandit2", policy="mentor:good", T=20 + regret_tail(0.9), seeds=[0, 1],
                  regret_grid=[20], predicates=[], record_novelty=False)
    s = run_sweep(c)
    assert s.mean("regret_sq@20") < 1e-12


def test_regret_near_zero_for_mu_optimal_agent():
    from safemix.environments import ModelClass

    c = RunConfig(suite="bandit2", eta="off", T=20 + regret_tail(0.9), seeds=[0],
                  regret_grid=[20], predicates=[], record_novelty=False)
    setup = Setup.build(c)
    mc = setup.model_class
    setup.model_class = ModelClass(mc.suite, [mc.mu], [0.0], 0, 0, ())
    m = trace_metrics(run_episode(c, 0, setup), setup)
    assert m["optimize_steps"] == m["steps"]
    assert m["regret_sq@20"] < 1e-12


def test_negative_control_audit_has_incidents():
    c = RunConfig(suite="trap-corridor", mentors=["good", "cautious"], budget=0, L=0, gamma=0.5, T=40,
                  predicates=["escape-codeword"], regret_grid=[], record_novelty=False, seeds=[0, 1, 2])
    assert first_trigger_audit(c)["escape-codeword"] > 0
    with pytest.raises(ConfigError):
        first_trigger_audit(c, ["nonsense"])


def test_verify_bounds_lines():
    checks = verify_bounds(small(T=100))
    names = [c.name for c in checks]
    assert "safety triggers" in names and "rollout steps" in names
    assert all(c.line().startswith(("PASS", "FAIL")) for c in checks)


def test_plots_empty_and_single_series(tmp_path):
    empty = MetricsSummary({"L": 0})
    (p,) = emit_plots(empty, tmp_path / "e")
    assert p.name == "empty.svg" and "<polyline" not in p.read_text() and "<svg" in p.read_text()
    one = MetricsSummary({"L": 0}, series={"demo": {"x": [1, 2, 3], "y": [3, 1, 2], "bound": 2.5}})
    (q,) = emit_plots(one, tmp_path / "o")
    text = q.read_text()
    assert text.count("<path") >= 2 and "bound" not in q.name


def test_plots_byte_identical(tmp_path):
    s = run_sweep(small(), [0, 1])
    add_standard_series(s, run_episode(small(), 0))
    a = emit_plots(s, tmp_path / "a")
    b = emit_plots(MetricsSummary.from_text(s.to_text()), tmp_path / "b")
    assert [p.name for p in a] == ["novelty.svg", "triggers.svg"]
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]



def test_plot_golden_file(tmp_path, request):
    golden = request.path.parent / "data" / "golden-demo.svg"
    one = MetricsSummary({"L": 0}, series={"demo": {"x": [1, 2, 3], "y": [3, 1, 2], "bound": 2.5,
                                                    "xlabel": "t", "ylabel": "y"}})
    (p,) = emit_plots(one, tmp_path)
    assert p.read_bytes() == golden.read_bytes()
