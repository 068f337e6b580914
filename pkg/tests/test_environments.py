import itertools
import random

import pytest

from safemix.environments import (
    SUITES,
    ConfigError,
    HellModel,
    TabularEnvironment,
    build_model_class,
    constant_model,
    halting_model,
    hell_extend,
    load_suite,
)
from safemix.histories import Codebook, DomainError, Step, encode_history
from safemix.machine import Verdict, assemble, halting_programs, run_machine
from safemix.novelty import INTERLEAVER_BITS, counting_program

NEVER_HALTS = assemble(("READ",), ("RESTART",))


def test_constant_model_predict(cb2):
    m = constant_model("c", cb2, o=0, r=1.0)
    assert m.predict((), 1) == {(0, 1.0): 1.0}
    assert m.halt_mass((), 1) == 0.0


def test_halting_model_predict(cb2):
    m = halting_model("h", cb2)
    assert m.predict((), 0) == {}
    assert m.halt_mass((), 0) == 1.0
    assert not m.proper


def test_two_outcome_model(cb2):
    m = TabularEnvironment("two", 2, cb2, {0: {a: [(0, 1.0, 0.5, 0), (1, 0.0, 0.5, 0)] for a in range(2)}})
    assert m.predict((), 0) == {(0, 1.0): 0.5, (1, 0.0): 0.5}
    assert m.proper


def test_table_validation(cb2):
    with pytest.raises(DomainError):
        TabularEnvironment("x", 1, cb2, {0: {0: [(0, 1.0, 0.7, 0), (1, 0.0, 0.7, 0)]}})
    with pytest.raises(DomainError):
        TabularEnvironment("x", 1, cb2, {0: {0: [(0, 0.25, 1.0, 0)]}})  # reward not in the set


def rewards_along(model, actions):
    s = model.initial_state()
    out = []
    for a in actions:
        ((o, r), p), = model.percepts(s, a)
        out.append(r)
        s = model.advance(s, a, o, r)
    return out


def test_hell_fires_after_three_steps():
    cb = Codebook.build(1, 1, [1], 4)  # each step encodes to 4 bits
    base = constant_model("c", cb)
    q = counting_program(12)
    assert rewards_along(HellModel(base, q), [0] * 6) == [1.0, 1.0, 1.0, -4.0, -4.0, -4.0]


def test_hell_never_halting_equals_base(cb2):
    base = TabularEnvironment("b", 3, cb2, {0: {0: [(0, 1.0, 1.0, 1)], 1: [(1, 0.0, 1.0, 0)]},
                                            1: {0: [(1, 1.0, 1.0, 0)], 1: [(0, 0.0, 1.0, 1)]}})
    hell = hell_extend(base, NEVER_HALTS)
    for n in range(1, 11):
        for actions in itertools.product(range(2), repeat=n):
            assert rewards_along(hell, actions) == rewards_along(base, actions)


def test_hell_immediate_halt_from_t1(cb2):
    hell = hell_extend(constant_model("c", cb2), assemble(("HALT",)))
    assert rewards_along(hell, [0, 1, 0]) == [-1.0] * 3


def test_hell_description_length(cb2):
    base = constant_model("c", cb2, dl=7)
    q = assemble(("READ",), ("HALT",))
    assert hell_extend(base, q).description_length == INTERLEAVER_BITS + 7 + len(q)


def test_hell_rejects_bad_program(cb2):
    with pytest.raises(DomainError):
        hell_extend(constant_model("c", cb2), "01")
    with pytest.raises(DomainError):
        hell_extend(constant_model("c", cb2), "")


def _trigger_position(bits, q):
    r = run_machine(bits, q)
    if r.verdict in (Verdict.HALTS_EXACTLY, Verdict.HALTS_SHORT) and r.program_read == len(q):
        return r.input_read
    return None


def test_hell_matches_machine_oracle_exhaustively():
    """Before q halts on the history bits the hell copy predicts like its
    base; from the first action after that, every reward is -L."""
    suite = load_suite("bandit2", 9)
    cb = suite.codebook
    for base in suite.bases:
        for q in halting_programs(8):
            hell = HellModel(base, q)

            def walk(h, hs, bs, depth):
                for a in range(2):
                    bits = encode_history(h, cb) + cb.encode_action(a)
                    j = _trigger_position(bits, q)
                    got = dict(hell.percepts(hs, a))
                    if j is not None:
                        assert got == {(0, -9.0): 1.0}, (q, h, a)
                    else:
                        assert got == dict(base.percepts(bs, a)), (q, h, a)
                    if depth > 1:
                        for (o, r), p in got.items():
                            nb = base.advance(bs, a, o, r) if j is None else bs
                            walk(h + (Step(a, o, r),), hell.advance(hs, a, o, r), nb, depth - 1)

            walk((), hell.initial_state(), base.initial_state(), 5)


def test_build_model_class_counts():
    assert len(build_model_class({"suite": "bandit2", "budget": 0}).models) == 2
    k = len(halting_programs(8))
    assert len(build_model_class({"suite": "bandit2", "budget": 8, "L": 9}).models) == 2 + 2 * k


def test_build_model_class_weights_frozen():
    mc = build_model_class({"suite": "bandit2", "budget": 8, "L": 9})
    assert mc.w_mu == pytest.approx(0.48144531249999989, abs=1e-15)
    assert sum(mc.models[i].description_length >= 0 for i in range(len(mc.models))) == 14
    total = sum(__import__("math").exp(x) for x in mc.log_prior)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_hell_share_is_interleaver_times_stop_mass():
    """Each family keeps 2^-dl; the hell share is 2^-|i| * sum 2^-|q|."""
    import math

    mc = build_model_class({"suite": "bandit2", "budget": 8, "L": 9})
    qs = halting_programs(8)
    mass = sum(2.0 ** -len(q) for q in qs)
    w = [math.exp(x) for x in mc.log_prior]
    fam = [x for m, x in zip(mc.models, w) if m.id.startswith("mu")]
    hell = [x for m, x in zip(mc.models, w) if m.id.startswith("mu+")]
    assert sum(hell) / sum(fam) == pytest.approx(2.0 ** -INTERLEAVER_BITS * mass, rel=1e-12)


def test_missing_mu_is_config_error():
    with pytest.raises(ConfigError):
        build_model_class({"suite": "bandit2", "mu": "nobody"})
    with pytest.raises(ConfigError):
        build_model_class({"suite": "no-such-suite"})


def test_manifest_lists_every_model():
    mc = build_model_class({"suite": "bandit2", "budget": 6, "L": 1})
    lines = mc.manifest().splitlines()
    assert lines[1] == "id\tdescription_length\tweight\tkind\tstop_program"
    assert len(lines) == 2 + len(mc.models)
    assert sum(1 for ln in lines if ln.split("\t")[3:4] == ["hell"]) == 2 * len(halting_programs(6))


@pytest.mark.parametrize("name", sorted(SUITES))
def test_true_environment_is_proper_and_nonnegative(name):
    suite = load_suite(name, 3)
    mu = suite.base(suite.mu)
    assert mu.proper
    for s in mu.states:
        for a in range(len(suite.codebook.actions)):
            for (o, r), p in mu.percepts(s, a):
                assert r >= 0


def test_mu_rewards_nonnegative_on_random_rollouts():
    rng = random.Random(3)
    for name in SUITES:
        suite = load_suite(name, 3)
        mu = suite.base(suite.mu)
        s = mu.initial_state()
        for _ in range(20_000):
            a = rng.randrange(len(suite.codebook.actions))
            outs = mu.percepts(s, a)
            (o, r), _ = outs[rng.randrange(len(outs))]
            assert r >= 0
            s = mu.advance(s, a, o, r)
