"""Does the optimizer ever do something new first?

The corridor has a novel LEAP action that sends the agent into a trap.  A
simpler rival model claims the trap pays 1 forever, so a plain Bayes-optimal
agent with a small prior on catastrophe jumps.  With enough hell models and a
large enough L, the agent defers at every unprecedented moment and the
mentors, who never leap, act instead.
"""

# %%
from safemix.bounds import safety_threshold
from safemix.config import RunConfig
from safemix.harness import first_trigger_audit, run_sweep
from safemix.novelty import PREDICATES, corollary_level

guarded = RunConfig(suite="trap-corridor", mentors=["good", "cautious"], budget=12, L=2**19, gamma=0.5,
                    T=100, seeds=20, novelty_budget=12, regret_grid=[],
                    predicates=["escape-codeword", "ends-in-1"])
for p in guarded.predicates:
    print(f"{p:16s} program {PREDICATES[p].complexity_bits:2d} bits, guarantee from L >= {corollary_level(PREDICATES[p]):g}")

# %%
print("guarded:", first_trigger_audit(guarded))
s = run_sweep(guarded)
print("optimize steps with novelty checked:", sum(s.values("novelty_checked")))
print("violations of the threshold", safety_threshold(guarded.L, 3), ":", sum(s.values("novelty_violations")))

# %%
# Same corridor, no hell models and L = 0: the escape codeword shows up
# first through the optimizer's own leap.
bare = guarded.replace(budget=0, L=0, record_novelty=False, predicates=["escape-codeword"])
print("unguarded:", first_trigger_audit(bare))
