"""A two-armed bandit watched by hell models.

The true bandit pays 1 on arm 0 and 1/2 on arm 1 (in expectation).  The model
class also holds one "hell" copy of each base model for every stop program of
at most 8 bits: the copy behaves exactly like its base until its program
halts on the history so far, then pays -L forever.  This script runs the agent
for a few hundred steps and shows where its time went.
"""

# %%
from safemix.agent import Setup, run_episode
from safemix.bounds import rollout_step_bound, trigger_bound
from safemix.config import RunConfig
from safemix.harness import trace_metrics

config = RunConfig(suite="bandit2", budget=8, L=9, gamma=0.9, T=600, record_novelty=False,
                   predicates=[], regret_grid=[])
setup = Setup.build(config)
mc = setup.model_class
print(f"{len(mc.models)} models, prior weight of the true bandit {mc.w_mu:.4f}")
print(mc.manifest().splitlines()[2])

# %%
# One run.  Branches: optimize (planner's action), safety (value fell to -1
# or below, a mentor acts), explore/rollout (a random mentor rollout).
trace = run_episode(config, seed=0, setup=setup)
print(trace.branch_counts())

m = trace_metrics(trace, setup)
print(f"safety triggers  {m['triggers']:4d}   bound {trigger_bound(9, 0.9, 0, mc.w_mu):.1f}")
print(f"rollout steps    {m['rollout_steps']:4d}   bound {rollout_step_bound(config.T, 0.9):.1f}")

# %%
# What the agent thinks of its options over time: the certified value
# interval at each optimize step, sampled every 100 steps.
for row in trace.rows[::100]:
    t, branch, a, o, r, _, _, lo, hi = row[:9]
    print(f"t={t:4d} {branch:9s} arm {a} reward {r:+.0f}  V* in [{lo:+.3f}, {hi:+.3f}]")

# %%
# Turning the exploration schedule off leaves a pure Bayes-optimal planner
# that only defers when its value drops to -1.
greedy = run_episode(config.replace(eta="off"), seed=0, setup=setup)
print("no exploration:", greedy.branch_counts())
