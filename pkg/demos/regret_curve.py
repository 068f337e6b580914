"""Summed squared regret against the best mentor, on a log-log scale.

Regret here is the shortfall of the agent's realized discounted return
against the best eligible mentor's value, squared and summed.  The bound
grows like T^(2/3) up to logs; the curve below should sit far underneath it
and bend toward that rate.  Sizes are kept small so this runs in seconds;
``configs/regret.toml`` has the full-sized version.
"""

# %%
from pathlib import Path

from safemix.config import RunConfig
from safemix.harness import emit_plots, regret_curve

config = RunConfig(suite="bandit2", gamma=0.5, seeds=8, record_novelty=False, predicates=[],
                   regret_grid=[300, 1000, 3000, 10000])
out = regret_curve(config)
for T, y, b in zip(out["grid"], out["mean"], out["bound"]):
    print(f"T={T:6d}  regret {y:8.2f}  bound {b:12.1f}")
print(f"log-log slope {out['slope']:.3f}")

# %%
paths = emit_plots(out["summary"], Path("runs") / "demo-regret" / "plots")
print("plot:", *paths)
