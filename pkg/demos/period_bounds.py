"""
Suboptimal periods against the concentration bound
==================================================

A period runs from one transition into the empty state to the next.  Within
its busy phase the optimal policy never changes channel.  The chance that
this channel is not the best one decays with the period index; the
closed-form bound below caps it.
"""

import numpy as np

from aoi_bandits import BoundInputs, NetworkConfig, cp_constant, run_batch, suboptimal_period_rate
from aoi_bandits.metrics import bound_table, suboptimal_bound

config = NetworkConfig(3, 5, 0.1, (0.4, 0.45, 0.5, 0.55, 0.6), horizon=50_000,
                       base_seed=3, replications=200)
inputs = BoundInputs.from_config(config)

table = bound_table(inputs)
print("closed-form constant C_p =", round(table["cp_constant"], 1))
for n, row in table["hoeffding"].items():
    print(f"channel {n} (gap {row['gap']:.2f}) raw bound at p={table['periods']}:",
          np.round(row["raw"], 4).tolist())

# %%
# Empirical frequency of suboptimal periods across replications.
rates = suboptimal_period_rate(run_batch(config, "optimal"))
for p in (1, 10, 100, 1_000, 3_000):
    i = p - 1
    if i < len(rates.samples) and rates.samples[i] >= 100:
        print(f"p={p:>5}: rate {rates.rate[i]:.3f} (n={rates.samples[i]}), "
              f"bound {float(suboptimal_bound(p, inputs)):.3f}")

# %%
# The bound is loose: the whole empirical sum is far below C_p.
print(f"sum of empirical rates {rates.partial_sum:.1f} <= {cp_constant(inputs):.1f}")
