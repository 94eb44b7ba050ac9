"""
How fast the reliabilities are learned
======================================

With heavy traffic (arrival rate 0.75) the system is rarely empty.  The
optimal policy only learns in empty slots, so its estimates move slowly.
The hybrid policy runs Thompson sampling for the first 10^4 slots and then
hands its estimates over.
"""

import numpy as np

from aoi_bandits import NetworkConfig, regret_curve, run_batch

config = NetworkConfig(3, 5, 0.75, (0.4, 0.45, 0.5, 0.55, 0.6), horizon=100_000,
                       base_seed=2, replications=30)
grid = np.array([10, 100, 1_000, 10_000, 30_000, 100_000])

records = {name: regret_curve(run_batch(config, name, grid=grid))
           for name in ("optimal", "hybrid")}

# %%
# Mean estimates of the two best channels (true values 0.55 and 0.6).
for name, rec in records.items():
    print(name)
    for t, est in zip(rec.grid, rec.estimates_mean):
        print(f"  t={t:>6}  mu4={est[3]:.3f}  mu5={est[4]:.3f}")

# %%
# The regret at the horizon shows what slow learning costs.
for name, rec in records.items():
    print(f"{name:>8}: R(T) = {rec.regret_mean[-1]:.0f} +- {rec.regret_stderr[-1]:.0f}")
