# %% [markdown]
# # Access probability and paging groups
#
# The reader estimates the backlog from the last round's outcome counts and
# sets the access probability so that about one device answers per access
# occasion. Splitting the population into paging groups spreads the
# synchronized devices over more rounds.

# %%
from __future__ import annotations

import numpy as np
import matplotlib.pyplot as plt

from aiot_inventory import Mechanism, default_scenario, run

# %%
base = default_scenario("device1", mechanism=Mechanism.DCM, seed=2, log_events=False, max_sim_s=30.0)
for ac in (True, False):
    res = run(base.with_(access_control=ac))
    print(f"access control {ac!s:5s}: T90 {res.quantiles['t90_s']}  T99 {res.quantiles['t99_s']}")

# %%
res = run(base)
plt.figure(figsize=(6, 3))
plt.semilogy(np.asarray(res.q_history))
plt.xlabel("round")
plt.ylabel("access probability")

# %% [markdown]
# Grouping shortens the early part of the curve but leaves the 99% point where
# the energy tail puts it.

# %%
for ng in (1, 2, 4, 8):
    r = run(base.with_(n_groups=ng))
    q = r.quantiles
    print(f"N_g={ng}: T90 {q['t90_s']}  T95 {q['t95_s']}  T99 {q['t99_s']}")

# %%
plt.show()
