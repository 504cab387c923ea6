# %% [markdown]
# # Where the devices sit and what they receive
#
# Devices are dropped uniformly on the factory floor and hear the strongest
# of the ceiling-mounted base stations. The resulting distribution of incident
# power drives everything else.

# %%
from __future__ import annotations

import numpy as np
import matplotlib.pyplot as plt

from aiot_inventory import LayoutConfig, harvest_power
from aiot_inventory.channel import incident_power, place_devices

# %%
layout = LayoutConfig()
rng = np.random.default_rng(1)
pos, pin = place_devices(600, layout, rng)
assert np.allclose(pin, incident_power(pos, layout))
print(f"p_in: min {pin.min():.1f}, median {np.median(pin):.1f}, max {pin.max():.1f} dBm")

# %%
fig, ax = plt.subplots(1, 2, figsize=(10, 3.5))
sc = ax[0].scatter(pos[:, 0], pos[:, 1], c=pin, s=6, cmap="viridis")
fig.colorbar(sc, ax=ax[0], label="p_in (dBm)")
ax[0].set(xlabel="x (m)", ylabel="y (m)", aspect="equal")
ax[1].plot(np.sort(pin), np.linspace(0, 1, pin.size))
ax[1].set(xlabel="p_in (dBm)", ylabel="CDF")
fig.tight_layout()

# %% [markdown]
# The weakest tenth of the population sets the 99% completion time, since a
# device near the turn-off threshold must wait out a full recharge first.

# %%
weak = np.sort(pin)[: pin.size // 10]
print(f"weakest 10%: p_in up to {weak.max():.1f} dBm, "
      f"250 nJ recharge up to {250e-9 / harvest_power(weak.min()):.1f} s")

# %%
plt.show()
