# %% [markdown]
# # Harvesting, storage and the cost of listening
#
# A device charges its store from the incident RF power and spends it on
# listening, sleeping and transmitting. This script looks at how long those
# phases last for both device classes.

# %%
from __future__ import annotations

import numpy as np
import matplotlib.pyplot as plt

from aiot_inventory import DEVICE1, DEVICE2, conversion_efficiency, harvest_power

# %% [markdown]
# The conversion efficiency is piecewise linear in dBm with its peak at -10 dBm.

# %%
p = np.linspace(-45, 5, 501)
fig, ax = plt.subplots(1, 2, figsize=(9, 3.2))
ax[0].plot(p, conversion_efficiency(p, "peak"), label="peak")
ax[0].plot(p, conversion_efficiency(p, "printed"), "--", label="printed")
ax[0].set(xlabel="p_in (dBm)", ylabel="efficiency")
ax[0].legend()
ax[1].semilogy(p, harvest_power(p) * 1e9)
ax[1].set(xlabel="p_in (dBm)", ylabel="harvested power (nW)")
fig.tight_layout()

# %% [markdown]
# Time to go from the turn-off to the turn-on threshold. At the edge of the
# hall a device-1 store needs about twenty seconds, a device-2 store ten times
# longer.

# %%
for name, table in (("device 1", DEVICE1), ("device 2", DEVICE2)):
    gap = table.e_up_j - table.e_low_j
    for pin in (-36.0, -30.0, -20.0):
        print(f"{name:8s} p_in={pin:5.1f} dBm  recharge {gap / harvest_power(pin):7.1f} s")

# %% [markdown]
# Listening drains the store much faster than it fills. With the receiver on,
# a full device-1 window lasts 250 ms and a device-2 window 50 ms.

# %%
for name, table in (("device 1", DEVICE1), ("device 2", DEVICE2)):
    pw = table.power()
    print(f"{name}: on window {(table.e_up_j - table.e_low_j) / pw.p_rx * 1e3:.0f} ms, "
          f"sleep breaks even at {np.interp(pw.p_sl, harvest_power(p), p):.1f} dBm or better")

# %% [markdown]
# The last line matters for duty cycling: at 0.1 uW of sleep draw, any device
# below roughly -30 dBm harvests less than it spends while asleep, so a
# synchronized sleeper still drifts down to the turn-off threshold.

# %%
plt.show()
