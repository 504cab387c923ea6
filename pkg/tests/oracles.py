"""Independent reference computations used by the tests."""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict

import numpy as np

from aiot_inventory.device import DeviceState, Mechanism, Population, respond_to_paging
from aiot_inventory.params import DEVICE1
from aiot_inventory.reader import Outcome, PagingMsg, detect_msg1


def enumerate_success(n: int, k: int, q: float) -> float:
    """Exact single-round success probability of device 0 by brute force.

    Every device independently stays silent (weight 1 - q) or picks one of
    the ``k`` AOs (weight q / k); device 0 succeeds when it transmits and no
    other device picked its AO.
    """
    choices = [None] + list(range(k))
    total = 0.0
    for combo in itertools.product(choices, repeat=n):
        w = 1.0
        for c in combo:
            w *= (1.0 - q) if c is None else q / k
        mine = combo[0]
        if mine is not None and Counter(combo)[mine] == 1:
            total += w
    return total


def simulate_success(n: int, ao_time: int, ao_freq: int, q: float, trials: int, seed: int = 0) -> np.ndarray:
    """Per-trial success of device 0 through the simulator's own paging response and Msg1 detection.

    ``trials`` independent rounds are run at once: trial ``j`` owns devices
    ``j*n .. j*n + n - 1`` and its own AO grid.
    """
    pop = Population.create(DEVICE1, Mechanism.EM, np.zeros(n * trials))
    pop.state[:] = DeviceState.ON_MONITORING
    paging = PagingMsg(round_index=0, slot=10, access_probability=q, ao_time=ao_time, ao_freq=ao_freq)
    rng = np.random.default_rng(seed)
    sent = respond_to_paging(pop, np.arange(n * trials), paging, 12, rng, 11)
    per_ao = defaultdict(list)
    for m in sent:
        per_ao[(m.device_id // n, m.ao_time, m.ao_freq)].append(m)
    outcomes = detect_msg1(per_ao)
    ok = np.zeros(trials, bool)
    for (trial, _, _), o in outcomes.items():
        if o.kind is Outcome.SUCCESS and o.device_id % n == 0:
            ok[trial] = True
    return ok
