from __future__ import annotations

import numpy as np
import pytest

from aiot_inventory.device import (
    NEVER,
    DeviceState,
    Mechanism,
    Population,
    advance,
    assign_group,
    dcm_step,
    em_step,
    on_msg2,
    on_paging,
    paging_receivers,
    respond_to_paging,
    return_to_idle,
)
from aiot_inventory.energy import harvest_power
from aiot_inventory.metrics import EventKind, EventLog
from aiot_inventory.params import DEVICE1, DEVICE2
from aiot_inventory.reader import Msg2, PagingMsg

NJ = 1e-9
DT = 0.5e-3


def _pop(mech="em", p_in=(-30.0,), table=DEVICE1, **kw):
    return Population.create(table, mech, np.array(p_in, float), **kw)


def test_off_devices_only_harvest():
    pop = _pop(p_in=(-36.0, -20.0))
    pop.e[:] = 300 * NJ
    em_step(pop, 0)
    expected = 300 * NJ + harvest_power(np.array([-36.0, -20.0])) * DT
    np.testing.assert_allclose(pop.e, expected)
    assert np.all(pop.state == DeviceState.OFF)


def test_turn_on_at_threshold():
    pop = _pop()
    pop.e[:] = 500 * NJ
    em_step(pop, 7)
    assert pop.state[0] == DeviceState.ON_MONITORING
    assert pop.on_since[0] == 7
    assert pop.e[0] == pytest.approx(499.5 * NJ)


def test_no_rf_stays_off():
    pop = _pop(p_in=(-200.0,))
    pop.e[:] = 499.999 * NJ
    advance(pop, 0, 10_000)
    assert pop.state[0] == DeviceState.OFF


def test_em_on_interval_is_500_slots():
    # device 1 pays 0.5 nJ per monitoring slot, 250 nJ usable
    pop = _pop(p_in=(-200.0,))
    pop.e[:] = 500 * NJ
    log = EventLog()
    advance(pop, 0, 600, log)
    ch = log.of_kind(EventKind.STATE_CHANGE)
    assert [(r["slot"], r["a"], r["b"]) for r in ch] == [(0, 0, 1), (500, 1, 0)]
    assert pop.outages[0] == 1
    assert pop.e[0] >= 250 * NJ


def test_dcm_on_timer_expiry():
    pop = _pop("dcm", p_in=(-200.0,))
    pop.e[:] = 500 * NJ
    log = EventLog()
    advance(pop, 0, 100, log)
    ch = log.of_kind(EventKind.STATE_CHANGE)
    assert [(r["slot"], r["b"]) for r in ch] == [(0, 1), (36, 0)]
    assert pop.e[0] == pytest.approx(482 * NJ)
    assert pop.outages[0] == 0


def test_dcm_resumes_when_recharged():
    pop = _pop("dcm", p_in=(-20.0,))
    pop.e[:] = 500 * NJ
    advance(pop, 0, 36)
    assert pop.state[0] == DeviceState.ON_MONITORING
    dcm_step(pop, 36)
    assert pop.state[0] == DeviceState.OFF
    need = int(np.ceil(18 * NJ / (harvest_power(-20.0) * DT)))
    advance(pop, 37, 37 + need)
    dcm_step(pop, 37 + need)
    assert pop.state[0] == DeviceState.ON_MONITORING


@pytest.mark.parametrize("table, ng, period, window", [(DEVICE1, 1, 24, 4), (DEVICE2, 2, 56, 2)])
def test_synchronized_cycle(table, ng, period, window):
    pop = _pop("dcm", p_in=(-10.0,), table=table, n_groups=ng, lp_wur=table is DEVICE2)
    pop.e[:] = table.e_up_j
    pop.synced[0] = True
    pop.state[0] = DeviceState.SLEEP
    pop.wake[0] = 100
    pop.next_group_paging[0] = 100
    log = EventLog()
    advance(pop, 0, 100 + window + 1, log)
    # the engine learns the next group paging a few slots later and announces it
    pop.next_group_paging[0] = 100 + period
    pop.wake[0] = pop.wake_slot_for(0, 100 + window)
    advance(pop, 100 + window + 1, 100 + period + 1, log)
    ch = [(int(r["slot"]), int(r["b"])) for r in log.of_kind(EventKind.STATE_CHANGE)]
    assert ch == [(100, 1), (100 + window, 2), (100 + period, 1)]


def test_brownout_before_msg3():
    pop = _pop(p_in=(-200.0,))
    pop.e[:] = 250.3 * NJ
    pop.state[0] = DeviceState.EX_MSG3
    pop.tx_start[0], pop.tx_end[0] = 10, 16
    log = EventLog()
    advance(pop, 0, 20, log)
    assert pop.state[0] == DeviceState.OFF
    assert pop.outages[0] == 1
    off = log.of_kind(EventKind.STATE_CHANGE)
    assert off["slot"][0] < 10


def test_brownout_clears_sync():
    pop = _pop("dcm", p_in=(-200.0,))
    pop.e[:] = 250.2 * NJ
    pop.synced[0] = True
    pop.state[0] = DeviceState.SLEEP
    pop.wake[0] = NEVER
    advance(pop, 0, 100)
    assert pop.state[0] == DeviceState.OFF
    assert not pop.synced[0]


def test_groups():
    assert assign_group(3, 2) == 1
    assert all(assign_group(k, 1) == 0 for k in range(10))
    assert assign_group(7, 4) == 3
    with pytest.raises(ValueError):
        assign_group(0, 0)


def test_monitoring_draw():
    assert _pop(table=DEVICE2, lp_wur=True).monitoring_draw(0) == pytest.approx(1e-6)
    assert _pop(table=DEVICE2).monitoring_draw(0) == pytest.approx(50e-6)
    assert _pop(lp_wur=True).monitoring_draw(0) == pytest.approx(1e-6)


def _listening(n, mech="em"):
    pop = _pop(mech, p_in=np.full(n, -10.0))
    pop.e[:] = 500 * NJ
    pop.state[:] = DeviceState.ON_MONITORING
    return pop


def test_zero_access_probability():
    pop = _listening(50)
    paging = PagingMsg(0, 10, 0.0, 4, 2)
    assert respond_to_paging(pop, np.arange(50), paging, 12, np.random.default_rng(0), 11) == []
    assert np.all(pop.state == DeviceState.ON_MONITORING)


def test_ao_choice_is_uniform():
    n = 80_000
    pop = _listening(n)
    msgs = respond_to_paging(pop, np.arange(n), PagingMsg(0, 10, 1.0, 4, 2), 12, np.random.default_rng(1), 11)
    counts = np.bincount([m.ao_time * 2 + m.ao_freq for m in msgs], minlength=8)
    chi2 = ((counts - n / 8) ** 2 / (n / 8)).sum()
    # 0.999 quantile of chi-square with 7 degrees of freedom
    assert chi2 < 24.32
    assert all(0 <= m.random_id < 1 << 16 for m in msgs)
    assert {m.slot for m in msgs} == {12, 13, 14, 15}


def test_inventoried_device_stays_silent():
    pop = _listening(1)
    pop.inventoried[0] = True
    sent = respond_to_paging(pop, np.array([0]), PagingMsg(0, 10, 1.0, 4, 2), 12, np.random.default_rng(0), 11)
    assert sent == []
    with pytest.raises(ValueError):
        on_paging(pop, 0, PagingMsg(0, 10, 1.0, 4, 2), np.random.default_rng(0))


def test_dcm_decliner_sleeps_and_synchronizes():
    pop = _listening(1, "dcm")
    pop.next_group_paging[0] = 34
    paging = PagingMsg(5, 10, 0.0, 4, 2, group_modulus=1)
    respond_to_paging(pop, np.array([0]), paging, 12, np.random.default_rng(0), 11)
    assert pop.synced[0]
    assert pop.state[0] == DeviceState.SLEEP
    assert pop.wake[0] == 34


def test_return_to_idle_em_keeps_monitoring():
    pop = _listening(2)
    pop.state[1] = DeviceState.OFF
    return_to_idle(pop, np.array([0, 1]), 20)
    assert pop.state[0] == DeviceState.ON_MONITORING and pop.on_since[0] == 21
    assert pop.state[1] == DeviceState.OFF


def test_paging_needs_full_reception():
    pop = _listening(3)
    pop.on_since[:] = [5, 10, 11]
    paging = PagingMsg(0, 10, 1.0, 4, 2)
    assert list(paging_receivers(pop, paging)) == [0, 1]


def test_grouped_receivers():
    pop = Population.create(DEVICE1, "dcm", np.full(3, -10.0), n_groups=2)
    pop.state[:] = DeviceState.ON_MONITORING
    pop.synced[:] = [True, True, False]
    pop.group[:] = [0, 1, 0]
    assert list(paging_receivers(pop, PagingMsg(3, 10, 1.0, 4, 2, group_modulus=2))) == [1, 2]


def test_msg2_matching():
    pop = _listening(1)
    msg = on_paging(pop, 0, PagingMsg(0, 10, 1.0, 4, 2), np.random.default_rng(0))
    assert msg is not None
    pop.state[0] = DeviceState.EX_MSG2
    assert on_msg2(pop, 0, Msg2((msg.random_id + 1) % 65536, 16, 17, 23, 0)) is None
    m3 = on_msg2(pop, 0, Msg2(msg.random_id, 16, 17, 23, 1))
    assert (m3.device_id, m3.slot, m3.freq) == (0, 17, 1)
    assert pop.state[0] == DeviceState.EX_MSG3
    assert (pop.tx_start[0], pop.tx_end[0]) == (17, 23)


def test_step_functions_check_mechanism():
    with pytest.raises(ValueError):
        dcm_step(_pop("em"), 0)
    with pytest.raises(ValueError):
        em_step(_pop("dcm"), 0)
    assert Mechanism.parse("DCM") is Mechanism.DCM


def test_dcm_device_starting_on_holds_spent_window_energy():
    n = 2000
    rng = np.random.default_rng(3)
    pop = Population.create(DEVICE1, "dcm", rng.uniform(-40, -10, n))
    pop.init_state(rng.uniform(size=n), rng.uniform(size=n))
    on = pop.state == DeviceState.ON_MONITORING
    assert on.any()
    spent = (DEVICE1.t_on_timer_slots - pop.on_rem[on]) * 1e-6 * DEVICE1.slot_s
    assert np.all(pop.e[on] >= DEVICE1.e_up_j - spent - 1e-15)
    # what is left always covers the rest of the timer
    assert np.all(pop.e[on] - pop.on_rem[on] * 1e-6 * DEVICE1.slot_s >= 482e-9 - 1e-15)
