"""Per-device state machines for energy-based (EM) and duty-cycled (DCM) monitoring.

Devices are stored column-wise in a :class:`Population`. Energy integration,
threshold transitions and timers run in a compiled kernel over ranges of
slots (:func:`advance`); protocol reactions (paging, Msg2) are applied from
Python by the engine between kernel calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum

import numba
import numpy as np

from .energy import EfficiencyMode, harvest_power
from .metrics import EventKind, EventLog
from .params import Table1
from .reader import Msg1, Msg2, Msg3, PagingMsg

NEVER = np.iinfo(np.int64).max // 4
RANDOM_ID_BITS = 16


class DeviceState(IntEnum):
    OFF = 0
    ON_MONITORING = 1
    SLEEP = 2
    # OnExchange substates
    EX_MSG1 = 3
    EX_MSG2 = 4
    EX_MSG3 = 5

    @property
    def is_on(self) -> bool:
        return self in (DeviceState.ON_MONITORING, DeviceState.EX_MSG1, DeviceState.EX_MSG2, DeviceState.EX_MSG3)

    @property
    def is_exchange(self) -> bool:
        return self >= DeviceState.EX_MSG1


class Mechanism(str, Enum):
    EM = "em"
    DCM = "dcm"

    @classmethod
    def parse(cls, value) -> "Mechanism":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown mechanism: {value!r}") from None


def assign_group(first_paging_index: int, n_groups: int) -> int:
    if n_groups < 1:
        raise ValueError("number of groups must be >= 1")
    return first_paging_index % n_groups


# float constants: e_up, e_low, e_max, p_rx, p_tx, p_sl, p_wur, dt, tol
# int constants: dcm, lp_wur, t_on_timer, t_on_dcm, lead, log
@numba.njit(cache=True)
def _kernel(start, stop, fc, ic, state, e, p_eh, on_rem, on_since, wake, synced, wur,
            tx_start, tx_end, outages, group, next_group_paging,
            ev_slot, ev_dev, ev_kind, ev_a, ev_b, ev_val, cursor):
    e_up, e_low, e_max = fc[0], fc[1], fc[2]
    p_rx, p_tx, p_sl, p_wur = fc[3], fc[4], fc[5], fc[6]
    dt, tol = fc[7], fc[8]
    dcm, lp_wur, t_on_timer, t_on_dcm, lead, log = ic[0], ic[1], ic[2], ic[3], ic[4], ic[5]
    n = state.size
    cap = ev_slot.size
    for s in range(start, stop):
        if log and cursor + 2 * n > cap:
            return s, cursor
        for i in range(n):
            st = state[i]
            old = st
            # start-of-slot transitions
            if st == 0:
                if e[i] >= e_up - tol:
                    st = 1
                    on_since[i] = s
                    on_rem[i] = t_on_timer if dcm else -1
                    wur[i] = False
            elif st == 2:
                if s >= wake[i]:
                    st = 1
                    on_since[i] = s
                    on_rem[i] = t_on_dcm
                    wur[i] = False
            elif st == 1 and on_rem[i] == 0:
                if synced[i]:
                    st = 2
                    p = next_group_paging[group[i]]
                    if p > s:
                        w = p - lead
                        wake[i] = w if w > s else s + 1
                    else:
                        wake[i] = NEVER
                else:
                    st = 0
                on_rem[i] = -1
            if st != old and log:
                ev_slot[cursor] = s
                ev_dev[cursor] = i
                ev_kind[cursor] = 5
                ev_a[cursor] = old
                ev_b[cursor] = st
                ev_val[cursor] = e[i]
                cursor += 1
            # per-state draw and harvest
            harvest = 0.0
            if st == 0:
                draw = 0.0
                harvest = p_eh[i]
            elif st == 2:
                draw = p_sl
                harvest = p_eh[i]
            elif st == 1:
                draw = p_wur if (lp_wur and not wur[i]) else p_rx
            else:
                draw = p_tx if (tx_start[i] <= s and s < tx_end[i]) else p_rx
            # brown-out: a slot that would end below the turn-off threshold is not run
            if st != 0 and e[i] + (harvest - draw) * dt < e_low - tol:
                if log:
                    ev_slot[cursor] = s
                    ev_dev[cursor] = i
                    ev_kind[cursor] = 5
                    ev_a[cursor] = st
                    ev_b[cursor] = 0
                    ev_val[cursor] = e[i]
                    cursor += 1
                st = 0
                draw = 0.0
                harvest = p_eh[i]
                synced[i] = False
                on_rem[i] = -1
                outages[i] += 1
            v = e[i] + (harvest - draw) * dt
            if v < 0.0:
                v = 0.0
            elif v > e_max:
                v = e_max
            e[i] = v
            if st == 1 and on_rem[i] > 0:
                on_rem[i] -= 1
            state[i] = st
    return stop, cursor


@dataclass
class Population:
    """Column-wise state of all devices in one run."""

    table: Table1
    mechanism: Mechanism
    lp_wur: bool
    n_groups: int
    p_in: np.ndarray
    p_eh: np.ndarray
    state: np.ndarray
    e: np.ndarray
    on_rem: np.ndarray
    on_since: np.ndarray
    wake: np.ndarray
    synced: np.ndarray
    group: np.ndarray
    wur: np.ndarray
    tx_start: np.ndarray
    tx_end: np.ndarray
    random_id: np.ndarray
    inventoried: np.ndarray
    attempts: np.ndarray
    outages: np.ndarray
    next_group_paging: np.ndarray
    lpwur_miss: float = 0.0

    @classmethod
    def create(cls, table: Table1, mechanism, p_in_dbm, *, lp_wur: bool = False, n_groups: int = 1,
               efficiency_mode=EfficiencyMode.PEAK, lpwur_miss: float = 0.0) -> "Population":
        p_in = np.asarray(p_in_dbm, dtype=float).copy()
        n = p_in.size
        return cls(
            table=table,
            mechanism=Mechanism.parse(mechanism),
            lp_wur=bool(lp_wur),
            n_groups=int(n_groups),
            p_in=p_in,
            p_eh=np.atleast_1d(harvest_power(p_in, efficiency_mode)).astype(float),
            state=np.zeros(n, np.int8),
            e=np.full(n, table.e_low_j),
            on_rem=np.full(n, -1, np.int64),
            on_since=np.zeros(n, np.int64),
            wake=np.full(n, NEVER, np.int64),
            synced=np.zeros(n, np.bool_),
            group=np.zeros(n, np.int64),
            wur=np.zeros(n, np.bool_),
            tx_start=np.full(n, -1, np.int64),
            tx_end=np.full(n, -1, np.int64),
            random_id=np.full(n, -1, np.int64),
            inventoried=np.zeros(n, np.bool_),
            attempts=np.zeros(n, np.int64),
            outages=np.zeros(n, np.int64),
            next_group_paging=np.full(max(1, int(n_groups)), -1, np.int64),
            lpwur_miss=float(lpwur_miss),
        )

    @property
    def n(self) -> int:
        return self.p_in.size

    @property
    def dcm(self) -> bool:
        return self.mechanism is Mechanism.DCM

    @property
    def wake_lead(self) -> int:
        """Slots a synchronized device wakes ahead of its paging.

        The on window opens with the paging itself, so a device that declines
        to respond can go back to sleep as soon as the paging ends.
        """
        return 0

    def float_consts(self) -> np.ndarray:
        t = self.table
        pw = t.power()
        return np.array([t.e_up_j, t.e_low_j, t.e_max_j, pw.p_rx, pw.p_tx, pw.p_sl, pw.p_lpwur,
                         t.slot_s, 1e-12 * t.e_max_j])

    def int_consts(self, log: bool) -> np.ndarray:
        t = self.table
        return np.array([int(self.dcm), int(self.lp_wur), t.t_on_timer_slots, t.t_on_dcm_slots,
                         self.wake_lead, int(log)], dtype=np.int64)

    def init_state(self, u_energy: np.ndarray, u_phase: np.ndarray, start_slot: int = 0):
        """Initial condition: uniform energy between the thresholds, random monitoring phase.

        A DCM device drawn inside its on timer instead holds the energy left
        after the slots it has already monitored.

        ``u_energy`` and ``u_phase`` are U(0, 1) draws, one per device, so both
        mechanisms can share them. A device starts switched on with the
        probability of being on in its mechanism's charge/monitor cycle.
        """
        t = self.table
        self.e[:] = t.e_low_j + np.asarray(u_energy) * (t.e_up_j - t.e_low_j)
        pw = t.power()
        p_mon = pw.p_lpwur if self.lp_wur else pw.p_rx
        if self.dcm:
            on_slots = float(t.t_on_timer_slots)
            on_energy = on_slots * p_mon * t.slot_s
        else:
            on_energy = t.e_up_j - t.e_low_j
            on_slots = on_energy / (p_mon * t.slot_s)
        with np.errstate(divide="ignore"):
            off_slots = np.where(self.p_eh > 0, on_energy / (self.p_eh * t.slot_s), np.inf)
        duty = on_slots / (on_slots + off_slots)
        u = np.asarray(u_phase)
        on = u < duty
        self.state[:] = np.where(on, DeviceState.ON_MONITORING, DeviceState.OFF)
        self.on_since[:] = start_slot
        self.on_rem[:] = -1
        if self.dcm:
            # position within the on timer, from the same draw
            frac = np.where(on, u / np.where(duty > 0, duty, 1.0), 0.0)
            rem = np.ceil((1.0 - frac) * t.t_on_timer_slots).astype(np.int64)
            self.on_rem[:] = np.where(on, np.clip(rem, 1, t.t_on_timer_slots), -1)
            # the window opened at E_up, so the store reflects the slots already spent
            elapsed = t.t_on_timer_slots - self.on_rem
            e_on = t.e_up_j - elapsed * (p_mon - self.p_eh) * t.slot_s
            self.e[:] = np.where(on, np.clip(e_on, t.e_low_j, t.e_max_j), self.e)

    def view(self, i: int) -> dict:
        return {
            "device_id": i,
            "state": DeviceState(int(self.state[i])),
            "e_es": float(self.e[i]),
            "p_in": float(self.p_in[i]),
            "synchronized": bool(self.synced[i]),
            "group_index": int(self.group[i]),
            "inventoried": bool(self.inventoried[i]),
            "random_id": int(self.random_id[i]),
            "on_timer_remaining": int(self.on_rem[i]),
        }

    def monitoring_draw(self, i: int) -> float:
        """Draw (W) of device ``i`` while monitoring for paging."""
        pw = self.table.power()
        if self.lp_wur and not self.wur[i]:
            return pw.p_lpwur
        return pw.p_rx

    def wake_slot_for(self, g: int, slot: int) -> int:
        p = int(self.next_group_paging[g])
        if p > slot:
            return max(p - self.wake_lead, slot + 1)
        return NEVER


def advance(pop: Population, start: int, stop: int, log: EventLog | None = None) -> None:
    """Run slots ``[start, stop)``: start-of-slot transitions, draw, brown-out, integration, timers."""
    if stop <= start:
        return
    logging = log is not None and log.enabled
    if logging:
        log.ensure(2 * pop.n + 1)
        buf = log
    else:
        buf = _NULL_BUF
    fc = pop.float_consts()
    ic = pop.int_consts(logging)
    s = start
    while s < stop:
        s, cursor = _kernel(s, stop, fc, ic, pop.state, pop.e, pop.p_eh, pop.on_rem, pop.on_since, pop.wake,
                            pop.synced, pop.wur, pop.tx_start, pop.tx_end, pop.outages, pop.group,
                            pop.next_group_paging, buf.slot, buf.device, buf.kind, buf.a, buf.b, buf.value,
                            buf.n if logging else 0)
        if logging:
            log.n = cursor
            if s < stop:
                log.ensure(max(log.capacity, 4 * pop.n))


class _NullBuf:
    def __init__(self):
        self.slot = np.zeros(1, np.int64)
        self.device = np.zeros(1, np.int32)
        self.kind = np.zeros(1, np.int8)
        self.a = np.zeros(1, np.int32)
        self.b = np.zeros(1, np.int32)
        self.value = np.zeros(1, np.float64)


_NULL_BUF = _NullBuf()


def em_step(pop: Population, slot: int, log: EventLog | None = None) -> None:
    """One slot of energy-threshold monitoring for every device."""
    if pop.mechanism is not Mechanism.EM:
        raise ValueError("population is not using EM")
    advance(pop, slot, slot + 1, log)


def dcm_step(pop: Population, slot: int, log: EventLog | None = None) -> None:
    """One slot of duty-cycled monitoring for every device."""
    if pop.mechanism is not Mechanism.DCM:
        raise ValueError("population is not using DCM")
    advance(pop, slot, slot + 1, log)


def _set_state(pop: Population, idx: np.ndarray, new: DeviceState, slot: int, log: EventLog | None):
    if idx.size == 0:
        return
    if log is not None:
        changed = idx[pop.state[idx] != new]
        log.extend(slot, changed, EventKind.STATE_CHANGE, pop.state[changed], int(new), pop.e[changed])
    pop.state[idx] = new


def return_to_idle(pop: Population, idx: np.ndarray, slot: int, log: EventLog | None = None) -> None:
    """After a round (or a declined paging): DCM devices sleep, EM devices keep monitoring.

    Takes effect from ``slot + 1``. Devices that are off are left alone.
    """
    idx = np.asarray(idx, dtype=np.int64)
    idx = idx[pop.state[idx] != DeviceState.OFF]
    if idx.size == 0:
        return
    pop.tx_start[idx] = -1
    pop.tx_end[idx] = -1
    pop.wur[idx] = False
    if pop.dcm:
        synced = idx[pop.synced[idx]]
        for i in synced:
            pop.wake[i] = pop.wake_slot_for(int(pop.group[i]), slot)
        pop.on_rem[synced] = -1
        _set_state(pop, synced, DeviceState.SLEEP, slot, log)
        # unsynchronized devices cannot get here through a paging; keep them monitoring
        rest = idx[~pop.synced[idx]]
        pop.on_since[rest] = slot + 1
        _set_state(pop, rest, DeviceState.ON_MONITORING, slot, log)
    else:
        pop.on_since[idx] = slot + 1
        _set_state(pop, idx, DeviceState.ON_MONITORING, slot, log)


def paging_receivers(pop: Population, paging: PagingMsg) -> np.ndarray:
    """Devices that monitored the whole paging and belong to its group.

    Call after the last paging slot has been advanced.
    """
    ok = (pop.state == DeviceState.ON_MONITORING) & (pop.on_since <= paging.slot)
    if pop.dcm and pop.n_groups > 1:
        ok &= ~pop.synced | (pop.group == paging.round_index % pop.n_groups)
    return np.nonzero(ok)[0]


def respond_to_paging(pop: Population, idx: np.ndarray, paging: PagingMsg, msg1_start: int,
                      rng: np.random.Generator, slot: int, log: EventLog | None = None) -> list[Msg1]:
    """Apply a received paging to devices ``idx``; returns their Msg1 transmissions.

    Unsynchronized DCM devices synchronize and join the paging's group. Each
    non-inventoried receiver transmits with the paging's access probability on
    a uniformly drawn AO with a fresh 16-bit random ID.
    """
    idx = np.asarray(idx, dtype=np.int64)
    k = idx.size
    u = rng.random(k)
    ao = rng.integers(0, paging.n_aos, k)
    rid = rng.integers(0, 1 << RANDOM_ID_BITS, k)
    if k == 0:
        return []
    if pop.dcm:
        new = idx[~pop.synced[idx]]
        if new.size:
            pop.synced[new] = True
            pop.group[new] = assign_group(paging.round_index, pop.n_groups)
            if log is not None:
                log.extend(slot, new, EventKind.SYNC, pop.group[new], paging.round_index, pop.e[new])
    tx = (u < paging.access_probability) & ~pop.inventoried[idx]
    sender = idx[tx]
    t_occ = ao[tx] // paging.ao_freq
    f_occ = ao[tx] % paging.ao_freq
    m1 = pop.table.msg1_slots
    pop.random_id[sender] = rid[tx]
    pop.tx_start[sender] = msg1_start + t_occ * m1
    pop.tx_end[sender] = pop.tx_start[sender] + m1
    pop.wur[sender] = True
    pop.attempts[sender] += 1
    _set_state(pop, sender, DeviceState.EX_MSG1, slot, log)
    return_to_idle(pop, idx[~tx], slot, log)
    return [Msg1(int(d), int(t), int(f), int(r), int(s))
            for d, t, f, r, s in zip(sender, t_occ, f_occ, rid[tx], pop.tx_start[sender])]


def on_paging(pop: Population, i: int, paging: PagingMsg, rng: np.random.Generator,
              msg1_start: int | None = None) -> Msg1 | None:
    """Single-device form of :func:`respond_to_paging`."""
    if pop.inventoried[i]:
        raise ValueError(f"device {i} is already inventoried")
    if pop.state[i] != DeviceState.ON_MONITORING:
        raise ValueError(f"device {i} is not monitoring")
    start = paging.slot + paging.duration if msg1_start is None else msg1_start
    sent = respond_to_paging(pop, np.array([i]), paging, start, rng, paging.slot + paging.duration - 1)
    return sent[0] if sent else None


def on_msg2(pop: Population, i: int, msg2: Msg2, slot: int | None = None,
            log: EventLog | None = None) -> Msg3 | None:
    """A device awaiting Msg2 that hears its own random ID takes the Msg3 grant."""
    if pop.state[i] != DeviceState.EX_MSG2 or pop.random_id[i] != msg2.random_id:
        return None
    pop.tx_start[i] = msg2.msg3_start
    pop.tx_end[i] = msg2.msg3_end
    _set_state(pop, np.array([i]), DeviceState.EX_MSG3, msg2.slot if slot is None else slot, log)
    return Msg3(i, msg2.msg3_start, msg2.msg3_freq)
