"""Reader side of the contention-based random access (CBRA) procedure.

A round is: paging, ``ao_time`` Msg1 slots with ``ao_freq`` parallel access
occasions (AOs) each, then one serial Msg2 per successful AO and a Msg3
grant on that AO's frequency channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .params import Table1

Q0 = 1.0
Q_MIN = 1.0 / 64.0


@dataclass(frozen=True)
class PagingMsg:
    round_index: int
    slot: int
    access_probability: float
    ao_time: int
    ao_freq: int
    group_modulus: int = 1
    duration: int = 2

    def __post_init__(self):
        if not 0.0 <= self.access_probability <= 1.0:
            raise ValueError("access probability must be in [0, 1]")
        if self.ao_time < 1 or self.ao_freq < 1:
            raise ValueError("AO counts must be >= 1")

    @property
    def n_aos(self) -> int:
        return self.ao_time * self.ao_freq

    @property
    def group(self) -> int:
        return self.round_index % self.group_modulus


@dataclass(frozen=True)
class Msg1:
    device_id: int
    ao_time: int
    ao_freq: int
    random_id: int
    slot: int = -1


@dataclass(frozen=True)
class Msg2:
    random_id: int
    slot: int
    msg3_start: int
    msg3_end: int
    msg3_freq: int


@dataclass(frozen=True)
class Msg3:
    device_id: int
    slot: int
    freq: int


class Outcome(Enum):
    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass(frozen=True)
class AOOutcome:
    kind: Outcome
    random_id: int | None = None
    device_id: int | None = None

    @classmethod
    def idle(cls):
        return cls(Outcome.IDLE)

    @classmethod
    def collision(cls):
        return cls(Outcome.COLLISION)


@dataclass(frozen=True)
class Grant:
    ao: tuple[int, int]
    random_id: int
    msg2_slot: int
    msg3_start: int
    msg3_end: int
    freq: int

    def msg2(self) -> Msg2:
        return Msg2(self.random_id, self.msg2_slot, self.msg3_start, self.msg3_end, self.freq)


@dataclass
class RoundSchedule:
    round_index: int
    paging_start: int
    paging_slots: int
    ao_time: int
    ao_freq: int
    msg1_slots: int
    msg2_slots: int
    msg3_slots: int
    grants: list[Grant] = field(default_factory=list)
    scheduled: bool = False

    @property
    def paging_slots_range(self) -> range:
        return range(self.paging_start, self.paging_start + self.paging_slots)

    @property
    def msg1_start(self) -> int:
        return self.paging_start + self.paging_slots

    def ao_slot(self, t: int) -> int:
        return self.msg1_start + t * self.msg1_slots

    @property
    def msg1_grid(self) -> dict[tuple[int, int], tuple[int, int]]:
        """(time occasion, frequency) -> (absolute slot, frequency channel)."""
        return {(t, f): (self.ao_slot(t), f) for t in range(self.ao_time) for f in range(self.ao_freq)}

    @property
    def msg2_start(self) -> int:
        return self.msg1_start + self.ao_time * self.msg1_slots

    @property
    def msg2_end(self) -> int:
        """First slot after the Msg2 train (exclusive)."""
        return self.msg2_start + len(self.grants) * self.msg2_slots

    @property
    def round_end(self) -> int:
        """First slot after the last reader-scheduled transmission of the round."""
        if not self.scheduled:
            raise RuntimeError("Msg1 outcomes not yet scheduled")
        end = self.msg2_end
        for g in self.grants:
            end = max(end, g.msg3_end)
        return end

    def schedule_grants(self, outcomes: Mapping[tuple[int, int], AOOutcome]) -> list[Grant]:
        """Serve successful AOs in (time, frequency) order: one Msg2 each, then a Msg3 grant.

        A Msg3 grant sits on the AO's frequency channel, starts no earlier than
        the slot after its Msg2, and never overlaps an earlier grant on that channel.
        """
        successes = sorted(ao for ao, o in outcomes.items() if o.kind is Outcome.SUCCESS)
        free = [self.msg2_start] * self.ao_freq
        grants = []
        for i, (t, f) in enumerate(successes):
            m2 = self.msg2_start + i * self.msg2_slots
            start = max(m2 + self.msg2_slots, free[f])
            end = start + self.msg3_slots
            free[f] = end
            grants.append(Grant((t, f), outcomes[(t, f)].random_id, m2, start, end, f))
        self.grants = grants
        self.scheduled = True
        return grants


def build_round(round_index: int, start_slot: int, table: Table1, access_probability: float = 1.0,
                group_modulus: int = 1) -> tuple[PagingMsg, RoundSchedule]:
    paging = PagingMsg(
        round_index=round_index,
        slot=start_slot,
        access_probability=access_probability,
        ao_time=table.ao_time,
        ao_freq=table.ao_freq,
        group_modulus=group_modulus,
        duration=table.paging_slots,
    )
    sched = RoundSchedule(
        round_index=round_index,
        paging_start=start_slot,
        paging_slots=table.paging_slots,
        ao_time=table.ao_time,
        ao_freq=table.ao_freq,
        msg1_slots=table.msg1_slots,
        msg2_slots=table.msg2_slots,
        msg3_slots=table.msg3_slots,
    )
    return paging, sched


def next_paging_slot(round_end: int, origin: int, t_pg: int) -> int:
    """Smallest paging-grid slot (``origin + k * t_pg``) at or after ``round_end``."""
    k = -(-(round_end - origin) // t_pg)
    return origin + k * t_pg


def detect_msg1(deliveries: Mapping[tuple[int, int], Sequence[Msg1]]) -> dict[tuple[int, int], AOOutcome]:
    """Classify each AO: no Msg1 is idle, one is a success, two or more collide.

    There is no capture: a collision loses every Msg1 on the AO, even with
    identical random IDs.
    """
    out = {}
    for ao, msgs in deliveries.items():
        if len(msgs) == 0:
            out[ao] = AOOutcome.idle()
        elif len(msgs) == 1:
            out[ao] = AOOutcome(Outcome.SUCCESS, msgs[0].random_id, msgs[0].device_id)
        else:
            out[ao] = AOOutcome.collision()
    return out


def count_outcomes(outcomes: Iterable[AOOutcome]) -> tuple[int, int, int]:
    """(idle, success, collision) counts."""
    idle = succ = coll = 0
    for o in outcomes:
        if o.kind is Outcome.IDLE:
            idle += 1
        elif o.kind is Outcome.SUCCESS:
            succ += 1
        else:
            coll += 1
    return idle, succ, coll


def update_access_probability(n_collided: int, n_success: int, last_q: float, n_aos: int,
                              q_min: float = Q_MIN) -> float:
    """Next access probability from the last round's AO occupancy.

    Each collided AO is taken to hide two devices; dividing by the last access
    probability accounts for the devices that stayed silent.
    """
    if last_q <= 0:
        raise ValueError("last access probability must be positive")
    backlog = max(1, round((2 * n_collided + n_success) / last_q))
    return min(1.0, max(q_min, n_aos / backlog))


@dataclass
class RoundCounters:
    round_index: int
    slot: int
    q: float
    idle: int
    success: int
    collision: int


@dataclass
class InventoryLedger:
    """Reader ground truth plus the access-probability state.

    Under grouping each group is paged by its own rounds, so the controller
    keeps one estimate per group and updates it from that group's last round.
    ``q`` is the initial probability for groups not yet paged.
    """

    inventoried_ids: set[int] = field(default_factory=set)
    rounds: list[RoundCounters] = field(default_factory=list)
    q: float = Q0
    q_min: float = Q_MIN
    q_by_group: dict[int, float] = field(default_factory=dict)

    def q_for(self, group: int = 0) -> float:
        return self.q_by_group.get(group, self.q)

    def record_round(self, counters: RoundCounters, n_aos: int, adapt: bool = True, group: int = 0) -> float:
        self.rounds.append(counters)
        if adapt:
            self.q_by_group[group] = update_access_probability(
                counters.collision, counters.success, counters.q, n_aos, self.q_min)
        return self.q_for(group)


def process_msg3(ledger: InventoryLedger, delivered: Iterable[Msg3]) -> list[int]:
    """Add delivered device IDs; returns the IDs that were new."""
    new = []
    for m in delivered:
        if m.device_id not in ledger.inventoried_ids:
            ledger.inventoried_ids.add(m.device_id)
            new.append(m.device_id)
    return new


def success_probability(n: int, n_aos: int, q: float) -> float:
    """Per-device single-round success probability for ``n`` contenders."""
    return q * (1.0 - q / n_aos) ** (n - 1)


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(p * (1.0 - p) / trials)
