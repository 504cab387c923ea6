"""Slot-clock engine: charging stage, then paging rounds until everyone is inventoried.

Within a slot the order is fixed: reader transmissions scheduled for the
slot are emitted, every device's energy and timers are advanced, then
deliveries and protocol reactions for that slot are applied. Slots without
reader activity are advanced in bulk, which is equivalent to stepping them
one at a time.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import device as dev
from .channel import LayoutConfig, MessageErrorConfig, deliver, deliver_many, place_devices
from .device import DeviceState, Mechanism, Population
from .energy import EfficiencyMode
from .metrics import QUANTILES, EventKind, EventLog, completion_quantile, quantile_key
from .params import DEVICE1, Table1
from .reader import (
    Q0,
    Q_MIN,
    InventoryLedger,
    Msg1,
    Msg3,
    Outcome,
    RoundCounters,
    build_round,
    count_outcomes,
    detect_msg1,
    next_paging_slot,
    process_msg3,
)


class InvalidScenario(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.violations))


@dataclass
class SlotClock:
    slot_index: int = 0
    slot_duration: float = 0.5e-3

    def __post_init__(self):
        if self.slot_duration <= 0:
            raise ValueError("slot duration must be positive")

    def advance(self, k: int = 1):
        if k < 0:
            raise ValueError("the clock only moves forward")
        self.slot_index += k

    @property
    def time(self) -> float:
        return self.slot_index * self.slot_duration


@dataclass(frozen=True)
class Scenario:
    table: Table1 = DEVICE1
    mechanism: Mechanism = Mechanism.DCM
    n_groups: int = 1
    lp_wur: bool = False
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    errors: MessageErrorConfig = field(default_factory=MessageErrorConfig)
    efficiency_mode: EfficiencyMode = EfficiencyMode.PEAK
    warmup_s: float = 30.0
    max_sim_s: float = 60.0
    seed: int = 1
    access_control: bool = True
    q0: float = Q0
    q_min: float = Q_MIN
    completion_quantile: float = 0.99
    lpwur_miss: float = 0.0
    pin_samples: tuple[float, ...] | None = None
    log_events: bool = True
    log_warmup: bool = False
    name: str = "custom"

    @property
    def n_devices(self) -> int:
        return self.table.n_devices

    @property
    def slot_s(self) -> float:
        return self.table.slot_s

    def violations(self) -> list[str]:
        out = list(self.table.violations())
        try:
            Mechanism.parse(self.mechanism)
        except ValueError as exc:
            out.append(f"mechanism: {exc}")
        if self.n_groups < 1:
            out.append(f"ng: must be >= 1 (got {self.n_groups})")
        if self.warmup_s < 0:
            out.append("warmup_s: must be >= 0")
        if self.max_sim_s <= 0:
            out.append("max_sim_s: must be positive")
        if not 0 < self.q0 <= 1:
            out.append("q0: must be in (0, 1]")
        if not 0 < self.q_min <= 1:
            out.append("q_min: must be in (0, 1]")
        if not 0 < self.completion_quantile <= 1:
            out.append("completion_quantile: must be in (0, 1]")
        if not 0 <= self.lpwur_miss <= 1:
            out.append("lpwur_miss: must be in [0, 1]")
        if self.pin_samples is not None and len(self.pin_samples) == 0:
            out.append("pin_samples: empty list")
        t = self.table
        min_pg = t.paging_slots + t.ao_time * t.msg1_slots + 1
        if t.t_pg_slots < min_pg:
            out.append(f"t_pg_slots: must leave room for paging and Msg1 (>= {min_pg})")
        return out

    def validate(self) -> "Scenario":
        v = self.violations()
        if v:
            raise InvalidScenario(v)
        return self

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)


@dataclass
class SimResult:
    scenario: Scenario
    times: np.ndarray
    fractions: np.ndarray
    quantiles: dict[str, float | None]
    t_inv: float | None
    events: EventLog
    p_in_samples: np.ndarray
    positions: np.ndarray | None
    delivery_slots: np.ndarray
    attempts: np.ndarray
    outages: np.ndarray
    rounds: int
    origin_slot: int
    final_slot: int
    q_history: np.ndarray

    @property
    def n_inventoried(self) -> int:
        return int((self.delivery_slots >= 0).sum())

    def summary_dict(self) -> dict:
        s = self.scenario
        d = {
            "scenario": s.name,
            "mechanism": Mechanism.parse(s.mechanism).value,
            "seed": s.seed,
            "n_devices": s.n_devices,
            "ng": s.n_groups,
            "lp_wur": s.lp_wur,
        }
        d.update(self.quantiles)
        d.update(
            rounds=self.rounds,
            mean_attempts=float(self.attempts.mean()) if self.attempts.size else 0.0,
            outages=int(self.outages.sum()),
            inventoried=self.n_inventoried,
            t_inv_s=self.t_inv,
            sim_time_s=(self.final_slot - self.origin_slot) * s.slot_s,
        )
        return d


Action = Callable[["World", int], None]


@dataclass
class World:
    scenario: Scenario
    pop: Population
    rng: np.random.Generator
    log: EventLog
    clock: SlotClock
    origin: int
    end_slot: int
    ledger: InventoryLedger
    pre: dict[int, list[Action]] = field(default_factory=lambda: defaultdict(list))
    post: dict[int, list[Action]] = field(default_factory=lambda: defaultdict(list))
    round_index: int = 0
    next_paging: int = -1
    series_t: list[float] = field(default_factory=list)
    series_f: list[float] = field(default_factory=list)
    delivery_slots: np.ndarray | None = None
    done: bool = False
    # per-round scratch
    paging: object = None
    schedule: object = None
    msg1s: list[Msg1] = field(default_factory=list)
    msg1_sent: list[Msg1] = field(default_factory=list)
    holders: dict[int, list[int]] = field(default_factory=dict)
    pending_grants: int = 0
    positions: np.ndarray | None = None
    final_slot: int = -1

    def at(self, slot: int, action: Action, phase: str = "post"):
        (self.pre if phase == "pre" else self.post)[slot].append(action)

    @property
    def n_inventoried(self) -> int:
        return len(self.ledger.inventoried_ids)

    def _log(self):
        return self.log if self.log.enabled else None


def step_slot(world: World) -> World:
    """Advance exactly one slot: reader emissions, device energy/timers, then deliveries."""
    s = world.clock.slot_index
    for action in world.pre.pop(s, ()):
        action(world, s)
    dev.advance(world.pop, s, s + 1, world._log())
    for action in world.post.pop(s, ()):
        action(world, s)
    world.clock.advance(1)
    return world


def run_until(world: World, stop: int) -> World:
    while world.clock.slot_index < stop and not world.done:
        s = world.clock.slot_index
        pending = [k for k in (*world.pre.keys(), *world.post.keys())]
        nxt = min(pending) if pending else stop
        if nxt > s:
            target = min(nxt, stop)
            dev.advance(world.pop, s, target, world._log())
            world.clock.advance(target - s)
        else:
            step_slot(world)
    return world


# reader/protocol actions --------------------------------------------------------------


def _start_round(world: World, slot: int):
    sc = world.scenario
    t = sc.table
    q = world.ledger.q_for(world.round_index % sc.n_groups)
    paging, sched = build_round(world.round_index, slot, t, q, sc.n_groups)
    world.paging, world.schedule = paging, sched
    world.msg1s = []
    world.msg1_sent = []
    world.holders = {}
    world.log.append(slot, -1, EventKind.PAGING_SENT, paging.round_index, paging.group, paging.access_probability)
    world.at(slot + t.paging_slots - 1, _paging_received)


def _paging_received(world: World, slot: int):
    sc, pop = world.scenario, world.pop
    paging, sched = world.paging, world.schedule
    idx = dev.paging_receivers(pop, paging)
    loss = 1.0 - (1.0 - sc.errors.paging) * (1.0 - (pop.lpwur_miss if pop.lp_wur else 0.0))
    idx = idx[deliver_many(loss, np.ones(idx.size, bool), world.rng)]
    msgs = dev.respond_to_paging(pop, idx, paging, sched.msg1_start, world.rng, slot, world._log())
    world.msg1s = msgs
    m1 = sc.table.msg1_slots
    for tt in range(sched.ao_time):
        world.at(sched.ao_slot(tt) + m1 - 1, _msg1_slot_end)


def _msg1_slot_end(world: World, slot: int):
    pop, sched = world.pop, world.schedule
    m1 = world.scenario.table.msg1_slots
    start = slot - m1 + 1
    log = world._log()
    sent = [m for m in world.msg1s if m.slot == start and pop.state[m.device_id] == DeviceState.EX_MSG1]
    if sent:
        ids = np.array([m.device_id for m in sent], dtype=np.int64)
        if log is not None:
            log.extend(slot, ids, EventKind.MSG1_TX,
                       np.array([m.ao_time * sched.ao_freq + m.ao_freq for m in sent]),
                       np.array([m.random_id for m in sent]), pop.e[ids])
        pop.tx_start[ids] = -1
        pop.tx_end[ids] = -1
        dev._set_state(pop, ids, DeviceState.EX_MSG2, slot, log)
    world.msg1_sent.extend(sent)
    if start == sched.ao_slot(sched.ao_time - 1):
        _resolve_msg1(world, slot)


def _resolve_msg1(world: World, slot: int):
    sc, pop, sched = world.scenario, world.pop, world.schedule
    t = sc.table
    per_ao: dict[tuple[int, int], list[Msg1]] = {ao: [] for ao in sched.msg1_grid}
    for m in world.msg1_sent:
        per_ao[(m.ao_time, m.ao_freq)].append(m)
    outcomes = detect_msg1(per_ao)
    for ao, o in outcomes.items():
        if o.kind is Outcome.COLLISION:
            world.log.append(slot, -1, EventKind.MSG1_COLLISION, ao[0] * t.ao_freq + ao[1], len(per_ao[ao]))
        elif o.kind is Outcome.SUCCESS and not deliver(sc.errors.msg1, True, world.rng):
            outcomes[ao] = type(o).idle()
    idle, succ, coll = count_outcomes(outcomes.values())
    grants = sched.schedule_grants(outcomes)
    world.ledger.record_round(
        RoundCounters(world.round_index, sched.paging_start, world.paging.access_probability, idle, succ, coll),
        t.n_aos, adapt=sc.access_control, group=world.paging.group,
    )
    for i, g in enumerate(grants):
        world.at(g.msg2_slot, _make_msg2_emit(i), "pre")
        world.at(g.msg2_slot + t.msg2_slots - 1, _make_msg2_deliver(i))
        world.at(g.msg3_end - 1, _make_msg3_end(i))
    world.at(sched.msg2_end, _msg2_window_closed)
    world.pending_grants = len(grants)

    # the next paging is known once the grants are laid out
    nxt = next_paging_slot(sched.round_end, world.origin, t.t_pg_slots)
    world.next_paging = nxt
    world.round_index += 1
    if pop.dcm:
        g = world.round_index % pop.n_groups
        pop.next_group_paging[g] = nxt
        asleep = np.nonzero((pop.state == DeviceState.SLEEP) & pop.synced & (pop.group == g) & (pop.wake == dev.NEVER))[0]
        pop.wake[asleep] = max(nxt - pop.wake_lead, slot + 1)
    if not grants:
        _end_round(world, slot)


def _make_msg2_emit(i: int) -> Action:
    def emit(world: World, slot: int):
        g = world.schedule.grants[i]
        world.log.append(slot, -1, EventKind.MSG2_SENT, g.ao[0] * world.schedule.ao_freq + g.ao[1],
                         g.random_id, g.msg3_start)
    return emit


def _make_msg2_deliver(i: int) -> Action:
    def deliver_msg2(world: World, slot: int):
        pop = world.pop
        g = world.schedule.grants[i]
        waiting = np.nonzero((pop.state == DeviceState.EX_MSG2) & (pop.random_id == g.random_id))[0]
        got = waiting[deliver_many(world.scenario.errors.msg2, np.ones(waiting.size, bool), world.rng)]
        holders = []
        for d in got:
            if dev.on_msg2(pop, int(d), g.msg2(), slot, world._log()) is not None:
                holders.append(int(d))
        world.holders[i] = holders
    return deliver_msg2


def _msg2_window_closed(world: World, slot: int):
    # devices still waiting heard an empty slot after the Msg2 train: CBRA failed
    pop = world.pop
    failed = np.nonzero(pop.state == DeviceState.EX_MSG2)[0]
    dev.return_to_idle(pop, failed, slot, world._log())


def _make_msg3_end(i: int) -> Action:
    def msg3_end(world: World, slot: int):
        sc, pop = world.scenario, world.pop
        g = world.schedule.grants[i]
        holders = world.holders.get(i, [])
        sent = [d for d in holders
                if pop.state[d] == DeviceState.EX_MSG3 and pop.tx_start[d] == g.msg3_start
                and pop.tx_end[d] == g.msg3_end]
        if len(sent) == 1 and deliver(sc.errors.msg3, True, world.rng):
            d = sent[0]
            new = process_msg3(world.ledger, [Msg3(d, g.msg3_start, g.freq)])
            if new:
                pop.inventoried[d] = True
                world.delivery_slots[d] = slot + 1
                world.log.append(slot, d, EventKind.MSG3_DELIVERED, g.freq, 0, float(pop.e[d]))
        dev.return_to_idle(pop, np.array(sent, dtype=np.int64), slot, world._log())
        world.pending_grants -= 1
        if world.pending_grants == 0:
            _end_round(world, slot)
    return msg3_end


def _end_round(world: World, slot: int):
    sc = world.scenario
    end = max(world.schedule.round_end, slot + 1)
    world.series_t.append((end - world.origin) * sc.slot_s)
    world.series_f.append(world.n_inventoried / sc.n_devices)
    if world.n_inventoried >= sc.n_devices:
        world.done = True
        world.final_slot = end
        return
    if world.next_paging < world.end_slot:
        world.at(world.next_paging, _start_round, "pre")


# setup and top-level run ---------------------------------------------------------------


def _population(scenario: Scenario) -> tuple[Population, np.ndarray | None]:
    ss = np.random.SeedSequence(scenario.seed)
    s_place, s_init, _ = ss.spawn(3)
    n = scenario.n_devices
    rng_place = np.random.default_rng(s_place)
    if scenario.pin_samples is not None:
        samples = np.asarray(scenario.pin_samples, dtype=float)
        p_in = samples.copy() if samples.size == n else rng_place.choice(samples, size=n, replace=True)
        positions = None
    else:
        positions, p_in = place_devices(n, scenario.layout, rng_place)
    pop = Population.create(
        scenario.table, scenario.mechanism, p_in,
        lp_wur=scenario.lp_wur,
        n_groups=scenario.n_groups if Mechanism.parse(scenario.mechanism) is Mechanism.DCM else 1,
        efficiency_mode=scenario.efficiency_mode,
        lpwur_miss=scenario.lpwur_miss,
    )
    u = np.random.default_rng(s_init).random((2, n))
    pop.init_state(u[0], u[1])
    return pop, positions


def init_world(scenario: Scenario) -> World:
    """Validated world at the start of the charging stage."""
    scenario.validate()
    pop, positions = _population(scenario)
    dt = scenario.slot_s
    warm = int(round(scenario.warmup_s / dt))
    world = World(
        scenario=scenario,
        pop=pop,
        rng=np.random.default_rng(np.random.SeedSequence(scenario.seed).spawn(3)[2]),
        log=EventLog(enabled=scenario.log_events),
        clock=SlotClock(0, dt),
        origin=warm,
        end_slot=warm + int(round(scenario.max_sim_s / dt)),
        ledger=InventoryLedger(q=scenario.q0, q_min=scenario.q_min),
        delivery_slots=np.full(pop.n, -1, np.int64),
    )
    world.positions = positions
    world.final_slot = world.end_slot
    return world


def start_inventory(world: World) -> World:
    """Run the charging stage and schedule the first paging at the origin."""
    scenario, pop, log = world.scenario, world.pop, world.log
    if scenario.log_warmup:
        run_until(world, world.origin)
    else:
        dev.advance(pop, 0, world.origin, None)
        world.clock.advance(world.origin)
    if log.enabled:
        ids = np.arange(pop.n)
        log.extend(world.origin, ids, EventKind.ENERGY_SAMPLE, pop.state.astype(np.int32), pop.synced.astype(np.int32), pop.e)
    world.series_t.append(0.0)
    world.series_f.append(0.0)
    world.next_paging = world.origin
    world.at(world.origin, _start_round, "pre")
    return world


def run(scenario: Scenario) -> SimResult:
    """Charging stage without paging, then periodic paging rounds."""
    world = start_inventory(init_world(scenario))
    run_until(world, world.end_slot)
    final = world.final_slot if world.done else world.end_slot
    # close the curve at the horizon; a run with no completed round keeps only its first row
    if not world.done and world.ledger.rounds:
        t_end = (final - world.origin) * scenario.slot_s
        if world.series_t[-1] < t_end:
            world.series_t.append(t_end)
            world.series_f.append(world.n_inventoried / scenario.n_devices)
    return _result(world, final, positions=world.positions)


def delivery_series(delivery_slots: np.ndarray, origin: int, n: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact step series of the inventoried fraction, one point per Msg3 delivery."""
    done = np.sort(delivery_slots[delivery_slots >= 0])
    times = np.concatenate([[0.0], (done - origin) * dt])
    fractions = np.arange(done.size + 1) / n
    return times, fractions


def _result(world: World, final: int, positions) -> SimResult:
    sc = world.scenario
    times, fractions = delivery_series(world.delivery_slots, world.origin, sc.n_devices, sc.slot_s)
    quantiles = {quantile_key(x): completion_quantile(times, fractions, x) for x in QUANTILES}
    t_inv = completion_quantile(times, fractions, sc.completion_quantile)
    return SimResult(
        scenario=sc,
        times=np.asarray(world.series_t),
        fractions=np.asarray(world.series_f),
        quantiles=quantiles,
        t_inv=t_inv,
        events=world.log,
        p_in_samples=world.pop.p_in.copy(),
        positions=positions,
        delivery_slots=world.delivery_slots,
        attempts=world.pop.attempts.copy(),
        outages=world.pop.outages.copy(),
        rounds=len(world.ledger.rounds),
        origin_slot=world.origin,
        final_slot=final,
        q_history=np.array([r.q for r in world.ledger.rounds]),
    )


def reduction(t_baseline: float | None, t_new: float | None) -> float | None:
    """Relative reduction of a completion time, ``None`` if either is absent."""
    if t_baseline is None or t_new is None or t_baseline <= 0:
        return None
    return 1.0 - t_new / t_baseline


def default_scenario(preset: str = "device1", **kw) -> Scenario:
    from .params import PRESETS
    table = PRESETS[preset]
    base = dict(table=table, name=preset)
    if preset == "device2":
        base.update(lp_wur=True, warmup_s=DEVICE2_WARMUP_S, max_sim_s=DEVICE2_MAX_SIM_S)
    base.update(kw)
    return Scenario(**base)


# long enough for a device at -36 dBm to charge 2500 nJ (about 199 s)
DEVICE2_WARMUP_S = 240.0
# the same recharge time puts the device-2 tail far beyond one minute
DEVICE2_MAX_SIM_S = 600.0
