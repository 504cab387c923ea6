from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aiot_inventory.params import DEVICE1
from aiot_inventory.reader import (
    AOOutcome,
    InventoryLedger,
    Msg1,
    Msg3,
    Outcome,
    PagingMsg,
    RoundCounters,
    binomial_sigma,
    build_round,
    count_outcomes,
    detect_msg1,
    next_paging_slot,
    process_msg3,
    success_probability,
    update_access_probability,
)
from oracles import enumerate_success, simulate_success


def _successes(sched, aos):
    out = {ao: AOOutcome.idle() for ao in sched.msg1_grid}
    for i, ao in enumerate(aos):
        out[ao] = AOOutcome(Outcome.SUCCESS, random_id=100 + i, device_id=i)
    return out


def test_round_layout_without_successes():
    _, sched = build_round(0, 0, DEVICE1)
    assert sched.msg1_start == 2
    assert [sched.ao_slot(t) for t in range(4)] == [2, 3, 4, 5]
    sched.schedule_grants(_successes(sched, []))
    assert sched.round_end == 6
    assert next_paging_slot(sched.round_end, 0, 24) == 24


def test_single_success_grant():
    _, sched = build_round(0, 0, DEVICE1)
    (g,) = sched.schedule_grants(_successes(sched, [(0, 0)]))
    assert g.msg2_slot == 6
    assert (g.msg3_start, g.msg3_end, g.freq) == (7, 13, 0)


def test_full_grid_overruns_and_defers():
    _, sched = build_round(0, 0, DEVICE1)
    grants = sched.schedule_grants(_successes(sched, list(sched.msg1_grid)))
    assert [g.msg2_slot for g in grants] == list(range(6, 14))
    # per-channel grants never overlap and follow their Msg2
    for f in (0, 1):
        gs = [g for g in grants if g.freq == f]
        for a, b in zip(gs, gs[1:]):
            assert b.msg3_start >= a.msg3_end
    for g in grants:
        assert g.msg3_start >= g.msg2_slot + 1
    assert sched.round_end == 32
    assert next_paging_slot(sched.round_end, 0, 24) == 48


def test_round_end_needs_schedule():
    _, sched = build_round(0, 0, DEVICE1)
    with pytest.raises(RuntimeError):
        sched.round_end


def test_paging_grid_is_anchored_at_origin():
    assert next_paging_slot(1000, 1000, 24) == 1000
    assert next_paging_slot(1001, 1000, 24) == 1024
    assert next_paging_slot(1024, 1000, 24) == 1024


def test_detect_msg1():
    a, b = Msg1(0, 0, 0, 0x1234), Msg1(1, 0, 0, 0x0042)
    out = detect_msg1({(0, 0): [], (0, 1): [a], (1, 0): [a, b]})
    assert out[(0, 0)].kind is Outcome.IDLE
    assert out[(0, 1)].kind is Outcome.SUCCESS and out[(0, 1)].random_id == 0x1234
    assert out[(1, 0)].kind is Outcome.COLLISION
    # same random ID still collides: no capture
    same = detect_msg1({(0, 0): [a, Msg1(5, 0, 0, 0x1234)]})
    assert same[(0, 0)].kind is Outcome.COLLISION
    assert count_outcomes(out.values()) == (1, 1, 1)


@pytest.mark.parametrize(
    "c, s, q, k, expected",
    [(0, 0, 1.0, 8, 1.0), (8, 0, 1.0, 8, 0.5), (4, 2, 0.5, 8, 0.4)],
)
def test_access_probability_examples(c, s, q, k, expected):
    assert update_access_probability(c, s, q, k) == pytest.approx(expected)


@given(st.integers(0, 16), st.integers(0, 16), st.floats(1 / 64, 1.0), st.integers(1, 16))
def test_access_probability_bounds(c, s, q, k):
    assert 1 / 64 <= update_access_probability(c, s, q, k) <= 1.0


def test_ledger_tracks_groups_separately():
    led = InventoryLedger()
    led.record_round(RoundCounters(0, 0, 1.0, 0, 0, 8), 8, group=0)
    assert led.q_for(0) == pytest.approx(0.5)
    assert led.q_for(1) == 1.0
    led.record_round(RoundCounters(1, 24, 1.0, 0, 0, 8), 8, adapt=False, group=1)
    assert led.q_for(1) == 1.0
    assert len(led.rounds) == 2


def test_msg3_ledger_is_idempotent():
    led = InventoryLedger()
    assert process_msg3(led, [Msg3(42, 0, 0)]) == [42]
    assert process_msg3(led, [Msg3(42, 9, 1)]) == []
    assert led.inventoried_ids == {42}


def test_paging_validation():
    with pytest.raises(ValueError):
        PagingMsg(0, 0, 1.5, 4, 2)
    with pytest.raises(ValueError):
        PagingMsg(0, 0, 0.5, 0, 2)
    assert PagingMsg(3, 0, 1.0, 4, 2, group_modulus=2).group == 1


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("k", [1, 2, 4])
@pytest.mark.parametrize("q", [0.25, 0.5, 1.0])
def test_formula_matches_enumeration(n, k, q):
    assert success_probability(n, k, q) == pytest.approx(enumerate_success(n, k, q), abs=1e-12)


def test_fifty_devices_within_three_sigma():
    n, q, trials = 50, 8 / 50, 100_000
    ok = simulate_success(n, 4, 2, q, trials, seed=11)
    p = success_probability(n, 8, q)
    assert abs(ok.mean() - p) <= 3 * binomial_sigma(p, trials)
