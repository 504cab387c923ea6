from __future__ import annotations

import json

import pytest

from aiot_inventory.cli import ScenarioError, main, parse_seeds, scenario_from_dict, validate_scenario
from aiot_inventory.metrics import read_summary
from aiot_inventory.params import DEVICE1, DEVICE2


def _write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_presets_match_parameter_table():
    d1 = validate_scenario("device1")
    assert d1.table == DEVICE1
    t = d1.table
    assert (t.energy_storage_nj, t.turn_on_threshold_nj, t.turn_off_threshold_nj) == (500, 500, 250)
    assert (t.p_rx_uw, t.p_tx_uw, t.p_sl_uw, t.p_lpwur_uw) == (1, 1, 0.1, 1)
    assert (t.t_pg_slots, t.t_on_dcm_slots, t.t_on_timer_slots, t.ao_time, t.ao_freq) == (24, 4, 36, 4, 2)
    assert (t.n_devices, t.slot_ms, t.paging_slots, t.msg1_slots, t.msg2_slots, t.msg3_slots) == (600, 0.5, 2, 1, 1, 6)
    t = validate_scenario("device2").table
    assert t == DEVICE2
    assert (t.energy_storage_nj, t.p_rx_uw, t.p_tx_uw, t.t_pg_slots, t.t_on_dcm_slots, t.t_on_timer_slots, t.ao_freq) == (
        5000, 50, 200, 28, 2, 52, 4)


def test_emitted_presets_round_trip(tmp_path):
    assert main(["emit-preset", "--out", str(tmp_path)]) == 0
    for name in ("device1", "device2"):
        sc = validate_scenario(str(tmp_path / f"{name}.json"))
        assert sc == validate_scenario(name)


def test_short_timer_is_reported(tmp_path):
    res = validate_scenario(_write(tmp_path, {"preset": "device1", "t_on_timer_slots": 10}))
    assert any(v.startswith("t_on_timer_slots") and "t_pg_slots=24" in v for v in res)


def test_threshold_order_is_reported(tmp_path):
    res = validate_scenario(_write(tmp_path, {"turn_off_threshold_nj": 500}))
    assert any(v.startswith("turn_off_threshold_nj") for v in res)


def test_unknown_and_mistyped_keys(tmp_path):
    res = validate_scenario(_write(tmp_path, {"p_rx": 1, "ng": "two", "layout": {"tx_dbm": 30}}))
    text = "\n".join(res)
    assert "p_rx: unknown key" in text
    assert "ng: expected an integer" in text
    assert "layout.tx_dbm: unknown key" in text


def test_parse_error_has_location(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "ng": 2,,\n}')
    res = validate_scenario(str(p))
    assert res and res[0].startswith("line 2")


def test_overrides_apply():
    sc = scenario_from_dict({"preset": "device2", "mechanism": "em", "ng": 3, "errors": {"msg1": 0.1}})
    assert sc.mechanism.value == "em" and sc.n_groups == 3 and sc.errors.msg1 == 0.1 and sc.lp_wur
    with pytest.raises(ScenarioError):
        scenario_from_dict({"preset": "device3"})


def test_seed_ranges():
    assert parse_seeds("1..10") == list(range(1, 11))
    assert parse_seeds("7") == [7]
    assert parse_seeds("1,4,9") == [1, 4, 9]


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--seed", "1..x"]) != 0
    assert main(["run", "--ng", "0", "--out", str(tmp_path)]) != 0
    assert "ng" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--max-sim", "0.01", "--out", str(blocker / "sub")]) != 0
    assert main(["validate", _write(tmp_path, {"bogus": 1})]) != 0


def test_run_writes_layout_and_is_deterministic(tmp_path):
    args = ["run", "--scenario", "device1", "--seed", "3", "--mechanism", "em", "--max-sim", "1.0"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    leg = "device1_em_3"
    for f in ("progress.csv", "summary.txt", "pin.csv", "events.csv"):
        assert (tmp_path / "a" / leg / f).read_bytes() == (tmp_path / "b" / leg / f).read_bytes()
    s = read_summary(tmp_path / "a" / leg / "summary.txt")
    for key in ("t50_s", "t90_s", "t95_s", "t99_s", "t100_s", "rounds", "mean_attempts", "outages"):
        assert key in s


def test_pin_file_and_efficiency_flags(tmp_path):
    pin = tmp_path / "pin.txt"
    pin.write_text("\n".join(["-20"] * 600))
    out = tmp_path / "o"
    assert main(["run", "--pin-file", str(pin), "--efficiency-mode", "printed", "--max-sim", "0.5",
                 "--no-events", "--out", str(out)]) == 0
    lines = (out / "device1_dcm_1" / "pin.csv").read_text().splitlines()
    assert len(lines) == 601 and lines[1].endswith("-20.000000")


def test_sweep_and_compare(tmp_path, capsys):
    base = ["--scenario", "device1", "--seeds", "1..2", "--max-sim", "0.5", "--out", str(tmp_path)]
    assert main(["sweep", "--mechanism", "dcm", *base]) == 0
    lines = (tmp_path / "sweep_device1_dcm.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 + 2
    assert main(["compare", *base]) == 0
    out = capsys.readouterr().out
    assert "reduction" in out
    assert (tmp_path / "device1_em_2").is_dir() and (tmp_path / "device1_dcm_2").is_dir()
    rows = (tmp_path / "compare_device1.csv").read_text().splitlines()
    assert rows[0] == "seed,em_t99_s,dcm_t99_s,reduction_pct" and rows[-1].startswith("mean")


def test_lp_wur_flag_both_ways(tmp_path):
    for flag, expect in (("--no-lp-wur", False), ("--lp-wur", True)):
        out = tmp_path / flag
        assert main(["run", "--scenario", "device2", flag, "--max-sim", "0.05", "--no-events", "--out", str(out)]) == 0
        assert read_summary(out / "device2_dcm_1" / "summary.txt")["lp_wur"] is expect
