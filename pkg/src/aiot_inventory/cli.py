"""Command-line front end: scenario files, seed sweeps, paired EM/DCM comparisons.

Scenario files are JSON objects. ``preset`` picks the base parameter set
(``device1`` or ``device2``); every other key overrides one field. Parameter
keys carry their unit (``_nj``, ``_uw``, ``_slots``, ``_s``)::

    {
      "preset": "device1",
      "mechanism": "dcm",
      "ng": 2,
      "t_on_timer_slots": 36,
      "layout": {"active_bs_index": 8, "tx_power_dbm": 33.0},
      "errors": {"msg1": 0.0}
    }

Results go to ``<out>/<scenario>_<mechanism>_<seed>/``.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import LayoutConfig, MessageErrorConfig, load_pin_file
from .device import Mechanism
from .energy import EfficiencyMode
from .engine import InvalidScenario, Scenario, default_scenario, reduction, run
from .metrics import SUMMARY_KEYS, aggregate, emit, write_table
from .params import PRESETS, Table1

# scenario-file key -> Scenario field
SCENARIO_KEYS = {
    "name": "name",
    "mechanism": "mechanism",
    "ng": "n_groups",
    "lp_wur": "lp_wur",
    "efficiency_mode": "efficiency_mode",
    "warmup_s": "warmup_s",
    "max_sim_s": "max_sim_s",
    "seed": "seed",
    "access_control": "access_control",
    "q0": "q0",
    "q_min": "q_min",
    "completion_quantile": "completion_quantile",
    "lpwur_miss": "lpwur_miss",
    "pin_samples_dbm": "pin_samples",
}
TABLE_KEYS = Table1.keys()
LAYOUT_KEYS = tuple(f.name for f in fields(LayoutConfig))
ERROR_KEYS = tuple(f.name for f in fields(MessageErrorConfig))
TOP_KEYS = ("preset", "layout", "errors") + tuple(SCENARIO_KEYS) + TABLE_KEYS


class ScenarioError(ValueError):
    """Scenario file problems; ``violations`` lists one message per offending key."""

    def __init__(self, violations: Sequence[str], source: str = ""):
        self.violations = list(violations)
        head = f"{source}: " if source else ""
        super().__init__(head + "invalid scenario:\n  " + "\n  ".join(self.violations))


def _typed(key: str, value, kind, errors: list[str]):
    if kind is bool:
        if not isinstance(value, bool):
            errors.append(f"{key}: expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            errors.append(f"{key}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{key}: expected a number, got {value!r}")
            return value
        return float(value)
    if kind is str and not isinstance(value, str):
        errors.append(f"{key}: expected a string, got {value!r}")
    return value


_TABLE_TYPES = {f.name: (int if f.type in ("int", int) else float) for f in fields(Table1)}
_SCENARIO_TYPES = {
    "name": str, "mechanism": str, "ng": int, "lp_wur": bool, "efficiency_mode": str,
    "warmup_s": float, "max_sim_s": float, "seed": int, "access_control": bool,
    "q0": float, "q_min": float, "completion_quantile": float, "lpwur_miss": float,
}


def scenario_from_dict(doc: dict, source: str = "") -> Scenario:
    """Resolve a scenario document (preset plus overrides) into a validated Scenario.

    Raises ScenarioError listing every unknown key, mistyped value and
    violated constraint.
    """
    if not isinstance(doc, dict):
        raise ScenarioError(["top level: expected an object"], source)
    errors: list[str] = []
    for k in doc:
        if k not in TOP_KEYS:
            errors.append(f"{k}: unknown key")
    preset = doc.get("preset", "device1")
    if preset not in PRESETS:
        errors.append(f"preset: unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
        preset = "device1"
    base = default_scenario(preset)

    table_kw = {}
    for k in TABLE_KEYS:
        if k in doc:
            table_kw[k] = _typed(k, doc[k], _TABLE_TYPES[k], errors)
    sc_kw = {}
    for k, fname in SCENARIO_KEYS.items():
        if k not in doc:
            continue
        if k == "pin_samples_dbm":
            v = doc[k]
            if v is None:
                sc_kw[fname] = None
            elif not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                errors.append(f"{k}: expected a list of numbers")
            else:
                sc_kw[fname] = tuple(float(x) for x in v)
            continue
        sc_kw[fname] = _typed(k, doc[k], _SCENARIO_TYPES[k], errors)

    layout, errs = base.layout, base.errors
    if "layout" in doc:
        sub = doc["layout"]
        if not isinstance(sub, dict):
            errors.append("layout: expected an object")
        else:
            kw = {}
            for k, v in sub.items():
                if k not in LAYOUT_KEYS:
                    errors.append(f"layout.{k}: unknown key")
                elif k in ("hall",):
                    kw[k] = tuple(v) if isinstance(v, list) else v
                elif k in ("bs_positions", "pathloss_table"):
                    kw[k] = tuple(tuple(p) for p in v) if isinstance(v, list) else v
                else:
                    kw[k] = v
            try:
                layout = replace(layout, **kw)
            except (ValueError, TypeError) as exc:
                errors.append(f"layout: {exc}")
    if "errors" in doc:
        sub = doc["errors"]
        if not isinstance(sub, dict):
            errors.append("errors: expected an object")
        else:
            kw = {}
            for k, v in sub.items():
                if k not in ERROR_KEYS:
                    errors.append(f"errors.{k}: unknown key")
                else:
                    kw[k] = _typed(f"errors.{k}", v, float, errors)
            try:
                errs = replace(errs, **kw)
            except (ValueError, TypeError) as exc:
                errors.append(f"errors: {exc}")

    if "mechanism" in sc_kw:
        try:
            sc_kw["mechanism"] = Mechanism.parse(sc_kw["mechanism"])
        except ValueError as exc:
            errors.append(f"mechanism: {exc}")
    if "efficiency_mode" in sc_kw:
        try:
            sc_kw["efficiency_mode"] = EfficiencyMode.parse(sc_kw["efficiency_mode"])
        except ValueError as exc:
            errors.append(f"efficiency_mode: {exc}")
    sc_kw.setdefault("name", preset if not table_kw else f"{preset}-custom")
    try:
        scenario = replace(base, table=replace(base.table, **table_kw), layout=layout, errors=errs, **sc_kw)
        errors.extend(scenario.violations())
    except (TypeError, ValueError):
        # already reported as a type error above
        pass
    if errors:
        raise ScenarioError(errors, source)
    return scenario


def scenario_to_dict(scenario: Scenario, preset: str | None = None) -> dict:
    """Fully resolved scenario document; feeding it back gives the same Scenario."""
    doc: dict = {"preset": preset or (scenario.name if scenario.name in PRESETS else "device1")}
    doc.update(scenario.table.as_dict())
    for k, fname in SCENARIO_KEYS.items():
        v = getattr(scenario, fname)
        if isinstance(v, (Mechanism, EfficiencyMode)):
            v = v.value
        if k == "pin_samples_dbm":
            v = None if v is None else list(v)
        doc[k] = v
    layout = asdict(scenario.layout)
    layout["hall"] = list(layout["hall"])
    layout["bs_positions"] = [list(p) for p in layout["bs_positions"]]
    if layout["pathloss_table"] is not None:
        layout["pathloss_table"] = [list(p) for p in layout["pathloss_table"]]
    doc["layout"] = layout
    doc["errors"] = asdict(scenario.errors)
    return doc


def load_scenario(source: str) -> Scenario:
    """A preset name or the path of a JSON scenario file."""
    if source in PRESETS:
        return default_scenario(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([f"cannot read scenario file: {exc.strerror or exc}"], source) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"], source) from None
    sc = scenario_from_dict(doc, source)
    if "name" not in doc:
        sc = replace(sc, name=path.stem)
    return sc


def validate_scenario(source: str) -> Scenario | list[str]:
    """The resolved Scenario, or the list of human-readable violations."""
    try:
        return load_scenario(source)
    except ScenarioError as exc:
        return exc.violations


def parse_seeds(text: str) -> list[int]:
    """``"7"`` -> [7]; ``"1..10"`` -> [1, ..., 10] (inclusive); ``"1,4,9"`` -> [1, 4, 9]."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed range {text!r} (use N, A..B or A,B,C)") from None


# commands -------------------------------------------------------------------------------


def _apply_flags(sc: Scenario, args) -> Scenario:
    kw = {}
    if getattr(args, "mechanism", None):
        kw["mechanism"] = Mechanism.parse(args.mechanism)
    if getattr(args, "ng", None) is not None:
        kw["n_groups"] = args.ng
    if getattr(args, "lp_wur", None) is not None:
        kw["lp_wur"] = args.lp_wur
    if getattr(args, "efficiency_mode", None):
        kw["efficiency_mode"] = EfficiencyMode.parse(args.efficiency_mode)
    if getattr(args, "pin_file", None):
        kw["pin_samples"] = tuple(load_pin_file(args.pin_file).tolist())
    if getattr(args, "max_sim", None) is not None:
        kw["max_sim_s"] = args.max_sim
    sc = replace(sc, **kw)
    v = sc.violations()
    if v:
        raise ScenarioError(v, "command line")
    return sc


def leg_dir(out: Path, sc: Scenario) -> Path:
    return out / f"{sc.name}_{Mechanism.parse(sc.mechanism).value}_{sc.seed}"


def _run_leg(sc: Scenario, out: Path, events: bool) -> dict:
    res = run(replace(sc, log_events=events))
    emit(res, leg_dir(out, sc), events=events)
    return res.summary_dict()


def _run_legs(legs: list[Scenario], out: Path, events: bool, jobs: int) -> list[dict]:
    if jobs > 1 and len(legs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_leg, legs, [out] * len(legs), [events] * len(legs)))
    return [_run_leg(sc, out, events) for sc in legs]


def _fmt_s(v) -> str:
    return "absent" if v is None else f"{v:.3f} s"


def cmd_run(args) -> int:
    sc = _apply_flags(load_scenario(args.scenario), args)
    sc = replace(sc, seed=args.seed)
    row = _run_leg(sc, Path(args.out), events=not args.no_events)
    print(f"{sc.name} {Mechanism.parse(sc.mechanism).value} seed {sc.seed}: "
          f"T_99 {_fmt_s(row['t99_s'])}, {row['inventoried']}/{row['n_devices']} inventoried, "
          f"{row['rounds']} rounds -> {leg_dir(Path(args.out), sc)}")
    return 0


def cmd_sweep(args) -> int:
    sc = _apply_flags(load_scenario(args.scenario), args)
    legs = [replace(sc, seed=s) for s in args.seeds]
    out = Path(args.out)
    rows = _run_legs(legs, out, args.events, args.jobs)
    agg = aggregate(rows)
    cols = ["seed", *SUMMARY_KEYS, "inventoried"]
    table = [dict(r) for r in rows]
    table.append({"seed": "mean", **agg["mean"]})
    table.append({"seed": "std", **agg["std"]})
    path = out / f"sweep_{sc.name}_{Mechanism.parse(sc.mechanism).value}.csv"
    write_table(table, cols, path)
    m = agg["mean"]["t99_s"]
    n = agg["count"]["t99_s"]
    print(f"{len(rows)} runs; mean T_99 {_fmt_s(m)} over {n} runs reaching 99% -> {path}")
    return 0


def cmd_compare(args) -> int:
    sc = _apply_flags(load_scenario(args.scenario), args)
    out = Path(args.out)
    legs = []
    for s in args.seeds:
        legs.append(replace(sc, seed=s, mechanism=Mechanism.EM))
        legs.append(replace(sc, seed=s, mechanism=Mechanism.DCM))
    rows = _run_legs(legs, out, args.events, args.jobs)
    key = f"t{round(sc.completion_quantile * 100)}_s"
    table, reds = [], []
    for s, em, dcm in zip(args.seeds, rows[0::2], rows[1::2]):
        r = reduction(em.get(key), dcm.get(key))
        if r is not None:
            reds.append(r)
        table.append({"seed": s, f"em_{key}": em.get(key), f"dcm_{key}": dcm.get(key),
                      "reduction_pct": None if r is None else 100.0 * r})
    mean = float(np.mean(reds)) if reds else None
    table.append({"seed": "mean", f"em_{key}": _mean([t[f"em_{key}"] for t in table]),
                  f"dcm_{key}": _mean([t[f"dcm_{key}"] for t in table]),
                  "reduction_pct": None if mean is None else 100.0 * mean})
    path = out / f"compare_{sc.name}.csv"
    write_table(table, ["seed", f"em_{key}", f"dcm_{key}", "reduction_pct"], path)
    for t in table[:-1]:
        red = t["reduction_pct"]
        print(f"seed {t['seed']}: EM {_fmt_s(t[f'em_{key}'])}, DCM {_fmt_s(t[f'dcm_{key}'])}, "
              f"reduction {'n/a' if red is None else f'{red:.1f}%'}")
    if mean is None:
        print(f"mean {key[:-2].upper()} reduction: n/a (no seed reached the quantile under both mechanisms)")
    else:
        print(f"mean {key[:-2].upper()} reduction: {100 * mean:.1f}% over {len(reds)} paired seeds -> {path}")
    return 0


def _mean(vals):
    v = [x for x in vals if x is not None]
    return float(np.mean(v)) if v else None


def cmd_emit_preset(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [args.preset] if args.preset else list(PRESETS)
    for name in names:
        path = out / f"{name}.json"
        path.write_text(json.dumps(scenario_to_dict(default_scenario(name), name), indent=2) + "\n")
        print(path)
    return 0


def cmd_validate(args) -> int:
    res = validate_scenario(args.scenario)
    if isinstance(res, list):
        for v in res:
            print(f"{args.scenario}: {v}", file=sys.stderr)
        return 2
    print(f"{args.scenario}: ok ({res.name}, {Mechanism.parse(res.mechanism).value}, N_g={res.n_groups})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aiot-inventory", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds: bool):
        sp.add_argument("--scenario", default="device1", help="preset name (device1, device2) or JSON file")
        if seeds:
            sp.add_argument("--seeds", type=parse_seeds, default=parse_seeds("1..10"), help="A..B inclusive")
        else:
            sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--ng", type=int, help="number of paging groups (DCM)")
        sp.add_argument("--lp-wur", action=argparse.BooleanOptionalAction, default=None,
                        help="monitor paging with the wake-up receiver (default: from the scenario)")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--pin-file", help="newline-separated p_in samples (dBm) instead of placement")
        sp.add_argument("--efficiency-mode", choices=["printed", "peak"])
        sp.add_argument("--max-sim", type=float, help="inventory-stage horizon in seconds")

    sp = sub.add_parser("run", help="one scenario, one seed")
    common(sp, seeds=False)
    sp.add_argument("--mechanism", choices=["em", "dcm"])
    sp.add_argument("--no-events", action="store_true", help="skip events.csv")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="seed range, aggregated summary")
    common(sp, seeds=True)
    sp.add_argument("--mechanism", choices=["em", "dcm"])
    sp.add_argument("--events", action="store_true", help="also write events.csv per run")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="paired EM vs DCM over a seed range")
    common(sp, seeds=True)
    sp.add_argument("--events", action="store_true", help="also write events.csv per run")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("emit-preset", help="write the built-in presets as scenario files")
    sp.add_argument("preset", nargs="?", choices=list(PRESETS))
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_emit_preset)

    sp = sub.add_parser("validate", help="check a scenario file")
    sp.add_argument("scenario")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ScenarioError, InvalidScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
