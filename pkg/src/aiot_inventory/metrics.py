"""Event recording, completion-time quantiles and result files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

QUANTILES = (0.5, 0.9, 0.95, 0.99, 1.0)
SUMMARY_KEYS = ("t50_s", "t90_s", "t95_s", "t99_s", "t100_s", "rounds", "mean_attempts", "outages")


class EventKind(IntEnum):
    PAGING_SENT = 0
    MSG1_TX = 1
    MSG1_COLLISION = 2
    MSG2_SENT = 3
    MSG3_DELIVERED = 4
    STATE_CHANGE = 5
    ENERGY_SAMPLE = 6
    SYNC = 7


EVENT_DTYPE = np.dtype([
    ("slot", np.int64),
    ("device", np.int32),
    ("kind", np.int8),
    ("a", np.int32),
    ("b", np.int32),
    ("value", np.float64),
])


class EventLog:
    """Append-only event store backed by growable numpy columns.

    Payload columns ``a``, ``b`` and ``value`` are kind-specific:

    ==============  ==============  ==============  =====================
    kind            a               b               value
    ==============  ==============  ==============  =====================
    PAGING_SENT     round index     group           access probability
    MSG1_TX         AO index        random id       e_es (J)
    MSG1_COLLISION  AO index        #transmitters   0
    MSG2_SENT       AO index        random id       Msg3 start slot
    MSG3_DELIVERED  frequency       0               e_es (J)
    STATE_CHANGE    old state       new state       e_es (J)
    SYNC            group           round index     e_es (J)
    ==============  ==============  ==============  =====================

    Reader-side events use device ``-1``.
    """

    def __init__(self, capacity: int = 1 << 15, enabled: bool = True):
        self.enabled = enabled
        self.n = 0
        self._alloc(max(int(capacity), 16))

    def _alloc(self, cap):
        self.slot = np.empty(cap, np.int64)
        self.device = np.empty(cap, np.int32)
        self.kind = np.empty(cap, np.int8)
        self.a = np.empty(cap, np.int32)
        self.b = np.empty(cap, np.int32)
        self.value = np.empty(cap, np.float64)

    @property
    def capacity(self) -> int:
        return self.slot.size

    def ensure(self, extra: int):
        need = self.n + extra
        if need <= self.capacity:
            return
        cap = self.capacity
        while cap < need:
            cap *= 2
        old = (self.slot, self.device, self.kind, self.a, self.b, self.value)
        self._alloc(cap)
        for new, src in zip((self.slot, self.device, self.kind, self.a, self.b, self.value), old):
            new[: self.n] = src[: self.n]

    def append(self, slot: int, device: int, kind: EventKind, a: int = 0, b: int = 0, value: float = 0.0):
        if not self.enabled:
            return
        if self.n == self.capacity:
            self.ensure(1)
        i = self.n
        self.slot[i] = slot
        self.device[i] = device
        self.kind[i] = kind
        self.a[i] = a
        self.b[i] = b
        self.value[i] = value
        self.n = i + 1

    def extend(self, slot: int, devices: np.ndarray, kind: EventKind, a, b, value):
        if not self.enabled or len(devices) == 0:
            return
        k = len(devices)
        self.ensure(k)
        sl = slice(self.n, self.n + k)
        self.slot[sl] = slot
        self.device[sl] = devices
        self.kind[sl] = kind
        self.a[sl] = a
        self.b[sl] = b
        self.value[sl] = value
        self.n += k

    def __len__(self):
        return self.n

    def records(self) -> np.ndarray:
        out = np.empty(self.n, EVENT_DTYPE)
        for name in EVENT_DTYPE.names:
            out[name] = getattr(self, name)[: self.n]
        return out

    def of_kind(self, kind: EventKind) -> np.ndarray:
        rec = self.records()
        return rec[rec["kind"] == kind]

    def to_csv(self, path: str | Path):
        rec = self.records()
        with open(path, "w", newline="") as fh:
            fh.write("slot,device,kind,a,b,value\n")
            names = [k.name.lower() for k in EventKind]
            for r in rec:
                fh.write(f"{r['slot']},{r['device']},{names[r['kind']]},{r['a']},{r['b']},{r['value']!r}\n")


def completion_quantile(times: Sequence[float], fractions: Sequence[float], x: float) -> float | None:
    """First time at which the inventoried fraction reaches ``x``; ``None`` if never."""
    if not 0.0 < x <= 1.0:
        raise ValueError(f"invalid quantile {x}: must be in (0, 1]")
    f = np.asarray(fractions, dtype=float)
    hit = np.nonzero(f >= x - 1e-12)[0]
    if hit.size == 0:
        return None
    return float(np.asarray(times, dtype=float)[hit[0]])


def quantile_key(x: float) -> str:
    return f"t{round(x * 100):d}_s"


@dataclass(frozen=True)
class Summary:
    quantiles: Mapping[str, float | None]
    rounds: int
    mean_attempts: float
    outages: int
    n_devices: int
    inventoried: int

    def as_dict(self) -> dict:
        d = dict(self.quantiles)
        d.update(
            rounds=self.rounds,
            mean_attempts=self.mean_attempts,
            outages=self.outages,
            n_devices=self.n_devices,
            inventoried=self.inventoried,
        )
        return d


def _fmt(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ".nan"
        return repr(round(float(v), 9))
    return str(v)


def write_summary(values: Mapping[str, object], path: str | Path):
    """Flat ``key: value`` document (a YAML subset); absent values are ``null``."""
    lines = [f"{k}: {_fmt(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary(path: str | Path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, raw = line.partition(":")
        raw = raw.strip()
        if raw == "null":
            val = None
        elif raw in ("true", "false"):
            val = raw == "true"
        else:
            try:
                val = int(raw)
            except ValueError:
                try:
                    val = float(raw.replace(".nan", "nan"))
                except ValueError:
                    val = raw
        out[key.strip()] = val
    return out


def write_progress(times: Iterable[float], fractions: Iterable[float], path: str | Path):
    with open(path, "w", newline="") as fh:
        fh.write("time_s,fraction_inventoried\n")
        for t, f in zip(times, fractions):
            fh.write(f"{t:.4f},{f:.6f}\n")


def write_pin(p_in_dbm: Iterable[float], path: str | Path):
    with open(path, "w", newline="") as fh:
        fh.write("device,p_in_dbm\n")
        for i, p in enumerate(p_in_dbm):
            fh.write(f"{i},{p:.6f}\n")


def emit(result, out_dir: str | Path, events: bool = False) -> dict[str, Path]:
    """Write progress.csv, summary.txt, pin.csv and optionally events.csv."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {
        "progress": out / "progress.csv",
        "summary": out / "summary.txt",
        "pin": out / "pin.csv",
    }
    write_progress(result.times, result.fractions, paths["progress"])
    write_summary(result.summary_dict(), paths["summary"])
    write_pin(result.p_in_samples, paths["pin"])
    if events:
        paths["events"] = out / "events.csv"
        result.events.to_csv(paths["events"])
    return paths


def aggregate(rows: Sequence[Mapping[str, object]], keys: Sequence[str] = SUMMARY_KEYS) -> dict[str, dict]:
    """Mean and sample standard deviation per key over runs; ``None`` values are skipped.

    ``n_<key>`` counts how many runs had a value.
    """
    mean, std, count = {}, {}, {}
    for k in keys:
        vals = np.array([r[k] for r in rows if r.get(k) is not None], dtype=float)
        count[k] = int(vals.size)
        mean[k] = float(vals.mean()) if vals.size else None
        std[k] = float(vals.std(ddof=1)) if vals.size > 1 else (0.0 if vals.size == 1 else None)
    return {"mean": mean, "std": std, "count": count}


def write_table(rows: Sequence[Mapping[str, object]], columns: Sequence[str], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) if r.get(c) is not None else "" for c in columns])
