"""Energy storage, RF harvesting and per-slot energy bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class EfficiencyMode(str, Enum):
    """Orientation of the piecewise RF-to-DC conversion efficiency curve.

    ``PEAK`` puts the maximum (31 %) at -10 dBm with 5 % at -36 dBm.
    ``PRINTED`` uses the two branches the other way round, which gives 83 %
    at -36 dBm.
    """

    PEAK = "peak"
    PRINTED = "printed"

    @classmethod
    def parse(cls, value: "EfficiencyMode | str") -> "EfficiencyMode":
        if isinstance(value, cls):
            return value
        aliases = {
            "peak": cls.PEAK,
            "peak-at-minus-10": cls.PEAK,
            "printed": cls.PRINTED,
            "as-printed": cls.PRINTED,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown efficiency mode: {value!r}") from None


def dbm_to_watts(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def conversion_efficiency(p_in_dbm, mode: EfficiencyMode | str = EfficiencyMode.PEAK):
    """Harvester conversion efficiency for incident power ``p_in_dbm``.

    Both branches meet at 0.31 for -10 dBm. The result is clamped to [0, 1].
    Accepts scalars or arrays; returns the same shape (a float for scalars).
    """
    mode = EfficiencyMode.parse(mode)
    p = np.asarray(p_in_dbm, dtype=float)
    rising = (p + 41.0) / 100.0
    falling = (-2.0 * p + 11.0) / 100.0
    if mode is EfficiencyMode.PEAK:
        xi = np.where(p < -10.0, rising, falling)
    else:
        xi = np.where(p >= -10.0, rising, falling)
    xi = np.clip(xi, 0.0, 1.0)
    return float(xi) if xi.ndim == 0 else xi


def harvest_power(p_in_dbm, mode: EfficiencyMode | str = EfficiencyMode.PEAK):
    """Harvested power in watts: incident power times conversion efficiency."""
    p_w = dbm_to_watts(p_in_dbm) * conversion_efficiency(p_in_dbm, mode)
    return float(p_w) if np.ndim(p_w) == 0 else p_w


@dataclass(frozen=True)
class EnergyStorage:
    """Capacitor state and its on/off thresholds, all in joules."""

    e_es: float
    e_max: float
    e_up: float
    e_low: float

    def __post_init__(self):
        if not (0.0 <= self.e_low < self.e_up <= self.e_max):
            raise ValueError(
                "thresholds must satisfy 0 <= e_low < e_up <= e_max, got "
                f"low={self.e_low}, up={self.e_up}, max={self.e_max}"
            )
        if not (0.0 <= self.e_es <= self.e_max):
            raise ValueError(f"e_es={self.e_es} outside [0, {self.e_max}]")

    @property
    def above_turn_on(self) -> bool:
        return self.e_es >= self.e_up

    @property
    def below_turn_off(self) -> bool:
        return self.e_es < self.e_low


@dataclass(frozen=True)
class PowerProfile:
    """Per-state power draw in watts. The off state draws nothing."""

    p_rx: float
    p_tx: float
    p_sl: float
    p_lpwur: float
    p_off: float = 0.0

    def __post_init__(self):
        for name in ("p_rx", "p_tx", "p_sl", "p_lpwur"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.p_off != 0.0:
            raise ValueError("p_off is fixed at 0")
        if not self.p_sl < self.p_rx:
            raise ValueError("sleep power must be below reception power")


def integrate_slot(storage: EnergyStorage, draw: float, harvest: float, dt: float) -> EnergyStorage:
    """Advance ``storage`` by one slot of length ``dt`` seconds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if draw < 0 or harvest < 0:
        raise ValueError("draw and harvest must be non-negative")
    e = storage.e_es + (harvest - draw) * dt
    return replace(storage, e_es=min(max(e, 0.0), storage.e_max))


def em_on_duration(storage: EnergyStorage, p_rx: float) -> float:
    """Longest continuous monitoring time (s) between the turn-on and turn-off thresholds."""
    if p_rx <= 0:
        raise ValueError("p_rx must be positive")
    return (storage.e_up - storage.e_low) / p_rx
