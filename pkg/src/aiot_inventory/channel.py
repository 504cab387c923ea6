"""Factory-hall geometry, path loss, incident power and message delivery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PATHLOSS_MODELS = ("inf-dh-nlos", "free-space", "fixed-table")


class PlacementInfeasible(RuntimeError):
    pass


def bs_grid(hall=(120.0, 60.0), rows: int = 3, cols: int = 6, pitch: float = 20.0) -> np.ndarray:
    """Reader positions on a ``rows`` x ``cols`` grid centred in the hall, row-major."""
    w, h = hall
    x0 = (w - (cols - 1) * pitch) / 2.0
    y0 = (h - (rows - 1) * pitch) / 2.0
    xs = x0 + pitch * np.arange(cols)
    ys = y0 + pitch * np.arange(rows)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class LayoutConfig:
    hall: tuple[float, float] = (120.0, 60.0)
    bs_positions: tuple[tuple[float, float], ...] = field(
        default_factory=lambda: tuple(map(tuple, bs_grid().tolist()))
    )
    # (50, 30): one of the two central readers of the 3 x 6 grid
    active_bs_index: int = 8
    tx_power_dbm: float = 33.0
    carrier_ghz: float = 0.9
    pathloss_model: str = "inf-dh-nlos"
    sensitivity_dbm: float = -36.0
    association: str = "active"  # or "nearest"
    pathloss_table: tuple[tuple[float, float], ...] | None = None
    min_distance_m: float = 1.0

    def __post_init__(self):
        if self.pathloss_model not in PATHLOSS_MODELS:
            raise ValueError(f"unsupported path-loss model: {self.pathloss_model!r}")
        if self.association not in ("active", "nearest"):
            raise ValueError(f"unsupported association mode: {self.association!r}")
        if not 0 <= self.active_bs_index < len(self.bs_positions):
            raise ValueError("active_bs_index out of range")
        if self.pathloss_model == "fixed-table" and not self.pathloss_table:
            raise ValueError("fixed-table model needs pathloss_table")


@dataclass(frozen=True)
class MessageErrorConfig:
    """Independent per-message loss probabilities."""

    paging: float = 0.0
    msg1: float = 0.0
    msg2: float = 0.0
    msg3: float = 0.0

    def __post_init__(self):
        for name in ("paging", "msg1", "msg2", "msg3"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"loss probability for {name} must be in [0, 1], got {p}")

    def loss(self, kind: str) -> float:
        return getattr(self, kind)


def path_loss(distance_m, model: str = "inf-dh-nlos", carrier_ghz: float = 0.9, table=None):
    """Path loss in dB for a 2-D distance in metres."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if model == "inf-dh-nlos":
        pl = 33.63 + 21.9 * np.log10(d) + 20.0 * math.log10(carrier_ghz)
    elif model == "free-space":
        pl = 20.0 * np.log10(d * 1e-3) + 20.0 * math.log10(carrier_ghz * 1e3) + 32.45
    elif model == "fixed-table":
        if not table:
            raise ValueError("fixed-table model needs a distance->loss table")
        tab = np.asarray(sorted(table), dtype=float)
        pl = np.interp(d, tab[:, 0], tab[:, 1])
    else:
        raise ValueError(f"unsupported path-loss model: {model!r}")
    return float(pl) if pl.ndim == 0 else pl


def incident_power(positions: np.ndarray, layout: LayoutConfig) -> np.ndarray:
    """p_in (dBm) at each position from the active reader, or the nearest one."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    bs = np.asarray(layout.bs_positions, dtype=float)
    if layout.association == "nearest":
        d = np.linalg.norm(pos[:, None, :] - bs[None, :, :], axis=2).min(axis=1)
    else:
        d = np.linalg.norm(pos - bs[layout.active_bs_index], axis=1)
    d = np.maximum(d, layout.min_distance_m)
    pl = path_loss(d, layout.pathloss_model, layout.carrier_ghz, layout.pathloss_table)
    return layout.tx_power_dbm - np.atleast_1d(pl)


def place_devices(n: int, layout: LayoutConfig, rng: np.random.Generator,
                  max_batches: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Uniform placement in the hall, redrawing devices below the sensitivity.

    Returns ``(positions, p_in_dbm)`` with exactly ``n`` accepted devices.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w, h = layout.hall
    accepted_pos = []
    count = 0
    for _ in range(max_batches):
        pos = rng.uniform((0.0, 0.0), (w, h), size=(max(2 * n, 64), 2))
        p_in = incident_power(pos, layout)
        ok = p_in >= layout.sensitivity_dbm
        if ok.any():
            accepted_pos.append(pos[ok])
            count += int(ok.sum())
        if count >= n:
            break
    else:
        raise PlacementInfeasible(
            f"only {count} of {n} devices reach {layout.sensitivity_dbm} dBm "
            f"after {max_batches} batches"
        )
    pos = np.concatenate(accepted_pos)[:n]
    return pos, incident_power(pos, layout)


def load_pin_file(path: str | Path) -> np.ndarray:
    """Read newline-separated p_in samples (dBm); blank lines and ``#`` comments skipped."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not values:
        raise ValueError(f"{path}: no p_in samples")
    return np.asarray(values)


def deliver(loss_probability: float, receiving: bool, rng: np.random.Generator) -> bool:
    """One delivery attempt: needs a receiving-capable recipient and a passed loss draw."""
    if not receiving:
        return False
    if loss_probability <= 0.0:
        return True
    return bool(rng.random() >= loss_probability)


def deliver_many(loss_probability: float, receiving: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    receiving = np.asarray(receiving, dtype=bool)
    if loss_probability <= 0.0:
        return receiving.copy()
    return receiving & (rng.random(receiving.shape) >= loss_probability)
