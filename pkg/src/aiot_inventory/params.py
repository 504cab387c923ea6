"""Device/protocol parameter sets and the two built-in presets.

Values are stored in human-scale units (nJ, uW, ms, slots); the ``*_j``/``*_w``
properties give SI values for the simulator.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .energy import EnergyStorage, PowerProfile


@dataclass(frozen=True)
class Table1:
    energy_storage_nj: float
    turn_on_threshold_nj: float
    turn_off_threshold_nj: float
    p_rx_uw: float
    p_tx_uw: float
    p_sl_uw: float
    p_lpwur_uw: float
    t_pg_slots: int
    t_on_dcm_slots: int
    t_on_timer_slots: int
    ao_time: int
    ao_freq: int
    n_devices: int = 600
    slot_ms: float = 0.5
    paging_slots: int = 2
    msg1_slots: int = 1
    msg2_slots: int = 1
    msg3_slots: int = 6

    @property
    def slot_s(self) -> float:
        return self.slot_ms * 1e-3

    @property
    def e_max_j(self) -> float:
        return self.energy_storage_nj * 1e-9

    @property
    def e_up_j(self) -> float:
        return self.turn_on_threshold_nj * 1e-9

    @property
    def e_low_j(self) -> float:
        return self.turn_off_threshold_nj * 1e-9

    @property
    def n_aos(self) -> int:
        return self.ao_time * self.ao_freq

    def storage(self, e_es_j: float | None = None) -> EnergyStorage:
        return EnergyStorage(
            e_es=self.e_up_j if e_es_j is None else e_es_j,
            e_max=self.e_max_j,
            e_up=self.e_up_j,
            e_low=self.e_low_j,
        )

    def power(self) -> PowerProfile:
        return PowerProfile(
            p_rx=self.p_rx_uw * 1e-6,
            p_tx=self.p_tx_uw * 1e-6,
            p_sl=self.p_sl_uw * 1e-6,
            p_lpwur=self.p_lpwur_uw * 1e-6,
        )

    def violations(self) -> list[str]:
        """Human-readable constraint violations, empty if the set is consistent."""
        out = []
        if not 0 <= self.turn_off_threshold_nj < self.turn_on_threshold_nj:
            out.append(
                "turn_off_threshold_nj: must be >= 0 and below turn_on_threshold_nj "
                f"({self.turn_off_threshold_nj} vs {self.turn_on_threshold_nj})"
            )
        if self.turn_on_threshold_nj > self.energy_storage_nj:
            out.append(
                "turn_on_threshold_nj: must not exceed energy_storage_nj "
                f"({self.turn_on_threshold_nj} > {self.energy_storage_nj})"
            )
        if self.t_on_timer_slots < self.t_pg_slots:
            out.append(
                "t_on_timer_slots: on timer must cover one paging period "
                f"(t_on_timer_slots={self.t_on_timer_slots} < t_pg_slots={self.t_pg_slots})"
            )
        if self.t_on_dcm_slots < self.paging_slots:
            out.append(
                "t_on_dcm_slots: on window must fit a whole paging "
                f"({self.t_on_dcm_slots} < paging_slots={self.paging_slots})"
            )
        if self.t_on_dcm_slots > self.t_pg_slots:
            out.append("t_on_dcm_slots: must not exceed t_pg_slots")
        if self.n_devices < 1:
            out.append(f"n_devices: must be >= 1 (got {self.n_devices})")
        if self.slot_ms <= 0:
            out.append("slot_ms: must be positive")
        for name in ("paging_slots", "msg1_slots", "msg2_slots", "msg3_slots", "ao_time", "ao_freq", "t_pg_slots"):
            if getattr(self, name) < 1:
                out.append(f"{name}: must be >= 1")
        for name in ("p_rx_uw", "p_tx_uw", "p_sl_uw", "p_lpwur_uw"):
            if getattr(self, name) < 0:
                out.append(f"{name}: must be >= 0")
        if self.p_rx_uw <= 0:
            out.append("p_rx_uw: must be positive")
        if self.p_sl_uw >= self.p_rx_uw:
            out.append("p_sl_uw: sleep power must be below p_rx_uw")
        return out

    def with_overrides(self, **kw) -> "Table1":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


DEVICE1 = Table1(
    energy_storage_nj=500.0,
    turn_on_threshold_nj=500.0,
    turn_off_threshold_nj=250.0,
    p_rx_uw=1.0,
    p_tx_uw=1.0,
    p_sl_uw=0.1,
    p_lpwur_uw=1.0,
    t_pg_slots=24,
    t_on_dcm_slots=4,
    t_on_timer_slots=36,
    ao_time=4,
    ao_freq=2,
)

DEVICE2 = Table1(
    energy_storage_nj=5000.0,
    turn_on_threshold_nj=5000.0,
    turn_off_threshold_nj=2500.0,
    p_rx_uw=50.0,
    p_tx_uw=200.0,
    p_sl_uw=0.1,
    p_lpwur_uw=1.0,
    t_pg_slots=28,
    t_on_dcm_slots=2,
    t_on_timer_slots=52,
    ao_time=4,
    ao_freq=4,
)

PRESETS = {"device1": DEVICE1, "device2": DEVICE2}
