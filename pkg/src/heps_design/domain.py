"""Value types describing the converter and a modulation operating point."""
from dataclasses import dataclass, field, fields
from enum import IntEnum
from typing import Union

from heps_design.errors import DomainError

ZVS_MODES = ("charge", "sign")


class Strategy(IntEnum):
    """EPS strategy selector; the integer value is the surrogate feature S."""

    EPS1 = 0
    EPS2 = 1

    @classmethod
    def parse(cls, value: Union["Strategy", int, str]) -> "Strategy":
        """
        Convert a name (``eps1``/``EPS2``) or feature code (0/1) to a Strategy.

        Args:
            value: Strategy, integer code or case-insensitive name.

        Returns:
            Strategy: The matching member.

        Raises:
            DomainError: If the value names no strategy.
        """
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise DomainError(f"unknown strategy {value!r}", field="strategy") from None
        try:
            return cls(int(value))
        except ValueError:
            raise DomainError(f"unknown strategy {value!r}", field="strategy") from None


def _require_non_negative(obj) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, (int, float)) and not isinstance(value, bool) and value < 0:
            raise DomainError(f"{f.name} must be >= 0, got {value}", field=f.name)


@dataclass(frozen=True)
class LossModelParams:
    """
    Parameters of the analytic loss and ZVS model.

    Defaults land the rated-point efficiency of the design case in the
    94-98.5 % band; they are calibration values, not device data.
    Core loss is disabled while ``k_c`` is zero.
    """

    rds_on: float = 80e-3
    coss_eff: float = 100e-12
    k_on: float = 5e-8
    k_off: float = 2e-8
    r_w: float = 50e-3
    k_c: float = 0.0
    alpha: float = 1.5
    beta: float = 2.5
    core_area: float = 1e-4
    turns: float = 20.0
    core_volume: float = 1e-5
    zvs_mode: str = "charge"

    def __post_init__(self):
        _require_non_negative(self)
        if self.zvs_mode not in ZVS_MODES:
            raise DomainError(f"zvs_mode must be one of {ZVS_MODES}, got {self.zvs_mode!r}", field="zvs_mode")
        if self.k_c > 0 and (self.core_area <= 0 or self.turns <= 0):
            raise DomainError("core_area and turns must be > 0 when core loss is enabled", field="core_area")


@dataclass(frozen=True)
class ConverterSpec:
    """Electrical parameters of the DAB. Defaults are the 1 kW design case."""

    V1: float = 200.0
    n: float = 1.0
    Lr: float = 167e-6
    fs: float = 20e3
    t_dead: float = 400e-9
    loss_params: LossModelParams = field(default_factory=LossModelParams)

    def __post_init__(self):
        for name in ("V1", "n", "Lr", "fs"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}", field=name)
        if not 0 <= self.t_dead < self.Ts / 20:
            raise DomainError(f"t_dead must lie in [0, Ts/20), got {self.t_dead}", field="t_dead")

    @property
    def Ts(self) -> float:
        return 1.0 / self.fs

    def gain(self, V2: float) -> float:
        """Voltage conversion gain M = n*V2/V1."""
        return self.n * V2 / self.V1


@dataclass(frozen=True)
class ModulationPoint:
    """Strategy, outer shift ``Do`` in [0, 0.5] and inner shift ``Din`` in [0, 1]."""

    S: Strategy
    Do: float
    Din: float

    def __post_init__(self):
        object.__setattr__(self, "S", Strategy.parse(self.S))
        if not 0.0 <= self.Do <= 0.5:
            raise DomainError(f"Do must lie in [0, 0.5], got {self.Do}", field="Do")
        if not 0.0 <= self.Din <= 1.0:
            raise DomainError(f"Din must lie in [0, 1], got {self.Din}", field="Din")

    @property
    def is_sps(self) -> bool:
        return self.Din == 1.0
