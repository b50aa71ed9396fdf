"""Operating conditions for the analog device models."""
from dataclasses import dataclass

TEMP_RANGE_C = (-40.0, 85.0)
VOLT_RANGE_V = (1.20, 1.32)


@dataclass(frozen=True)
class EnvironmentConditions:
    temperature_c: float = 25.0
    voltage_v: float = 1.26

    def __post_init__(self):
        lo, hi = TEMP_RANGE_C
        if not lo <= self.temperature_c <= hi:
            raise ValueError(f"temperature {self.temperature_c} outside [{lo}, {hi}] C")
        lo, hi = VOLT_RANGE_V
        if not lo <= self.voltage_v <= hi:
            raise ValueError(f"voltage {self.voltage_v} outside [{lo}, {hi}] V")


NOMINAL = EnvironmentConditions()
