from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.control import ControllerConfig


class PhaseLabel(str, Enum):
    OVERALL = "overall"
    COOLING = "cooling"
    HEATING = "heating"
    STEADY_STATE = "steady_state"


class OccupancyWindow(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float
    end: float
    heating_setpoint: float = 28.0
    cooling_setpoint: float = 0.0


class Profile(BaseModel):
    """Piecewise-linear signal, held constant outside its first and last points."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    points: List[Tuple[float, float]]

    @model_validator(mode="after")
    def _check_points(self) -> "Profile":
        if not self.points:
            raise ValueError("profile needs at least one point")
        times = [p[0] for p in self.points]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("profile times must be non-decreasing")
        return self

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls(points=[(0.0, value)])

    def value(self, t: float) -> float:
        times = np.array([p[0] for p in self.points])
        values = np.array([p[1] for p in self.points])
        return float(np.interp(t, times, values))


class PhaseInterval(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    label: PhaseLabel
    start: float
    end: float


class ExperimentScenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    duration: float
    occupancy_windows: Dict[str, List[OccupancyWindow]] = Field(default_factory=dict)
    ambient_profile: Profile = Profile.constant(20.0)
    ambient_to_emulate: Optional[Profile] = None
    controller_config: Optional[ControllerConfig] = None
    phase_labels: List[PhaseInterval] = Field(default_factory=list)

    supply_profile: Optional[Profile] = None
    valve_positions: Dict[str, float] = Field(default_factory=dict)
    initial_temperatures: Dict[str, float] = Field(default_factory=dict)
    # Full-scale design values used by the Peltier power law.
    temperature_ratio_kT: Optional[float] = None
    full_scale_setpoints: Dict[str, float] = Field(default_factory=dict)
    output_interval: float = 10.0
    dt: Optional[float] = None
    subsegments: int = 4
    steady_band: float = 0.5
    steady_window: float = 600.0

    @model_validator(mode="after")
    def _check_windows(self) -> "ExperimentScenario":
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if self.output_interval <= 0:
            raise ValueError("output_interval must be > 0")
        if self.subsegments < 1:
            raise ValueError("subsegments must be >= 1")
        for tm_id, windows in self.occupancy_windows.items():
            ordered = sorted(windows, key=lambda w: w.start)
            for window in ordered:
                if window.end <= window.start:
                    raise ValueError(f"{tm_id}: window end must follow start")
                if window.start < 0 or window.end > self.duration:
                    raise ValueError(f"{tm_id}: window [{window.start}, {window.end}] outside duration")
            for first, second in zip(ordered, ordered[1:]):
                if second.start < first.end:
                    raise ValueError(f"{tm_id}: occupancy windows overlap")
        return self

    def supply_temperature(self, t: float, default: float) -> float:
        return self.supply_profile.value(t) if self.supply_profile is not None else default
