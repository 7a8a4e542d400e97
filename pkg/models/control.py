from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, model_validator


class PidConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kp: float = 1.0
    ki: float = 3.0e-4
    kd: float = 0.0
    sample_time: float = 10.0
    u_min: float = 0.0
    u_max: float = 1.0
    anti_windup: bool = True

    @model_validator(mode="after")
    def _check_limits(self) -> "PidConfig":
        if self.sample_time <= 0:
            raise ValueError("sample_time must be > 0")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be < u_max")
        return self


class PidState(BaseModel):
    model_config = ConfigDict(frozen=True)

    integral: float = 0.0
    previous_error: Optional[float] = None
    output: float = 0.0


class ControllerConfig(BaseModel):
    """Controller section of a scenario: shared gains plus per-mass overrides."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    pid: PidConfig = PidConfig()
    per_mass: Dict[str, PidConfig] = {}
    autotune: bool = False

    def for_mass(self, tm_id: str) -> PidConfig:
        return self.per_mass.get(tm_id, self.pid)


class Controls(BaseModel):
    """Actuator commands held constant until the next controller update."""

    model_config = ConfigDict(frozen=True)

    valve_positions: Dict[str, float] = {}
    peltier_setpoints: Dict[str, float] = {}
    setpoints: Dict[str, float] = {}
    supply_temperature: Optional[float] = None
    mdot_I: Optional[float] = None
