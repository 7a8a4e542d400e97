from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.network import NetworkModel


class NondimBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rho: float
    mdot_I: float
    T_s: float
    D: float

    @model_validator(mode="after")
    def _check_positive(self) -> "NondimBase":
        for name in ("rho", "mdot_I", "T_s", "D"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        return self

    @classmethod
    def from_model(cls, model: NetworkModel) -> "NondimBase":
        return cls(
            rho=model.fluid.rho,
            mdot_I=model.plant.initial_mass_flow_mdotI,
            T_s=model.plant.supply_temp_Ts,
            D=model.base_diameter,
        )

    @property
    def time_unit(self) -> float:
        """Seconds per unit of nondimensional time."""
        return self.rho * self.D ** 3 / self.mdot_I

    @property
    def pressure_unit(self) -> float:
        return self.mdot_I ** 2 / (self.rho * self.D ** 4)

    @property
    def power_unit(self) -> float:
        return self.mdot_I ** 3 / (self.rho ** 2 * self.D ** 4)

    @property
    def heat_capacity_unit(self) -> float:
        return self.mdot_I ** 2 / (self.rho * self.T_s * self.D)


class PiGroupSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_star: float
    T_p_star: float
    T_HX_star: float
    T_ThM_star: float
    pi1: float
    pi2: float
    pi3: float
    pi4: float
    pi5: float
    pi6: float

    def as_dict(self) -> Dict[str, float]:
        return self.model_dump()


class TemperatureRatio(BaseModel):
    model_config = ConfigDict(frozen=True)

    k_T: float

    @model_validator(mode="after")
    def _check_positive(self) -> "TemperatureRatio":
        if self.k_T <= 0:
            raise ValueError("k_T must be > 0")
        return self

    @classmethod
    def between(cls, lab: NondimBase, full: NondimBase) -> "TemperatureRatio":
        return cls(k_T=lab.T_s / full.T_s)


class ThermalMassConstraint(BaseModel):
    """Hardware facts of one lab thermal mass; None leaves the value to the sizing."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    setpoint_Tset: Optional[float] = None
    heat_capacity_C: Optional[float] = None
    hAs_actual: Optional[float] = None
    hx_hAs: Optional[float] = None
    max_power: Optional[float] = None
    volume: Optional[float] = None


class LabConstraints(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    base: NondimBase
    cp: Optional[float] = None
    design_ambient: Optional[float] = None
    pump_pressure_rise: Optional[float] = None
    heater_hAs: Optional[float] = None
    # Hardware ranges [low, high] of the lab pipe stock.
    segment_length_range: Optional[Tuple[float, float]] = None
    segment_hAs_range: Optional[Tuple[float, float]] = None
    defaults: ThermalMassConstraint = ThermalMassConstraint()
    thermal_masses: Dict[str, ThermalMassConstraint] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_ranges(self) -> "LabConstraints":
        for name in ("segment_length_range", "segment_hAs_range"):
            bounds = getattr(self, name)
            if bounds is not None and not 0.0 < bounds[0] <= bounds[1]:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        return self

    def for_mass(self, tm_id: str) -> ThermalMassConstraint:
        specific = self.thermal_masses.get(tm_id)
        if specific is None:
            return self.defaults
        merged = self.defaults.model_dump()
        merged.update({k: v for k, v in specific.model_dump().items() if v is not None})
        return ThermalMassConstraint(**merged)


class ScalingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    parameter: str
    symbol: str
    component: str
    full_value: float
    lab_value: float
    unit: str
    group: str
    residual: float = 0.0
    flag: str = ""


class ScalingFlag(BaseModel):
    model_config = ConfigDict(frozen=True)

    component: str
    constraint: str
    message: str


class ScalingSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    full_base: NondimBase
    lab_base: NondimBase
    rows: List[ScalingRow] = Field(default_factory=list)
    residuals: Dict[str, float] = Field(default_factory=dict)
    flags: List[ScalingFlag] = Field(default_factory=list)
    time_scale_factor: float
    temperature_ratio: TemperatureRatio
    heat_rate_group_full: float
    heat_rate_group_lab: float
    notes: List[str] = Field(default_factory=list)
    lab_model: Optional[NetworkModel] = None

    @property
    def feasible(self) -> bool:
        return not self.flags

    def value(self, component: str, parameter: str) -> float:
        for row in self.rows:
            if row.component == component and row.parameter == parameter:
                return row.lab_value
        raise KeyError(f"{component}.{parameter}")
