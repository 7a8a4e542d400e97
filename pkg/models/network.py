import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from models.errors import DomainError


class ValveCharacteristic(str, Enum):
    LINEAR = "linear"
    EQUAL_PERCENTAGE = "equal_percentage"


class FluidProperties(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rho: float
    cp: float


class PipeSegment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    length_l: float
    diameter_D: float
    loss_coeff_k_tot: float
    conductive_hAs: float
    upstream_node: str
    downstream_node: str

    @property
    def cross_section_Ac(self) -> float:
        return math.pi * self.diameter_D ** 2 / 4.0

    @property
    def volume_V(self) -> float:
        return math.pi / 4.0 * self.diameter_D ** 2 * self.length_l


class SupplyPlant(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    supply_temp_Ts: float
    initial_mass_flow_mdotI: float
    pump_pressure_rise: float
    heater_hAs: float = 0.0
    outlet_node: str = "plant_out"
    inlet_node: str = "plant_in"


class HeatExchanger(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    convective_hAs_HX: float
    loss_coeff_k_HX: float
    volume: float
    upstream_node: str
    downstream_node: str
    thermal_mass: str
    # Flow cross-section used for the HX pressure drop; defaults to the reference pipe.
    diameter_D: Optional[float] = None


class PeltierUnit(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_power: float = 50.0
    power_setpoint_Qpelt: float = 0.0
    # 0 means the built-in controller tracks the setpoint instantaneously.
    tracking_time_constant: float = 0.0


class ThermalMass(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    heat_capacity_C: float
    volume: float
    hAs_actual: float
    hAs_simulated: Optional[float] = None
    setpoint_Tset: float
    peltier: Optional[PeltierUnit] = None

    @property
    def effective_hAs_simulated(self) -> float:
        return self.hAs_simulated if self.hAs_simulated is not None else self.hAs_actual


class ValveModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    split_node: str
    merge_node: str
    user_branch_k_range: Tuple[float, float]
    bypass_branch_k_range: Tuple[float, float]
    characteristic: ValveCharacteristic = ValveCharacteristic.LINEAR

    @staticmethod
    def _coefficient(position: float, k_range: Tuple[float, float],
                     characteristic: ValveCharacteristic) -> float:
        k_min, k_max = k_range
        if k_max == 0.0:
            return 0.0
        c_max = 1.0 / math.sqrt(k_min) if k_min > 0 else math.inf
        c_min = 0.0 if math.isinf(k_max) else 1.0 / math.sqrt(k_max)
        u = min(max(position, 0.0), 1.0)
        if characteristic == ValveCharacteristic.EQUAL_PERCENTAGE:
            if c_min == 0.0 or math.isinf(c_max):
                raise DomainError("equal_percentage characteristic needs 0 < k_min <= k_max < inf")
            rangeability = c_max / c_min
            capacity = c_max * rangeability ** (u - 1.0)
        elif math.isinf(c_max):
            capacity = math.inf if u > 0.0 else c_min
        else:
            capacity = c_min + u * (c_max - c_min)
        if capacity <= 0.0:
            return math.inf
        return 1.0 / capacity ** 2

    def branch_coefficients(self, position: float) -> Tuple[float, float]:
        """Valve loss coefficients (k_user, k_bypass) at stem position u."""
        k_user = self._coefficient(position, self.user_branch_k_range, self.characteristic)
        k_bypass = self._coefficient(1.0 - position, self.bypass_branch_k_range, self.characteristic)
        return k_user, k_bypass


class NetworkModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    fluid: FluidProperties
    plant: SupplyPlant
    segments: List[PipeSegment] = Field(default_factory=list)
    valves: List[ValveModel] = Field(default_factory=list)
    heat_exchangers: List[HeatExchanger] = Field(default_factory=list)
    thermal_masses: List[ThermalMass] = Field(default_factory=list)
    design_ambient: float = 20.0
    reference_diameter: Optional[float] = None

    @property
    def base_diameter(self) -> float:
        if self.reference_diameter is not None:
            return self.reference_diameter
        return self.segments[0].diameter_D

    def segment(self, segment_id: str) -> PipeSegment:
        return self._index(self.segments)[segment_id]

    def heat_exchanger(self, hx_id: str) -> HeatExchanger:
        return self._index(self.heat_exchangers)[hx_id]

    def thermal_mass(self, tm_id: str) -> ThermalMass:
        return self._index(self.thermal_masses)[tm_id]

    def valve(self, valve_id: str) -> ValveModel:
        return self._index(self.valves)[valve_id]

    def hx_for_thermal_mass(self, tm_id: str) -> HeatExchanger:
        for hx in self.heat_exchangers:
            if hx.thermal_mass == tm_id:
                return hx
        raise KeyError(tm_id)

    def hx_diameter(self, hx: HeatExchanger) -> float:
        return hx.diameter_D if hx.diameter_D is not None else self.base_diameter

    @staticmethod
    def _index(items) -> Dict[str, object]:
        return {item.id: item for item in items}
