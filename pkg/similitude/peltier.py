import logging
from typing import Union

from models.errors import DomainError
from models.network import ThermalMass
from models.scenario import ExperimentScenario
from models.similitude import TemperatureRatio

logger = logging.getLogger("dhn_similitude")


def simulated_ambient(T_ThM: float, T_a_lab: float, Q_pelt: float,
                      hAs_act: float, hAs_sim: float) -> float:
    """Ambient temperature the thermal mass effectively sees with the Peltier running [°C].

    Defined by hAs_sim·(T_ThM − T_a_sim) = hAs_act·(T_ThM − T_a_lab) + Q_pelt.
    """
    if hAs_sim <= 0:
        raise DomainError(f"hAs_sim must be > 0, got {hAs_sim}")
    return -(hAs_act / hAs_sim) * (T_ThM - T_a_lab) - Q_pelt / hAs_sim + T_ThM


def full_scale_setpoint(scenario: ExperimentScenario, tm: ThermalMass, k_T: float) -> float:
    return scenario.full_scale_setpoints.get(tm.id, tm.setpoint_Tset / k_T)


def raw_power_setpoint(scenario: ExperimentScenario, T_a_full: float, T_a_lab: float,
                       tm: ThermalMass, k_T: Union[float, TemperatureRatio]) -> float:
    ratio = k_T.k_T if isinstance(k_T, TemperatureRatio) else float(k_T)
    T_set_full = full_scale_setpoint(scenario, tm, ratio)
    lab_term = tm.hAs_actual * (T_a_lab - tm.setpoint_Tset)
    full_term = tm.effective_hAs_simulated * ratio * (T_a_full - T_set_full)
    return lab_term - full_term


def peltier_power_setpoint(scenario: ExperimentScenario, T_a_full: float, T_a_lab: float,
                           tm: ThermalMass, k_T: Union[float, TemperatureRatio]) -> float:
    """Peltier power that makes the lab mass lose heat like the full-scale building [W].

    With hAs_simulated equal to hAs_actual this is the plain law
    hAs·((T_a − T_set)_lab − k_T·(T_a − T_set)_full). The result is clamped to
    [0, max_power].
    """
    raw = raw_power_setpoint(scenario, T_a_full, T_a_lab, tm, k_T)
    max_power = tm.peltier.max_power if tm.peltier is not None else 0.0
    if raw < 0.0:
        logger.warning(f"Peltier {tm.id}: setpoint {raw:.2f} W below 0 W, clamped")
        return 0.0
    if raw > max_power:
        logger.warning(f"Peltier {tm.id}: setpoint {raw:.2f} W above max {max_power:.2f} W, clamped")
        return max_power
    return raw
