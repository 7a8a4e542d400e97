import logging
import math
from typing import Dict, Optional

from models.network import PeltierUnit

logger = logging.getLogger("dhn_similitude")


def peltier_tracking_step(unit: PeltierUnit, power_setpoint: float, dt: float,
                          applied: Optional[float] = None, log_clamp: bool = True) -> float:
    """Power the junction's built-in controller delivers after dt seconds [W].

    The target is the setpoint clamped to [0, max_power]; with a zero tracking
    time constant it is reached immediately, otherwise first-order.
    """
    target = min(max(power_setpoint, 0.0), unit.max_power)
    if target != power_setpoint and log_clamp:
        logger.warning(
            f"Peltier setpoint {power_setpoint:.2f} W clamped to {target:.2f} W (max {unit.max_power:.2f} W)"
        )
    current = unit.power_setpoint_Qpelt if applied is None else applied
    tau = unit.tracking_time_constant
    if tau <= 0.0:
        return target
    return current + (target - current) * (1.0 - math.exp(-dt / tau))


class PeltierTracker:
    """Holds the applied power of every junction; logs only when a unit enters saturation."""

    def __init__(self, units: Dict[str, PeltierUnit]):
        self.units = units
        self.applied: Dict[str, float] = {}
        self.saturated: Dict[str, bool] = {}
        self.reset()

    def reset(self) -> None:
        self.applied = {tm_id: unit.power_setpoint_Qpelt for tm_id, unit in self.units.items()}
        self.saturated = {tm_id: False for tm_id in self.units}

    def step(self, setpoints: Dict[str, float], dt: float) -> Dict[str, float]:
        for tm_id, unit in self.units.items():
            command = setpoints.get(tm_id, 0.0)
            clamped = not 0.0 <= command <= unit.max_power
            self.applied[tm_id] = peltier_tracking_step(
                unit, command, dt, self.applied[tm_id], log_clamp=clamped and not self.saturated[tm_id]
            )
            self.saturated[tm_id] = clamped
        return dict(self.applied)
