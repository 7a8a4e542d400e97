import logging
import math
from typing import Dict, List, Optional, Tuple

from models.control import ControllerConfig, PidConfig
from models.network import NetworkModel
from models.scenario import ExperimentScenario, OccupancyWindow, Profile

logger = logging.getLogger("dhn_similitude")

HOUR = 3600.0
CYCLE_HOURS = 24.0
CYCLES = 2

# Occupied (heated) hours within one 24 h cycle.
SMALL_BUILDING_OCCUPANCY: List[Tuple[float, float]] = [(12.0, 24.0)]
LARGE_BUILDING_OCCUPANCY: List[Tuple[float, float]] = [(0.0, 2.75), (13.75, 24.0)]

WINTER_MEAN = -5.0
WINTER_SWING = 3.0
# Coldest hour of the day.
WINTER_MINIMUM_HOUR = 6.0


def winter_ambient(duration_hours: float, time_factor: float = 1.0, step_hours: float = 1.0) -> Profile:
    """Hourly diurnal ambient around -5 °C, coldest at dawn, on a time axis scaled by ``time_factor``."""
    points = []
    steps = int(math.ceil(duration_hours / step_hours))
    for i in range(steps + 1):
        hour = min(i * step_hours, duration_hours)
        value = WINTER_MEAN - WINTER_SWING * math.cos(2.0 * math.pi * (hour - WINTER_MINIMUM_HOUR) / 24.0)
        points.append((hour * HOUR * time_factor, value))
    return Profile(points=points)


def _windows(daily: List[Tuple[float, float]], time_factor: float, heating_setpoint: float,
             cooling_setpoint: float) -> List[OccupancyWindow]:
    spans: List[Tuple[float, float]] = []
    for cycle in range(CYCLES):
        for start, end in daily:
            span = ((start + cycle * CYCLE_HOURS) * HOUR * time_factor, (end + cycle * CYCLE_HOURS) * HOUR * time_factor)
            if spans and math.isclose(spans[-1][1], span[0]):
                spans[-1] = (spans[-1][0], span[1])
            else:
                spans.append(span)
    return [
        OccupancyWindow(start=start, end=end, heating_setpoint=heating_setpoint, cooling_setpoint=cooling_setpoint)
        for start, end in spans
    ]


def two_day_occupancy_scenario(model: NetworkModel, time_factor: float = 1.0,
                              heating_setpoints: Optional[Dict[str, float]] = None,
                              cooling_setpoint: float = 0.0,
                              output_interval: float = 60.0,
                              pid: Optional[PidConfig] = None) -> ExperimentScenario:
    """Two-day occupancy experiment for a two-building network.

    The first thermal mass (a small building) cools for 12 h and is heated for
    12 h. The second (a large building) stays heated for 2 h 45 min, cools for
    11 h and is reheated for the rest of the day. The cycle repeats twice. Every
    further mass follows the small-building schedule. Both masses start at their
    heating setpoint; the ambient is a winter day. All times are multiplied by
    ``time_factor``.
    """
    duration = CYCLES * CYCLE_HOURS * HOUR * time_factor
    setpoints = {tm.id: tm.setpoint_Tset for tm in model.thermal_masses}
    setpoints.update(heating_setpoints or {})

    windows: Dict[str, List[OccupancyWindow]] = {}
    for index, tm in enumerate(model.thermal_masses):
        daily = LARGE_BUILDING_OCCUPANCY if index == 1 else SMALL_BUILDING_OCCUPANCY
        windows[tm.id] = _windows(daily, time_factor, setpoints[tm.id], cooling_setpoint)

    pid = pid or PidConfig()
    logger.info(f"Built two-day validation scenario: duration {duration / HOUR:.2f} h, "
                f"{len(windows)} scheduled thermal mass(es)")
    return ExperimentScenario(
        duration=duration,
        occupancy_windows=windows,
        ambient_profile=winter_ambient(CYCLES * CYCLE_HOURS, time_factor),
        controller_config=ControllerConfig(pid=pid),
        initial_temperatures=dict(setpoints),
        output_interval=output_interval,
    )
