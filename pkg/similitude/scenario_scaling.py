import logging
from typing import Dict, Optional

from models.control import ControllerConfig, PidConfig
from models.scenario import ExperimentScenario, OccupancyWindow, PhaseInterval, Profile
from models.similitude import NondimBase
from similitude.nondim import time_scale_factor

logger = logging.getLogger("dhn_similitude")


class ScenarioScaler:
    """Maps a scenario between two nondimensionalization bases at equal t* and T*.

    Times scale with the ratio of time units. Temperatures scale with k_T
    (T* = T/T_s). Thermal-mass temperatures use (T - T_set)/T_s when both
    setpoints of the mass are known.
    """

    def __init__(self, from_base: NondimBase, to_base: NondimBase,
                 from_tset: Optional[Dict[str, float]] = None,
                 to_tset: Optional[Dict[str, float]] = None):
        self.time_factor = time_scale_factor(from_base, to_base)
        self.k_T = to_base.T_s / from_base.T_s
        self.from_tset = dict(from_tset or {})
        self.to_tset = dict(to_tset or {})

    def time(self, t: float) -> float:
        return t * self.time_factor

    def temperature(self, T: float) -> float:
        return T * self.k_T

    def mass_temperature(self, tm_id: str, T: float) -> float:
        if tm_id in self.from_tset and tm_id in self.to_tset:
            return self.to_tset[tm_id] + (T - self.from_tset[tm_id]) * self.k_T
        return self.temperature(T)

    def profile(self, profile: Optional[Profile], scale_values: bool = True) -> Optional[Profile]:
        if profile is None:
            return None
        return Profile(points=[
            (self.time(t), self.temperature(v) if scale_values else v) for t, v in profile.points
        ])

    def window(self, tm_id: str, window: OccupancyWindow) -> OccupancyWindow:
        # Cooling setpoints stay on the plain temperature scale so 0 °C maps to 0 °C.
        return OccupancyWindow(
            start=self.time(window.start),
            end=self.time(window.end),
            heating_setpoint=self.mass_temperature(tm_id, window.heating_setpoint),
            cooling_setpoint=self.temperature(window.cooling_setpoint),
        )

    def pid(self, cfg: PidConfig) -> PidConfig:
        """Gains acting on the rescaled error and time axes give the same valve command."""
        return cfg.model_copy(update={
            "kp": cfg.kp / self.k_T,
            "ki": cfg.ki / (self.k_T * self.time_factor),
            "kd": cfg.kd * self.time_factor / self.k_T,
            "sample_time": self.time(cfg.sample_time),
        })

    def controller(self, config: Optional[ControllerConfig]) -> Optional[ControllerConfig]:
        if config is None:
            return None
        return config.model_copy(update={
            "pid": self.pid(config.pid),
            "per_mass": {tm_id: self.pid(cfg) for tm_id, cfg in config.per_mass.items()},
        })


def scale_scenario(scenario: ExperimentScenario, from_base: NondimBase, to_base: NondimBase,
                   from_tset: Optional[Dict[str, float]] = None,
                   to_tset: Optional[Dict[str, float]] = None,
                   room_ambient: Optional[float] = None) -> ExperimentScenario:
    """Scenario for the ``to_base`` network that is nondimensionally identical to ``scenario``.

    With ``room_ambient`` the target runs at that constant room temperature and
    the source ambient profile (on the target time axis, source temperatures)
    becomes the ambient the Peltier units emulate.
    """
    scaler = ScenarioScaler(from_base, to_base, from_tset, to_tset)

    if room_ambient is not None:
        ambient_profile = Profile.constant(room_ambient)
        to_emulate = scaler.profile(scenario.ambient_to_emulate or scenario.ambient_profile, scale_values=False)
    else:
        ambient_profile = scaler.profile(scenario.ambient_profile)
        to_emulate = scaler.profile(scenario.ambient_to_emulate, scale_values=False)

    scaled = scenario.model_copy(update={
        "duration": scaler.time(scenario.duration),
        "occupancy_windows": {
            tm_id: [scaler.window(tm_id, w) for w in windows]
            for tm_id, windows in scenario.occupancy_windows.items()
        },
        "ambient_profile": ambient_profile,
        "ambient_to_emulate": to_emulate,
        "controller_config": scaler.controller(scenario.controller_config),
        "phase_labels": [
            PhaseInterval(label=p.label, start=scaler.time(p.start), end=scaler.time(p.end))
            for p in scenario.phase_labels
        ],
        "supply_profile": scaler.profile(scenario.supply_profile),
        "initial_temperatures": {
            key: scaler.mass_temperature(key, value) for key, value in scenario.initial_temperatures.items()
        },
        "temperature_ratio_kT": scaler.k_T if to_emulate is not None else scenario.temperature_ratio_kT,
        "full_scale_setpoints": dict(from_tset) if from_tset and to_emulate is not None
        else dict(scenario.full_scale_setpoints),
        "output_interval": scaler.time(scenario.output_interval),
        "dt": None if scenario.dt is None else scaler.time(scenario.dt),
        "steady_band": scenario.steady_band * scaler.k_T,
        "steady_window": scaler.time(scenario.steady_window),
    })
    logger.info(
        f"Scaled scenario: duration {scenario.duration:.6g} s -> {scaled.duration:.6g} s, "
        f"k_T {scaler.k_T:.4f}")
    # Re-run the window checks on the rescaled times.
    return ExperimentScenario.model_validate(scaled.model_dump())
