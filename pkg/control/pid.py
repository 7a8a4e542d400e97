from typing import Tuple

from models.control import PidConfig, PidState


def _clamp(value: float, low: float, high: float) -> float:
    return min(max(value, low), high)


def pid_step(cfg: PidConfig, state: PidState, setpoint: float, measurement: float,
             dt: float) -> Tuple[float, PidState]:
    """Positional PID update with output clamping and conditional integration."""
    error = setpoint - measurement
    derivative = 0.0 if state.previous_error is None else (error - state.previous_error) / dt
    integral = state.integral + error * dt
    raw = cfg.kp * error + cfg.ki * integral + cfg.kd * derivative

    if cfg.anti_windup:
        # Freeze the integrator while saturated and the error pushes further out.
        if (raw > cfg.u_max and error > 0) or (raw < cfg.u_min and error < 0):
            integral = state.integral
            raw = cfg.kp * error + cfg.ki * integral + cfg.kd * derivative

    output = _clamp(raw, cfg.u_min, cfg.u_max)
    return output, PidState(integral=integral, previous_error=error, output=output)
