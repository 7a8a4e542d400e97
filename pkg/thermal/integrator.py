from typing import Callable

import numpy as np

Derivative = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(fn: Derivative, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of dx/dt = fn(t, x)."""
    k1 = fn(t, x)
    k2 = fn(t + dt / 2, x + dt / 2 * k1)
    k3 = fn(t + dt / 2, x + dt / 2 * k2)
    k4 = fn(t + dt, x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_integrate(fn: Derivative, t0: float, x0: np.ndarray, dt: float, steps: int) -> np.ndarray:
    x = np.array(x0, dtype=float)
    for n in range(steps):
        x = rk4_step(fn, t0 + n * dt, x, dt)
    return x
