import math
from dataclasses import dataclass
from typing import Sequence, Tuple

from models.errors import DomainError, InfeasibleConfigurationError
from models.network import ValveModel


def segment_pressure_drop(k_tot: float, mdot: float, Ac: float) -> float:
    """Quadratic pressure loss ΔP = k·(ṁ/A_c)² of one pipe segment [Pa]."""
    if Ac <= 0:
        raise DomainError(f"cross-section must be > 0, got {Ac}")
    if k_tot < 0:
        raise DomainError(f"loss coefficient must be >= 0, got {k_tot}")
    if mdot < 0:
        raise DomainError(f"mass flow must be >= 0, got {mdot}")
    if mdot == 0.0:
        return 0.0
    return k_tot * (mdot / Ac) ** 2


def series_coefficient(elements: Sequence[Tuple[float, float]]) -> float:
    """Sum of k/A_c² over series elements given as (k, A_c) pairs, so ΔP = K·ṁ²."""
    total = 0.0
    for k, Ac in elements:
        if Ac <= 0:
            raise DomainError(f"cross-section must be > 0, got {Ac}")
        total += k / Ac ** 2
    return total


def _capacity(K: float) -> float:
    if math.isinf(K):
        return 0.0
    if K == 0.0:
        return math.inf
    return 1.0 / math.sqrt(K)


def split_parallel(K_user: float, K_bypass: float, mdot: float) -> Tuple[float, float]:
    """Flows through two parallel quadratic branches with equal pressure drop.

    A closed branch (K = inf) carries exactly zero flow.
    """
    c_user = _capacity(K_user)
    c_bypass = _capacity(K_bypass)
    if c_user == 0.0 and c_bypass == 0.0:
        raise InfeasibleConfigurationError("both user and bypass branches are closed")
    if c_bypass == 0.0:
        return mdot, 0.0
    if c_user == 0.0:
        return 0.0, mdot
    if math.isinf(c_user) and math.isinf(c_bypass):
        return mdot / 2.0, mdot / 2.0
    if math.isinf(c_user):
        return mdot, 0.0
    if math.isinf(c_bypass):
        return 0.0, mdot
    user = mdot * c_user / (c_user + c_bypass)
    return user, max(mdot - user, 0.0)


def parallel_coefficient(K_user: float, K_bypass: float) -> float:
    c_user = _capacity(K_user)
    c_bypass = _capacity(K_bypass)
    if c_user == 0.0 and c_bypass == 0.0:
        raise InfeasibleConfigurationError("both user and bypass branches are closed")
    return 1.0 / (c_user + c_bypass) ** 2


@dataclass(frozen=True)
class LoopHydraulics:
    """Quadratic coefficients of one user loop; every K is in Pa/(kg/s)²."""

    valve: ValveModel
    valve_area: float
    K_series: float
    K_user_fixed: float
    K_bypass_fixed: float

    def branch_coefficients(self, valve_position: float) -> Tuple[float, float]:
        k_user, k_bypass = self.valve.branch_coefficients(valve_position)
        scale = 1.0 / self.valve_area ** 2
        return self.K_user_fixed + k_user * scale, self.K_bypass_fixed + k_bypass * scale

    def effective_coefficient(self, valve_position: float) -> float:
        K_user, K_bypass = self.branch_coefficients(valve_position)
        return self.K_series + parallel_coefficient(K_user, K_bypass)


def loop_pressure_loss(loop: LoopHydraulics, mdot_loop: float, valve_position: float) -> float:
    """Pressure loss across a loop with its user/bypass split balanced internally [Pa]."""
    if not 0.0 <= valve_position <= 1.0:
        raise DomainError(f"valve position must be in [0, 1], got {valve_position}")
    if mdot_loop < 0:
        raise DomainError(f"mass flow must be >= 0, got {mdot_loop}")
    K_user, K_bypass = loop.branch_coefficients(valve_position)
    K_parallel = parallel_coefficient(K_user, K_bypass)
    if mdot_loop == 0.0:
        return 0.0
    return (loop.K_series + K_parallel) * mdot_loop ** 2
