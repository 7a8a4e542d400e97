import logging
from typing import Dict, Optional

from models.flow_state import FlowState
from models.network import NetworkModel
from models.similitude import NondimBase, PiGroupSet
from models.simulation import SimulationState

logger = logging.getLogger("dhn_similitude")


def nondim_time(t: float, base: NondimBase) -> float:
    """t* = t·ṁ_I/(ρD³)."""
    return t * base.mdot_I / (base.rho * base.D ** 3)


def dim_time(t_star: float, base: NondimBase) -> float:
    return t_star * base.rho * base.D ** 3 / base.mdot_I


def time_scale_factor(from_base: NondimBase, to_base: NondimBase) -> float:
    """Seconds in the target system per second in the source system at equal t*."""
    return to_base.time_unit / from_base.time_unit


def nondim_temperature(T: float, base: NondimBase) -> float:
    return T / base.T_s


def nondim_thermal_mass_temp(T_ThM: float, T_set: float, base: NondimBase) -> float:
    return (T_ThM - T_set) / base.T_s


def heat_rate_group(cp: float, base: NondimBase) -> float:
    """c_p·T_s·ρ²D⁴/ṁ_I²: couples the advected enthalpy to the π-scaled heat rates."""
    return cp * base.T_s * base.rho ** 2 * base.D ** 4 / base.mdot_I ** 2


def compute_pi_groups(model: NetworkModel, flow_state: FlowState, state: SimulationState,
                      base: NondimBase, segment_id: Optional[str] = None,
                      thermal_mass_id: Optional[str] = None, strict: bool = False,
                      audit: bool = False) -> PiGroupSet:
    """Evaluate t*, the nondimensional temperatures and π1..π6 at one state.

    π1-π3 describe ``segment_id`` (default: first segment), π4-π6 and the HX/mass
    temperatures describe ``thermal_mass_id`` (default: first thermal mass) and its
    heat exchanger. By default the flow in π3-π6 is the design flow ṁ_I; ``strict``
    uses the local segment or heat exchanger flow instead.
    """
    if audit:
        from similitude.units import assert_dimensionless

        assert_dimensionless()

    rho, D, mdot_I, T_s = base.rho, base.D, base.mdot_I, base.T_s
    cp = model.fluid.cp
    segment = model.segment(segment_id) if segment_id else model.segments[0]
    tm = model.thermal_mass(thermal_mass_id) if thermal_mass_id else model.thermal_masses[0]
    hx = model.hx_for_thermal_mass(tm.id)

    mdot = flow_state.segment_flows[segment.id]
    T_p = state.pipe_bulk_temperature(segment.id)
    T_HX = state.hx_temperatures[hx.id]
    T_ThM = state.thermal_mass_temperatures[tm.id]
    T_a = state.ambient
    Q_pelt = state.peltier_powers.get(tm.id, 0.0)
    V = segment.volume_V

    mdot_pressure = mdot if strict else mdot_I
    mdot_heat = flow_state.hx_flows[hx.id] if strict else mdot_I

    def ratio(numerator: float, flow: float, power: int) -> float:
        return numerator / flow ** power if flow > 0 else float("inf")

    Q_in = hx.convective_hAs_HX * (T_HX - T_ThM)
    Q_out = tm.hAs_actual * (T_ThM - T_a) + Q_pelt

    return PiGroupSet(
        t_star=nondim_time(state.t, base),
        T_p_star=nondim_temperature(T_p, base),
        T_HX_star=nondim_temperature(T_HX, base),
        T_ThM_star=nondim_thermal_mass_temp(T_ThM, tm.setpoint_Tset, base),
        pi1=(mdot / (rho * V)) * (D ** 3 * rho / mdot_I),
        pi2=(segment.conductive_hAs / (rho * cp * V)) * (T_p - T_a) * (D ** 3 * rho / (mdot_I * T_s)),
        pi3=ratio(flow_state.segment_pressure_drops[segment.id] * rho * D ** 4, mdot_pressure, 2),
        pi4=ratio(tm.heat_capacity_C * rho * T_s * D, mdot_heat, 2),
        pi5=ratio(Q_in * rho ** 2 * D ** 4, mdot_heat, 3),
        pi6=ratio(Q_out * rho ** 2 * D ** 4, mdot_heat, 3),
    )


def pi_residuals(reference: PiGroupSet, candidate: PiGroupSet) -> Dict[str, float]:
    """Relative difference per group; groups that are zero on both sides give 0."""
    residuals = {}
    for name, ref in reference.as_dict().items():
        value = getattr(candidate, name)
        if ref == value:
            residuals[name] = 0.0
        elif ref == 0.0:
            residuals[name] = abs(value)
        else:
            residuals[name] = abs(value - ref) / abs(ref)
    return residuals
