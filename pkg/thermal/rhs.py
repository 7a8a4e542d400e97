"""Scalar energy balances of the lumped volumes.

These are the reference definitions; ``thermal.assembly`` builds the same terms
into a linear operator for the whole network.
"""
from models.network import FluidProperties, HeatExchanger, PipeSegment, ThermalMass


def pipe_temp_rhs(segment: PipeSegment, T_p: float, T_p_in: float, T_a: float,
                  mdot: float, fluid: FluidProperties) -> float:
    rho_V = fluid.rho * segment.volume_V
    advection = mdot / rho_V * (T_p_in - T_p)
    loss = segment.conductive_hAs / (rho_V * fluid.cp) * (T_p - T_a)
    return advection - loss


def hx_temp_rhs(hx: HeatExchanger, T_HX: float, T_HX_in: float, T_ThM: float,
                mdot_HX: float, fluid: FluidProperties) -> float:
    rho_V = fluid.rho * hx.volume
    advection = mdot_HX / rho_V * (T_HX_in - T_HX)
    transfer = hx.convective_hAs_HX / (rho_V * fluid.cp) * (T_HX - T_ThM)
    return advection - transfer


def heat_into_thermal_mass(hAs_HX: float, T_HX: float, T_ThM: float) -> float:
    return hAs_HX * (T_HX - T_ThM)


def heat_out_of_thermal_mass(tm: ThermalMass, T_ThM: float, T_a: float, Q_pelt: float = 0.0) -> float:
    return tm.hAs_actual * (T_ThM - T_a) + Q_pelt


def thermal_mass_rhs(tm: ThermalMass, T_ThM: float, T_HX: float, T_a: float,
                     Q_pelt: float, hAs_HX: float) -> float:
    Q_in = heat_into_thermal_mass(hAs_HX, T_HX, T_ThM)
    Q_out = heat_out_of_thermal_mass(tm, T_ThM, T_a, Q_pelt)
    return (Q_in - Q_out) / tm.heat_capacity_C
