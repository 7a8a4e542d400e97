"""Unit audit of the nondimensional groups using pint quantities.

The pressure-loss coefficient k in ΔP = k·(ṁ/A_c)² carries units of m³/kg
(it is ζ/(2ρ) in velocity-head form), so k·ρ is the dimensionless number that
has to match between scales.
"""
import logging
from typing import Dict

import pint

from models.errors import DomainError

logger = logging.getLogger("dhn_similitude")

ureg = pint.UnitRegistry()
Q_ = ureg.Quantity


def _symbols() -> Dict[str, pint.Quantity]:
    return {
        "rho": Q_(1.0, "kg/m**3"),
        "cp": Q_(1.0, "J/(kg*K)"),
        "D": Q_(1.0, "m"),
        "mdot_I": Q_(1.0, "kg/s"),
        "mdot": Q_(1.0, "kg/s"),
        "T_s": Q_(1.0, "K"),
        "T": Q_(1.0, "K"),
        "t": Q_(1.0, "s"),
        "V": Q_(1.0, "m**3"),
        "hA": Q_(1.0, "W/K"),
        "dP": Q_(1.0, "Pa"),
        "C": Q_(1.0, "J/K"),
        "Q": Q_(1.0, "W"),
        "k": Q_(1.0, "m**3/kg"),
        "Ac": Q_(1.0, "m**2"),
    }


def group_expressions() -> Dict[str, pint.Quantity]:
    s = _symbols()
    return {
        "t_star": s["t"] * s["mdot_I"] / (s["rho"] * s["D"] ** 3),
        "T_star": s["T"] / s["T_s"],
        "pi1": (s["mdot"] / (s["rho"] * s["V"])) * (s["D"] ** 3 * s["rho"] / s["mdot_I"]),
        "pi2": (s["hA"] / (s["rho"] * s["cp"] * s["V"])) * s["T"] * (s["D"] ** 3 * s["rho"] / (s["mdot_I"] * s["T_s"])),
        "pi3": s["dP"] * s["rho"] * s["D"] ** 4 / s["mdot_I"] ** 2,
        "pi4": s["C"] * s["rho"] * s["T_s"] * s["D"] / s["mdot_I"] ** 2,
        "pi5": s["Q"] * s["rho"] ** 2 * s["D"] ** 4 / s["mdot_I"] ** 3,
        "pi6": s["Q"] * s["rho"] ** 2 * s["D"] ** 4 / s["mdot_I"] ** 3,
        "heat_rate_group": s["cp"] * s["T_s"] * s["rho"] ** 2 * s["D"] ** 4 / s["mdot_I"] ** 2,
        "k_rho": s["k"] * s["rho"],
        "pressure_law": s["k"] * (s["mdot"] / s["Ac"]) ** 2 / s["dP"],
    }


def audit_groups() -> Dict[str, str]:
    """Dimensionality of every group after reduction to base units."""
    return {name: str(expr.to_base_units().dimensionality) for name, expr in group_expressions().items()}


def assert_dimensionless() -> None:
    for name, expr in group_expressions().items():
        if not expr.to_base_units().dimensionless:
            raise DomainError(f"group {name} is not dimensionless: {expr.to_base_units().dimensionality}")
    logger.debug("Unit audit passed for all nondimensional groups")
