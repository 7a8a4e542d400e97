import logging
import math
from typing import Dict, List, Optional, Tuple

from scipy.optimize import minimize_scalar

from hydraulics.flow_solver import solve_flow_split
from models.network import (
    HeatExchanger, NetworkModel, PeltierUnit, PipeSegment, ThermalMass, ValveModel,
)
from models.similitude import (
    LabConstraints, NondimBase, PiGroupSet, ScalingFlag, ScalingRow, ScalingSolution, TemperatureRatio,
)
from models.simulation import SimulationState
from similitude.nondim import compute_pi_groups, heat_rate_group, pi_residuals, time_scale_factor

logger = logging.getLogger("dhn_similitude")

# Relative size below which a required Peltier duty is treated as zero.
PELTIER_EPSILON = 1e-12
REFERENCE_SCHEDULE_HOURS = 48.0
# Absolute tolerance of the bounded length search [m].
LENGTH_TOLERANCE = 1e-9


class _Ratios:
    """Lab/full ratios of the scaling units; every sized value is full value x ratio."""

    def __init__(self, full: NondimBase, lab: NondimBase):
        self.full = full
        self.lab = lab
        self.length = lab.D / full.D
        self.volume = self.length ** 3
        self.flow = lab.mdot_I / full.mdot_I
        self.density = full.rho / lab.rho
        self.pressure = lab.pressure_unit / full.pressure_unit
        self.power = lab.power_unit / full.power_unit
        self.heat_capacity = lab.heat_capacity_unit / full.heat_capacity_unit
        self.k_T = lab.T_s / full.T_s

    def diameter(self, d: float) -> float:
        return self.lab.D if d == self.full.D else d * self.length

    def loss_coefficient(self, k: float) -> float:
        if k == 0.0 or math.isinf(k):
            return k
        return k * self.density

    def k_range(self, k_range: Tuple[float, float]) -> Tuple[float, float]:
        return self.loss_coefficient(k_range[0]), self.loss_coefficient(k_range[1])


def design_state(model: NetworkModel, peltier_powers: Optional[Dict[str, float]] = None) -> Tuple:
    """Design operating point: valves open, fluid at T_s, masses at T_set, design ambient."""
    flow_state = solve_flow_split(model, {valve.id: 1.0 for valve in model.valves})
    T_s = model.plant.supply_temp_Ts
    state = SimulationState(
        t=0.0,
        pipe_temperatures={segment.id: [T_s] for segment in model.segments},
        hx_temperatures={hx.id: T_s for hx in model.heat_exchangers},
        thermal_mass_temperatures={tm.id: tm.setpoint_Tset for tm in model.thermal_masses},
        ambient=model.design_ambient,
        supply_temperature=T_s,
        flow_state=flow_state,
        peltier_powers=dict(peltier_powers or {}),
    )
    return flow_state, state


def design_pi_groups(model: NetworkModel, base: NondimBase,
                     peltier_powers: Optional[Dict[str, float]] = None) -> Dict[str, PiGroupSet]:
    """π groups at the design point, keyed ``segment:<id>`` and ``thermal_mass:<id>``.

    Segment entries carry the segment groups (π1-π3), mass entries the heat
    exchanger and mass groups (π4-π6).
    """
    flow_state, state = design_state(model, peltier_powers)
    groups = {}
    for segment in model.segments:
        groups[f"segment:{segment.id}"] = compute_pi_groups(
            model, flow_state, state, base, segment_id=segment.id,
            thermal_mass_id=model.thermal_masses[0].id)
    for tm in model.thermal_masses:
        groups[f"thermal_mass:{tm.id}"] = compute_pi_groups(
            model, flow_state, state, base, segment_id=model.segments[0].id, thermal_mass_id=tm.id)
    return groups


def _within(value: float, bounds: Optional[Tuple[float, float]]) -> bool:
    return bounds is None or bounds[0] <= value <= bounds[1]


def _segment_mismatch(length: float, ideal_length: float, ideal_hAs: float,
                      hAs_range: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    # π1 goes as 1/l and π2 as hA_s/l, so the best conductance follows the length.
    if ideal_hAs == 0.0:
        return abs(ideal_length / length - 1.0), 0.0
    hAs = ideal_hAs * length / ideal_length
    if hAs_range is not None:
        hAs = min(max(hAs, hAs_range[0]), hAs_range[1])
    volume_mismatch = abs(ideal_length / length - 1.0)
    loss_mismatch = abs(hAs * ideal_length / (ideal_hAs * length) - 1.0)
    return max(volume_mismatch, loss_mismatch), hAs


def fit_segment(ideal_length: float, ideal_hAs: float,
                length_range: Optional[Tuple[float, float]],
                hAs_range: Optional[Tuple[float, float]]) -> Tuple[float, float, float]:
    """Length and conductance inside the hardware ranges with the smallest worst π1/π2 mismatch.

    Returns ``(length, hAs, worst)``. For any length the best conductance is the
    ideal one rescaled to that length and clipped into range, which leaves a
    bounded one-dimensional minimax over the length. A lossless segment stays
    lossless.
    """
    if _within(ideal_length, length_range) and (ideal_hAs == 0.0 or _within(ideal_hAs, hAs_range)):
        return ideal_length, ideal_hAs, 0.0
    low, high = length_range if length_range is not None else (ideal_length, ideal_length)

    def worst(length: float) -> float:
        return _segment_mismatch(length, ideal_length, ideal_hAs, hAs_range)[0]

    candidates = [low, high]
    if high > low:
        result = minimize_scalar(worst, bounds=(low, high), method="bounded",
                                 options={"xatol": LENGTH_TOLERANCE})
        candidates.append(float(result.x))
    # The bounded search never lands exactly on an end point.
    length = min(candidates, key=worst)
    mismatch, hAs = _segment_mismatch(length, ideal_length, ideal_hAs, hAs_range)
    return length, hAs, mismatch


def _scale_segment(segment: PipeSegment, ratios: _Ratios, full_model: NetworkModel,
                   constraints: LabConstraints, lab_cp: float, lab_ambient: float) -> PipeSegment:
    # Loss matching keeps hA_s·(T_s - T_a)/(c_p·ṁ_I·T_s) at equal V/D³.
    full_drive = full_model.plant.supply_temp_Ts - full_model.design_ambient
    lab_drive = ratios.lab.T_s - lab_ambient
    hA_factor = (lab_cp / full_model.fluid.cp) * ratios.flow * ratios.k_T * (full_drive / lab_drive)
    length, hAs, mismatch = fit_segment(segment.length_l * ratios.length, segment.conductive_hAs * hA_factor,
                                        constraints.segment_length_range, constraints.segment_hAs_range)
    if mismatch > 0.0:
        logger.info(f"Segment {segment.id} fitted to lab pipe stock: l = {length:.4g} m, "
                    f"hA_s = {hAs:.4g} W/K, worst pi1/pi2 mismatch {mismatch:.3g}")
    return segment.model_copy(update={
        "length_l": length,
        "diameter_D": ratios.diameter(segment.diameter_D),
        "loss_coeff_k_tot": ratios.loss_coefficient(segment.loss_coeff_k_tot),
        "conductive_hAs": hAs,
    })


def _scale_valve(valve: ValveModel, ratios: _Ratios) -> ValveModel:
    return valve.model_copy(update={
        "user_branch_k_range": ratios.k_range(valve.user_branch_k_range),
        "bypass_branch_k_range": ratios.k_range(valve.bypass_branch_k_range),
    })


class _MassSizing:
    """Sized thermal mass, its heat exchanger and the Peltier duty it needs."""

    def __init__(self, thermal_mass: ThermalMass, heat_exchanger: HeatExchanger, required_power: float):
        self.thermal_mass = thermal_mass
        self.heat_exchanger = heat_exchanger
        self.required_power = required_power


def _size_mass(full_model: NetworkModel, tm: ThermalMass, hx: HeatExchanger, ratios: _Ratios,
               constraints: LabConstraints, lab_ambient: float) -> _MassSizing:
    hardware = constraints.for_mass(tm.id)
    full_Ts = full_model.plant.supply_temp_Ts
    full_drive_in = full_Ts - tm.setpoint_Tset
    Q_in_lab = hx.convective_hAs_HX * full_drive_in * ratios.power

    if hardware.setpoint_Tset is not None and hardware.hx_hAs is not None:
        T_set, hx_hAs = hardware.setpoint_Tset, hardware.hx_hAs
    elif hardware.hx_hAs is not None:
        hx_hAs = hardware.hx_hAs
        T_set = ratios.lab.T_s - Q_in_lab / hx_hAs
    else:
        T_set = hardware.setpoint_Tset if hardware.setpoint_Tset is not None else tm.setpoint_Tset * ratios.k_T
        lab_drive_in = ratios.lab.T_s - T_set
        if hardware.setpoint_Tset is None:
            hx_hAs = hx.convective_hAs_HX * ratios.power / ratios.k_T
        elif lab_drive_in > 0:
            hx_hAs = hx.convective_hAs_HX * ratios.power * (full_drive_in / lab_drive_in)
        else:
            hx_hAs = hx.convective_hAs_HX * ratios.power / ratios.k_T

    # Heat extracted at the design point, emulated against the scaled ambient drop.
    full_drive_out = tm.setpoint_Tset - full_model.design_ambient
    full_pelt = tm.peltier.power_setpoint_Qpelt if tm.peltier else 0.0
    if full_pelt == 0.0 or full_drive_out == 0.0:
        hAs_simulated = tm.hAs_actual * ratios.power / ratios.k_T
    else:
        hAs_simulated = (tm.hAs_actual + full_pelt / full_drive_out) * ratios.power / ratios.k_T
    Q_out_lab = (tm.hAs_actual * full_drive_out + full_pelt) * ratios.power

    hAs_actual = hardware.hAs_actual if hardware.hAs_actual is not None else hAs_simulated
    required = Q_out_lab - hAs_actual * (T_set - lab_ambient)
    if abs(required) <= PELTIER_EPSILON * max(abs(Q_out_lab), 1.0):
        required = 0.0

    peltier = tm.peltier
    if required != 0.0 or hardware.max_power is not None or peltier is not None:
        max_power = hardware.max_power if hardware.max_power is not None else (
            peltier.max_power if peltier else PeltierUnit().max_power)
        applied = min(max(required, 0.0), max_power)
        peltier = (peltier or PeltierUnit()).model_copy(
            update={"max_power": max_power, "power_setpoint_Qpelt": applied})

    volume = hardware.volume if hardware.volume is not None else tm.volume * ratios.volume
    heat_capacity = hardware.heat_capacity_C if hardware.heat_capacity_C is not None else (
        tm.heat_capacity_C * ratios.heat_capacity)

    sized_tm = tm.model_copy(update={
        "heat_capacity_C": heat_capacity,
        "volume": volume,
        "hAs_actual": hAs_actual,
        "hAs_simulated": None if hAs_simulated == hAs_actual and tm.hAs_simulated is None else hAs_simulated,
        "setpoint_Tset": T_set,
        "peltier": peltier,
    })
    sized_hx = hx.model_copy(update={
        "convective_hAs_HX": hx_hAs,
        "loss_coeff_k_HX": ratios.loss_coefficient(hx.loss_coeff_k_HX),
        "volume": hx.volume * ratios.volume,
        "diameter_D": None if hx.diameter_D is None else ratios.diameter(hx.diameter_D),
    })
    return _MassSizing(sized_tm, sized_hx, required)


def scale_model(full_model: NetworkModel, constraints: LabConstraints) -> Tuple[NetworkModel, Dict[str, float]]:
    """Sized lab twin of ``full_model`` plus the Peltier duty each mass requires."""
    full_base = NondimBase.from_model(full_model)
    ratios = _Ratios(full_base, constraints.base)
    lab_cp = constraints.cp if constraints.cp is not None else full_model.fluid.cp
    lab_ambient = constraints.design_ambient if constraints.design_ambient is not None else full_model.design_ambient

    masses = [
        _size_mass(full_model, tm, full_model.hx_for_thermal_mass(tm.id), ratios, constraints, lab_ambient)
        for tm in full_model.thermal_masses
    ]
    sized_hx = {sizing.heat_exchanger.id: sizing.heat_exchanger for sizing in masses}

    full_heater_drive = full_model.plant.supply_temp_Ts - full_model.design_ambient
    lab_heater_drive = ratios.lab.T_s - lab_ambient
    heater = full_model.plant.heater_hAs * ratios.power
    if full_heater_drive != lab_heater_drive and lab_heater_drive != 0.0:
        heater *= full_heater_drive / lab_heater_drive
    plant = full_model.plant.model_copy(update={
        "supply_temp_Ts": ratios.lab.T_s,
        "initial_mass_flow_mdotI": ratios.lab.mdot_I,
        "pump_pressure_rise": constraints.pump_pressure_rise if constraints.pump_pressure_rise is not None
        else full_model.plant.pump_pressure_rise * ratios.pressure,
        "heater_hAs": constraints.heater_hAs if constraints.heater_hAs is not None else heater,
    })

    lab_model = full_model.model_copy(update={
        "fluid": full_model.fluid.model_copy(update={"rho": ratios.lab.rho, "cp": lab_cp}),
        "plant": plant,
        "segments": [_scale_segment(s, ratios, full_model, constraints, lab_cp, lab_ambient)
                     for s in full_model.segments],
        "valves": [_scale_valve(v, ratios) for v in full_model.valves],
        "heat_exchangers": [sized_hx[hx.id] for hx in full_model.heat_exchangers],
        "thermal_masses": [sizing.thermal_mass for sizing in masses],
        "design_ambient": lab_ambient,
        "reference_diameter": None if full_model.reference_diameter is None else ratios.lab.D,
    })
    return lab_model, {sizing.thermal_mass.id: sizing.required_power for sizing in masses}


_SEGMENT_ROWS = [
    ("length_l", "l", "m", "pi1"),
    ("diameter_D", "D", "m", "geometry"),
    ("conductive_hAs", "hA_s", "W/K", "pi2"),
    ("loss_coeff_k_tot", "k_tot", "m^3/kg", "pi3"),
]
_HX_ROWS = [
    ("convective_hAs_HX", "hA_s,HX", "W/K", "pi5"),
    ("loss_coeff_k_HX", "k_HX", "m^3/kg", "pi3"),
    ("volume", "V_HX", "m^3", "geometry"),
]
_MASS_ROWS = [
    ("heat_capacity_C", "C", "J/K", "pi4"),
    ("setpoint_Tset", "T_set", "degC", "pi5"),
    ("hAs_actual", "hA_s,act", "W/K", "pi6"),
    ("effective_hAs_simulated", "hA_s,sim", "W/K", "pi6"),
    ("volume", "V_ThM", "m^3", "geometry"),
]
_PLANT_ROWS = [
    ("supply_temp_Ts", "T_s", "degC", "base"),
    ("initial_mass_flow_mdotI", "mdot_I", "kg/s", "base"),
    ("pump_pressure_rise", "dP_pump", "Pa", "pi3"),
    ("heater_hAs", "hA_s,heater", "W/K", "pi6"),
]


def _group_residual(residuals: Dict[str, Dict[str, float]], key: str, group: str) -> float:
    return residuals.get(key, {}).get(group, 0.0)


def _rows(full_model: NetworkModel, lab_model: NetworkModel, residuals: Dict[str, Dict[str, float]],
          required: Dict[str, float], flags: List[ScalingFlag]) -> List[ScalingRow]:
    rows: List[ScalingRow] = []
    flagged = {flag.component for flag in flags}

    for name, symbol, unit, group in _PLANT_ROWS:
        rows.append(ScalingRow(parameter=name, symbol=symbol, component="plant",
                               full_value=getattr(full_model.plant, name),
                               lab_value=getattr(lab_model.plant, name), unit=unit, group=group))
    for full, lab in zip(full_model.segments, lab_model.segments):
        for name, symbol, unit, group in _SEGMENT_ROWS:
            rows.append(ScalingRow(
                parameter=name, symbol=symbol, component=full.id, full_value=getattr(full, name),
                lab_value=getattr(lab, name), unit=unit, group=group,
                residual=_group_residual(residuals, f"segment:{full.id}", group)))
    for full, lab in zip(full_model.valves, lab_model.valves):
        for branch in ("user", "bypass"):
            full_range = getattr(full, f"{branch}_branch_k_range")
            lab_range = getattr(lab, f"{branch}_branch_k_range")
            for index, bound in enumerate(("k_min", "k_max")):
                rows.append(ScalingRow(
                    parameter=f"{branch}_{bound}", symbol=f"k_{branch},{bound[2:]}", component=full.id,
                    full_value=full_range[index], lab_value=lab_range[index], unit="m^3/kg", group="pi3"))
    for full, lab in zip(full_model.heat_exchangers, lab_model.heat_exchangers):
        for name, symbol, unit, group in _HX_ROWS:
            rows.append(ScalingRow(
                parameter=name, symbol=symbol, component=full.id, full_value=getattr(full, name),
                lab_value=getattr(lab, name), unit=unit, group=group,
                residual=_group_residual(residuals, f"thermal_mass:{full.thermal_mass}", group)))
    for full, lab in zip(full_model.thermal_masses, lab_model.thermal_masses):
        for name, symbol, unit, group in _MASS_ROWS:
            rows.append(ScalingRow(
                parameter=name, symbol=symbol, component=full.id, full_value=getattr(full, name),
                lab_value=getattr(lab, name), unit=unit, group=group,
                residual=_group_residual(residuals, f"thermal_mass:{full.id}", group)))
        full_pelt = full.peltier.power_setpoint_Qpelt if full.peltier else 0.0
        rows.append(ScalingRow(
            parameter="power_setpoint_Qpelt", symbol="Q_pelt", component=full.id, full_value=full_pelt,
            lab_value=required.get(full.id, 0.0), unit="W", group="pi6",
            residual=_group_residual(residuals, f"thermal_mass:{full.id}", "pi6"),
            flag="infeasible" if full.id in flagged else ""))
    return rows


def _feasibility_flags(lab_model: NetworkModel, required: Dict[str, float]) -> List[ScalingFlag]:
    flags = []
    T_s = lab_model.plant.supply_temp_Ts
    for tm in lab_model.thermal_masses:
        if tm.setpoint_Tset >= T_s:
            flags.append(ScalingFlag(component=tm.id, constraint="T_set < T_s",
                                     message=f"setpoint {tm.setpoint_Tset:.4g} degC is not below supply {T_s:.4g} degC"))
        power = required.get(tm.id, 0.0)
        max_power = tm.peltier.max_power if tm.peltier else 0.0
        if power < 0.0:
            flags.append(ScalingFlag(
                component=tm.id, constraint="Q_pelt >= 0",
                message=f"required Peltier power {power:.4g} W would have to heat the thermal mass"))
        elif power > max_power:
            flags.append(ScalingFlag(
                component=tm.id, constraint="Q_pelt <= max_power",
                message=f"required Peltier power {power:.4g} W exceeds max_power {max_power:.4g} W"))
    return flags


def solve_lab_scale(full_model: NetworkModel, constraints: LabConstraints) -> ScalingSolution:
    """Size the lab network so its design-point π groups match the full-scale ones.

    Free parameters are inverted group by group; hardware values fixed by the
    constraints are kept and the resulting mismatch is reported as a residual.
    Segments the lab pipe stock cannot match exactly get the length and
    conductance that minimise their worst π1/π2 residual.
    A Peltier duty outside [0, max_power] is flagged and applied clamped.
    """
    full_base = NondimBase.from_model(full_model)
    lab_base = constraints.base
    lab_model, required = scale_model(full_model, constraints)

    full_groups = design_pi_groups(
        full_model, full_base,
        {tm.id: tm.peltier.power_setpoint_Qpelt for tm in full_model.thermal_masses if tm.peltier})
    lab_groups = design_pi_groups(
        lab_model, lab_base,
        {tm.id: tm.peltier.power_setpoint_Qpelt for tm in lab_model.thermal_masses if tm.peltier})
    residuals_by_component = {key: pi_residuals(full_groups[key], lab_groups[key]) for key in full_groups}

    residuals: Dict[str, float] = {}
    for component_residuals in residuals_by_component.values():
        for group, value in component_residuals.items():
            residuals[group] = max(residuals.get(group, 0.0), value)

    flags = _feasibility_flags(lab_model, required)
    for flag in flags:
        logger.warning(f"Sizing constraint violated for {flag.component}: {flag.message}")

    ratio = time_scale_factor(full_base, lab_base)
    pi_c_full = heat_rate_group(full_model.fluid.cp, full_base)
    pi_c_lab = heat_rate_group(lab_model.fluid.cp, lab_base)
    notes = [
        f"time scale factor t_lab/t_full = {ratio:.5f}: a {REFERENCE_SCHEDULE_HOURS:g} h full-scale "
        f"schedule runs in {REFERENCE_SCHEDULE_HOURS * ratio:.2f} h at lab scale; "
        f"an 18 h lab schedule would need a factor of {18.0 / REFERENCE_SCHEDULE_HOURS:.3f}",
    ]
    pi_c_residual = abs(pi_c_lab - pi_c_full) / pi_c_full
    if pi_c_residual > 1e-9:
        notes.append(
            f"heat-rate group c_p*T_s*rho^2*D^4/mdot_I^2 differs between scales "
            f"(full {pi_c_full:.4g}, lab {pi_c_lab:.4g}, relative {pi_c_residual:.3g}); "
            f"heat exchanger advection is not exactly similar")
    for segment in full_model.segments:
        segment_residuals = residuals_by_component[f"segment:{segment.id}"]
        worst = max(segment_residuals["pi1"], segment_residuals["pi2"])
        if worst > 1e-9:
            notes.append(f"segment {segment.id} is limited by the lab pipe stock: "
                         f"worst pi1/pi2 residual {worst:.3g}")

    logger.info(
        f"Sized lab network: time factor {ratio:.5f}, k_T {lab_base.T_s / full_base.T_s:.4f}, "
        f"max residual {max(residuals.values(), default=0.0):.3e}, {len(flags)} flag(s)")

    return ScalingSolution(
        full_base=full_base,
        lab_base=lab_base,
        rows=_rows(full_model, lab_model, residuals_by_component, required, flags),
        residuals=residuals,
        flags=flags,
        time_scale_factor=ratio,
        temperature_ratio=TemperatureRatio.between(lab_base, full_base),
        heat_rate_group_full=pi_c_full,
        heat_rate_group_lab=pi_c_lab,
        notes=notes,
        lab_model=lab_model,
    )
