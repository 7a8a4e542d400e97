import logging
import math
from collections import Counter
from typing import List

import networkx as nx

from models.errors import DhnError, TopologyError
from models.network import NetworkModel, ValveCharacteristic
from models.validation import Severity, ValidationReport, Violation
from network.topology import build_graph, edge_paths, extract_layout

logger = logging.getLogger("dhn_similitude")


def _check(violations: List[Violation], ok: bool, rule: str, component: str, message: str = "") -> None:
    if not ok:
        violations.append(Violation(rule=rule, component=component, message=message or f"{component}: {rule}"))


def _component_checks(model: NetworkModel, violations: List[Violation]) -> None:
    _check(violations, model.fluid.rho > 0, "rho > 0", "fluid")
    _check(violations, model.fluid.cp > 0, "cp > 0", "fluid")

    plant = model.plant
    _check(violations, plant.initial_mass_flow_mdotI > 0, "initial_mass_flow_mdotI > 0", "plant")
    _check(violations, plant.pump_pressure_rise >= 0, "pump_pressure_rise >= 0", "plant")
    _check(violations, plant.heater_hAs >= 0, "heater_hAs >= 0", "plant")
    if model.reference_diameter is not None:
        _check(violations, model.reference_diameter > 0, "reference_diameter > 0", "network")

    for seg in model.segments:
        _check(violations, seg.length_l > 0, "length_l > 0", seg.id)
        _check(violations, seg.diameter_D > 0, "diameter_D > 0", seg.id)
        _check(violations, math.isfinite(seg.loss_coeff_k_tot) and seg.loss_coeff_k_tot >= 0,
               "loss_coeff_k_tot >= 0", seg.id)
        _check(violations, seg.conductive_hAs >= 0, "conductive_hAs >= 0", seg.id)

    masses = {tm.id for tm in model.thermal_masses}
    coupled = Counter(hx.thermal_mass for hx in model.heat_exchangers)
    for hx in model.heat_exchangers:
        _check(violations, hx.convective_hAs_HX > 0, "convective_hAs_HX > 0", hx.id)
        _check(violations, hx.volume > 0, "volume > 0", hx.id)
        _check(violations, hx.loss_coeff_k_HX >= 0, "loss_coeff_k_HX >= 0", hx.id)
        if hx.diameter_D is not None:
            _check(violations, hx.diameter_D > 0, "diameter_D > 0", hx.id)
        _check(violations, hx.thermal_mass in masses, "heat exchanger couples an existing thermal mass", hx.id,
               f"{hx.id}: unknown thermal mass {hx.thermal_mass}")

    for tm in model.thermal_masses:
        _check(violations, tm.heat_capacity_C > 0, "heat_capacity_C > 0", tm.id)
        _check(violations, tm.hAs_actual >= 0, "hAs_actual >= 0", tm.id)
        _check(violations, coupled[tm.id] == 1, "thermal mass is coupled to exactly one heat exchanger", tm.id)
        if tm.peltier is not None:
            _check(violations, tm.hAs_simulated is not None and tm.hAs_simulated > 0,
                   "hAs_simulated > 0 when peltier present", tm.id)
            _check(violations, tm.peltier.max_power > 0, "max_power > 0", tm.id)
            _check(violations, 0 <= tm.peltier.power_setpoint_Qpelt <= tm.peltier.max_power,
                   "0 <= power_setpoint_Qpelt <= max_power", tm.id)
            _check(violations, tm.peltier.tracking_time_constant >= 0, "tracking_time_constant >= 0", tm.id)

    for valve in model.valves:
        ranges_ok = True
        for name, (k_min, k_max) in (("user", valve.user_branch_k_range), ("bypass", valve.bypass_branch_k_range)):
            ok = 0 <= k_min <= k_max
            ranges_ok = ranges_ok and ok
            _check(violations, ok, f"{name} 0 <= k_min <= k_max", valve.id)
        if not ranges_ok:
            continue
        if valve.characteristic == ValveCharacteristic.EQUAL_PERCENTAGE:
            finite = all(0 < r[0] and math.isfinite(r[1])
                         for r in (valve.user_branch_k_range, valve.bypass_branch_k_range))
            _check(violations, finite, "equal_percentage needs 0 < k_min and finite k_max", valve.id)
            if not finite:
                continue
        dead = [u for u in (0.0, 0.25, 0.5, 0.75, 1.0)
                if all(math.isinf(k) for k in valve.branch_coefficients(u))]
        _check(violations, not dead, "no dead-headed flow", valve.id,
               f"{valve.id}: both branches closed at positions {dead}")


def _topology_checks(model: NetworkModel, violations: List[Violation]) -> bool:
    edge_ids = [s.id for s in model.segments] + [h.id for h in model.heat_exchangers]
    duplicates = sorted(i for i, n in Counter(edge_ids).items() if n > 1)
    _check(violations, not duplicates, "unique component ids", "network", f"duplicate ids: {duplicates}")
    if duplicates:
        return False

    graph = build_graph(model)
    _check(violations, nx.is_weakly_connected(graph), "graph is connected", "network")
    _check(violations, nx.is_directed_acyclic_graph(graph), "graph is a directed tree of loops", "network")
    plant = model.plant
    _check(violations, graph.out_degree(plant.outlet_node) >= 1 and graph.in_degree(plant.outlet_node) == 0,
           "exactly one plant", "plant", f"plant outlet {plant.outlet_node} must only feed the supply main")
    _check(violations, graph.in_degree(plant.inlet_node) >= 1 and graph.out_degree(plant.inlet_node) == 0,
           "exactly one plant", "plant", f"plant inlet {plant.inlet_node} must only collect the return main")
    _check(violations, len(model.valves) >= 1, "at least one user loop", "network")

    for valve in model.valves:
        branches = edge_paths(graph, valve.split_node, valve.merge_node)
        _check(violations, len(branches) == 2, "branches share merge node", valve.id,
               f"{valve.id}: user and bypass branches must leave {valve.split_node} and meet at "
               f"{valve.merge_node} ({len(branches)} paths found)")
    return not [v for v in violations if v.severity == Severity.ERROR]


def _design_pressure_check(model: NetworkModel, violations: List[Violation]) -> None:
    from hydraulics.flow_solver import solve_flow_split

    try:
        flow = solve_flow_split(model, {v.id: 1.0 for v in model.valves})
    except DhnError as e:
        violations.append(Violation(rule="design point solves", component="network", message=str(e)))
        return
    if flow.network_pressure_drop > model.plant.pump_pressure_rise:
        violations.append(Violation(
            rule="design pressure loss <= pump_pressure_rise",
            component="plant",
            message=(f"design loss {flow.network_pressure_drop:.1f} Pa exceeds pump rise "
                     f"{model.plant.pump_pressure_rise:.1f} Pa"),
            severity=Severity.WARNING,
        ))


def validate_network(model: NetworkModel) -> ValidationReport:
    violations: List[Violation] = []
    _component_checks(model, violations)
    if _topology_checks(model, violations):
        try:
            extract_layout(model)
        except TopologyError as e:
            violations.append(Violation(rule="tree of parallel loops", component="network", message=str(e)))
        else:
            _design_pressure_check(model, violations)

    report = ValidationReport(violations=violations)
    if report.valid:
        logger.info(f"Network valid ({len(report.warnings)} warnings)")
    else:
        logger.warning(f"Network has {len(report.errors)} violations: {report.rules()}")
    return report
