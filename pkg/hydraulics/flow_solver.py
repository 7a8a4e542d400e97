import logging
import math
from typing import Dict, List, Mapping, Optional

import numpy as np
from scipy.optimize import brentq

from hydraulics.pressure import (
    LoopHydraulics,
    loop_pressure_loss,
    segment_pressure_drop,
    series_coefficient,
    split_parallel,
)
from models.errors import InfeasibleConfigurationError, SolverConvergenceError
from models.flow_state import FlowState
from models.network import NetworkModel
from network.topology import NetworkLayout, extract_layout

logger = logging.getLogger("dhn_similitude")

TOLERANCE = 1e-9
MAX_ITERATIONS = 100


class HydraulicNetwork:
    """Precomputed quadratic coefficients of a model, reused across solves."""

    def __init__(self, model: NetworkModel, layout: Optional[NetworkLayout] = None):
        self.model = model
        self.layout = layout or extract_layout(model)
        self.valve_area = math.pi * model.base_diameter ** 2 / 4.0
        self.edge_terms: Dict[str, tuple] = {}
        for seg in model.segments:
            self.edge_terms[seg.id] = (seg.loss_coeff_k_tot, seg.cross_section_Ac)
        for hx in model.heat_exchangers:
            diameter = model.hx_diameter(hx)
            self.edge_terms[hx.id] = (hx.loss_coeff_k_HX, math.pi * diameter ** 2 / 4.0)

        self.loops: List[LoopHydraulics] = []
        for loop in self.layout.loops:
            self.loops.append(LoopHydraulics(
                valve=model.valve(loop.valve_id),
                valve_area=self.valve_area,
                K_series=self._series(loop.supply_segments + loop.return_segments),
                K_user_fixed=self._series(loop.user_edges),
                K_bypass_fixed=self._series(loop.bypass_edges),
            ))
        self.K_mains = self._series(self.layout.supply_main + self.layout.return_main)

    def _series(self, edges) -> float:
        return series_coefficient([self.edge_terms[e] for e in edges])

    def positions(self, valve_positions: Mapping[str, float]) -> Dict[str, float]:
        return {
            loop.valve_id: min(max(float(valve_positions.get(loop.valve_id, 1.0)), 0.0), 1.0)
            for loop in self.layout.loops
        }


def _newton(loops: List[LoopHydraulics], positions: List[float], total: float):
    """Damped Newton on the first N-1 loop flows; the last loop takes the remainder."""
    n = len(loops)
    flows = np.full(n, total / n)

    def losses(q: np.ndarray) -> np.ndarray:
        return np.array([loop_pressure_loss(loops[i], max(q[i], 0.0), positions[i]) for i in range(n)])

    def residual(q: np.ndarray) -> np.ndarray:
        dp = losses(q)
        return dp[:-1] - dp[-1]

    for iteration in range(1, MAX_ITERATIONS + 1):
        dp = losses(flows)
        r = dp[:-1] - dp[-1]
        scale = max(float(dp.max()), 1e-300)
        if float(np.max(np.abs(r))) / scale <= TOLERANCE:
            return flows, float(np.max(np.abs(r))) / scale, iteration - 1
        # Quadratic laws are homogeneous of degree two: dΔP/dṁ = 2ΔP/ṁ.
        slopes = np.where(flows > 0, 2.0 * dp / np.maximum(flows, 1e-300), 0.0)
        jacobian = np.full((n - 1, n - 1), slopes[-1])
        jacobian[np.diag_indices(n - 1)] += slopes[:-1]
        try:
            step = np.linalg.solve(jacobian, -r)
        except np.linalg.LinAlgError:
            raise SolverConvergenceError("singular loop Jacobian", iteration, float(np.max(np.abs(r))) / scale)
        damping = 1.0
        current = float(np.linalg.norm(r))
        while damping > 1e-6:
            trial = flows.copy()
            trial[:-1] = np.clip(flows[:-1] + damping * step, 0.0, total)
            trial[-1] = total - trial[:-1].sum()
            if trial[-1] >= 0 and float(np.linalg.norm(residual(trial))) < current:
                break
            damping /= 2.0
        flows = trial

    dp = losses(flows)
    relative = float(np.max(np.abs(dp[:-1] - dp[-1]))) / max(float(dp.max()), 1e-300)
    raise SolverConvergenceError("loop flow split did not converge", MAX_ITERATIONS, relative)


def _bisection(loops: List[LoopHydraulics], positions: List[float], total: float):
    def imbalance(fraction: float) -> float:
        return (loop_pressure_loss(loops[0], fraction * total, positions[0])
                - loop_pressure_loss(loops[1], (1.0 - fraction) * total, positions[1]))

    fraction = brentq(imbalance, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_ITERATIONS)
    flows = np.array([fraction * total, (1.0 - fraction) * total])
    dp = [loop_pressure_loss(loops[i], flows[i], positions[i]) for i in range(2)]
    return flows, abs(dp[0] - dp[1]) / max(max(dp), 1e-300), 0


def solve_loop_flows(loops: List[LoopHydraulics], positions: List[float], total: float):
    open_idx = [i for i, loop in enumerate(loops) if math.isfinite(loop.effective_coefficient(positions[i]))]
    if not open_idx:
        raise InfeasibleConfigurationError("every loop is closed")
    flows = np.zeros(len(loops))
    if len(open_idx) == 1:
        flows[open_idx[0]] = total
        return flows, 0.0, 0
    sub_loops = [loops[i] for i in open_idx]
    sub_positions = [positions[i] for i in open_idx]
    try:
        sub_flows, residual, iterations = _newton(sub_loops, sub_positions, total)
    except SolverConvergenceError:
        if len(open_idx) != 2:
            raise
        logger.warning("Newton loop balance failed; falling back to bisection")
        sub_flows, residual, iterations = _bisection(sub_loops, sub_positions, total)
    flows[open_idx] = sub_flows
    # Conservation is enforced exactly on the last open loop.
    flows[open_idx[-1]] = total - sum(flows[i] for i in open_idx[:-1])
    return flows, residual, iterations


def solve_flow_split(model: NetworkModel, valve_positions: Mapping[str, float],
                     network: Optional[HydraulicNetwork] = None) -> FlowState:
    network = network or HydraulicNetwork(model)
    layout = network.layout
    total = model.plant.initial_mass_flow_mdotI
    positions = network.positions(valve_positions)
    ordered_positions = [positions[loop.valve_id] for loop in layout.loops]

    loop_flows, residual, iterations = solve_loop_flows(network.loops, ordered_positions, total)

    edge_flows: Dict[str, float] = {edge: total for edge in layout.supply_main + layout.return_main}
    branch_flows = {}
    loop_drops = {}
    for loop, hydraulics, mdot, u in zip(layout.loops, network.loops, loop_flows, ordered_positions):
        mdot = float(mdot)
        K_user, K_bypass = hydraulics.branch_coefficients(u)
        user, bypass = split_parallel(K_user, K_bypass, mdot)
        branch_flows[loop.valve_id] = (user, bypass)
        loop_drops[loop.valve_id] = loop_pressure_loss(hydraulics, mdot, u)
        for edge in loop.supply_segments + loop.return_segments:
            edge_flows[edge] = mdot
        for edge in loop.user_edges:
            edge_flows[edge] = user
        for edge in loop.bypass_edges:
            edge_flows[edge] = bypass

    drops = {
        edge: segment_pressure_drop(network.edge_terms[edge][0], flow, network.edge_terms[edge][1])
        for edge, flow in edge_flows.items()
    }
    hx_ids = {hx.id for hx in model.heat_exchangers}
    mains = sum(drops[e] for e in layout.supply_main + layout.return_main)
    network_drop = mains + max(loop_drops.values())

    return FlowState(
        total_flow=total,
        segment_flows={e: f for e, f in edge_flows.items() if e not in hx_ids},
        segment_pressure_drops={e: d for e, d in drops.items() if e not in hx_ids},
        hx_flows={e: f for e, f in edge_flows.items() if e in hx_ids},
        hx_pressure_drops={e: d for e, d in drops.items() if e in hx_ids},
        loop_flows={loop.valve_id: float(f) for loop, f in zip(layout.loops, loop_flows)},
        loop_pressure_drops=loop_drops,
        branch_flows=branch_flows,
        valve_positions=positions,
        network_pressure_drop=network_drop,
        pressure_residual=residual,
        iterations=iterations,
    )


def network_pressure_drop(model: NetworkModel, flow_state: FlowState) -> float:
    """Plant-to-plant pressure loss: both mains plus the balanced loop loss [Pa]."""
    layout = extract_layout(model)
    mains = sum(flow_state.segment_pressure_drops[e] for e in layout.supply_main + layout.return_main)
    loops = max(flow_state.loop_pressure_drops.values()) if flow_state.loop_pressure_drops else 0.0
    return mains + loops
