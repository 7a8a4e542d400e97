"""Linear state-space form of the network energy balances.

With flows frozen between control updates every volume balance is linear in the
temperatures, so the whole network reads

    dx/dt = A·x + b_s·T_s(t) + b_a·T_a(t) + b_0

Mixing nodes are ideal: a node temperature is the flow-weighted average of the
outlet temperatures of its incoming edges, i.e. a fixed row over the state plus
a share of T_s.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

import networkx as nx
import numpy as np

from models.flow_state import FlowState
from models.network import NetworkModel
from network.topology import build_graph

logger = logging.getLogger("dhn_similitude")


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray
    b_s: np.ndarray
    b_a: np.ndarray
    b_0: np.ndarray
    node_rows: Dict[str, Tuple[np.ndarray, float]]

    def derivative(self, x: np.ndarray, T_s: float, T_a: float) -> np.ndarray:
        return self.A @ x + self.b_s * T_s + self.b_a * T_a + self.b_0

    def node_temperature(self, node: str, x: np.ndarray, T_s: float) -> float:
        row, supply_share = self.node_rows[node]
        return float(row @ x + supply_share * T_s)

    def min_time_constant(self) -> float:
        rates = -np.diag(self.A)
        rates = rates[rates > 0]
        return float(1.0 / rates.max()) if rates.size else float("inf")


class StateLayout:
    """Position of every lumped temperature in the state vector."""

    def __init__(self, model: NetworkModel, subsegments: int):
        self.subsegments = subsegments
        self.names: List[str] = []
        self.pipe_slices: Dict[str, slice] = {}
        self.hx_index: Dict[str, int] = {}
        self.tm_index: Dict[str, int] = {}
        for seg in model.segments:
            start = len(self.names)
            self.names.extend(f"{seg.id}[{j}]" for j in range(subsegments))
            self.pipe_slices[seg.id] = slice(start, start + subsegments)
        for hx in model.heat_exchangers:
            self.hx_index[hx.id] = len(self.names)
            self.names.append(hx.id)
        for tm in model.thermal_masses:
            self.tm_index[tm.id] = len(self.names)
            self.names.append(tm.id)

    @property
    def size(self) -> int:
        return len(self.names)

    def outlet_index(self, edge_id: str) -> int:
        if edge_id in self.pipe_slices:
            return self.pipe_slices[edge_id].stop - 1
        return self.hx_index[edge_id]


class ThermalAssembly:
    def __init__(self, model: NetworkModel, subsegments: int = 4):
        self.model = model
        self.layout = StateLayout(model, subsegments)
        self.graph = build_graph(model)
        self.node_order = list(nx.topological_sort(self.graph))
        self.incoming: Dict[str, List[str]] = {
            node: [key for _, _, key in self.graph.in_edges(node, keys=True)] for node in self.graph.nodes
        }

    def node_rows(self, flow_state: FlowState) -> Dict[str, Tuple[np.ndarray, float]]:
        n = self.layout.size
        rows: Dict[str, Tuple[np.ndarray, float]] = {}
        for node in self.node_order:
            edges = self.incoming[node]
            row = np.zeros(n)
            if not edges:
                rows[node] = (row, 1.0)
                continue
            flows = np.array([flow_state.edge_flow(e) for e in edges])
            total = flows.sum()
            # Stagnant nodes report the plain mean; they advect nothing.
            weights = flows / total if total > 0 else np.full(len(edges), 1.0 / len(edges))
            for edge, weight in zip(edges, weights):
                row[self.layout.outlet_index(edge)] += weight
            rows[node] = (row, 0.0)
        return rows

    def build(self, flow_state: FlowState, peltier_powers: Mapping[str, float]) -> LinearSystem:
        model = self.model
        rho, cp = model.fluid.rho, model.fluid.cp
        n = self.layout.size
        N = self.layout.subsegments
        A = np.zeros((n, n))
        b_s = np.zeros(n)
        b_a = np.zeros(n)
        b_0 = np.zeros(n)
        rows = self.node_rows(flow_state)

        def advect(i: int, rate: float, upstream_node: str) -> None:
            row, supply_share = rows[upstream_node]
            A[i, :] += rate * row
            b_s[i] += rate * supply_share

        for seg in model.segments:
            mdot = flow_state.segment_flows[seg.id]
            rho_V = rho * seg.volume_V / N
            a = mdot / rho_V
            b = seg.conductive_hAs / N / (rho_V * cp)
            indices = range(self.layout.pipe_slices[seg.id].start, self.layout.pipe_slices[seg.id].stop)
            for j, i in enumerate(indices):
                A[i, i] -= a + b
                b_a[i] += b
                if j == 0:
                    advect(i, a, seg.upstream_node)
                else:
                    A[i, i - 1] += a

        for hx in model.heat_exchangers:
            i = self.layout.hx_index[hx.id]
            k = self.layout.tm_index[hx.thermal_mass]
            rho_V = rho * hx.volume
            a = flow_state.hx_flows[hx.id] / rho_V
            b = hx.convective_hAs_HX / (rho_V * cp)
            A[i, i] -= a + b
            A[i, k] += b
            advect(i, a, hx.upstream_node)

            tm = model.thermal_mass(hx.thermal_mass)
            C = tm.heat_capacity_C
            A[k, k] -= (hx.convective_hAs_HX + tm.hAs_actual) / C
            A[k, i] += hx.convective_hAs_HX / C
            b_a[k] += tm.hAs_actual / C
            b_0[k] -= peltier_powers.get(tm.id, 0.0) / C

        return LinearSystem(A=A, b_s=b_s, b_a=b_a, b_0=b_0, node_rows=rows)
