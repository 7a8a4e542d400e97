"""Graph view of a NetworkModel.

Segments and heat exchangers are the edges of a directed multigraph whose nodes
are junctions. The supported layout is a supply main feeding parallel user
loops that remerge into a return main::

    plant_out --supply main--> header --loop supply--> split --user (HX)--> merge --loop return--> header --return main--> plant_in
                                                            \\--bypass-----/
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import networkx as nx

from models.errors import TopologyError
from models.network import NetworkModel

logger = logging.getLogger("dhn_similitude")

SEGMENT = "segment"
HEAT_EXCHANGER = "heat_exchanger"


@dataclass(frozen=True)
class LoopLayout:
    valve_id: str
    split_node: str
    merge_node: str
    supply_segments: Tuple[str, ...]
    user_edges: Tuple[str, ...]
    bypass_edges: Tuple[str, ...]
    return_segments: Tuple[str, ...]
    hx_id: str

    @property
    def user_segments(self) -> Tuple[str, ...]:
        return tuple(e for e in self.user_edges if e != self.hx_id)


@dataclass(frozen=True)
class NetworkLayout:
    supply_main: Tuple[str, ...]
    return_main: Tuple[str, ...]
    loops: Tuple[LoopLayout, ...]
    edge_kinds: Dict[str, str] = field(default_factory=dict)

    def loop(self, valve_id: str) -> LoopLayout:
        for loop in self.loops:
            if loop.valve_id == valve_id:
                return loop
        raise KeyError(valve_id)


def build_graph(model: NetworkModel) -> nx.MultiDiGraph:
    graph = nx.MultiDiGraph()
    for seg in model.segments:
        graph.add_edge(seg.upstream_node, seg.downstream_node, key=seg.id, kind=SEGMENT)
    for hx in model.heat_exchangers:
        graph.add_edge(hx.upstream_node, hx.downstream_node, key=hx.id, kind=HEAT_EXCHANGER)
    graph.add_node(model.plant.outlet_node)
    graph.add_node(model.plant.inlet_node)
    return graph


def edge_paths(graph: nx.MultiDiGraph, source: str, target: str) -> List[Tuple[str, ...]]:
    """All simple paths from source to target, as tuples of edge ids."""
    if source not in graph or target not in graph:
        return []
    return [tuple(key for _, _, key in path) for path in nx.all_simple_edge_paths(graph, source, target)]


def _common_prefix(paths: List[Tuple[str, ...]]) -> Tuple[str, ...]:
    prefix: List[str] = []
    for items in zip(*paths):
        if all(item == items[0] for item in items):
            prefix.append(items[0])
        else:
            break
    return tuple(prefix)


def _single_path(graph: nx.MultiDiGraph, source: str, target: str) -> Tuple[str, ...]:
    paths = edge_paths(graph, source, target)
    if len(paths) != 1:
        raise TopologyError(f"expected exactly one path {source} -> {target}, found {len(paths)}")
    return paths[0]


def extract_layout(model: NetworkModel) -> NetworkLayout:
    graph = build_graph(model)
    kinds = {key: data["kind"] for _, _, key, data in graph.edges(keys=True, data=True)}
    hx_ids = {hx.id for hx in model.heat_exchangers}

    if not model.valves:
        raise TopologyError("network has no valve loops")

    partial = []
    for valve in model.valves:
        branches = edge_paths(graph, valve.split_node, valve.merge_node)
        if len(branches) != 2:
            raise TopologyError(
                f"valve {valve.id}: expected a user and a bypass branch between "
                f"{valve.split_node} and {valve.merge_node}, found {len(branches)}"
            )
        user = [b for b in branches if hx_ids.intersection(b)]
        bypass = [b for b in branches if not hx_ids.intersection(b)]
        if len(user) != 1 or len(bypass) != 1:
            raise TopologyError(f"valve {valve.id}: exactly one branch must pass through a heat exchanger")
        hx_on_branch = [e for e in user[0] if e in hx_ids]
        if len(hx_on_branch) != 1:
            raise TopologyError(f"valve {valve.id}: user branch must contain exactly one heat exchanger")
        supply_path = _single_path(graph, model.plant.outlet_node, valve.split_node)
        return_path = _single_path(graph, valve.merge_node, model.plant.inlet_node)
        partial.append((valve, supply_path, user[0], bypass[0], return_path, hx_on_branch[0]))

    supply_main = _common_prefix([p[1] for p in partial])
    return_main = tuple(reversed(_common_prefix([tuple(reversed(p[4])) for p in partial])))

    loops = []
    for valve, supply_path, user, bypass, return_path, hx_id in partial:
        loop_supply = supply_path[len(supply_main):]
        loop_return = return_path[: len(return_path) - len(return_main)]
        for edge in loop_supply + loop_return + supply_main + return_main:
            if kinds[edge] != SEGMENT:
                raise TopologyError(f"heat exchanger {edge} must sit on a user branch")
        loops.append(LoopLayout(
            valve_id=valve.id,
            split_node=valve.split_node,
            merge_node=valve.merge_node,
            supply_segments=loop_supply,
            user_edges=user,
            bypass_edges=bypass,
            return_segments=loop_return,
            hx_id=hx_id,
        ))

    covered: Dict[str, int] = {}
    for edge in supply_main + return_main:
        covered[edge] = covered.get(edge, 0) + 1
    for loop in loops:
        for edge in loop.supply_segments + loop.user_edges + loop.bypass_edges + loop.return_segments:
            covered[edge] = covered.get(edge, 0) + 1
    shared = [edge for edge, count in covered.items() if count > 1]
    if shared:
        raise TopologyError(f"edges shared between loops (nested branching): {sorted(shared)}")
    orphans = sorted(set(kinds) - set(covered))
    if orphans:
        raise TopologyError(f"edges not on any plant-to-plant path: {orphans}")

    logger.debug(f"Extracted layout with {len(loops)} loops")
    return NetworkLayout(
        supply_main=supply_main,
        return_main=return_main,
        loops=tuple(loops),
        edge_kinds=kinds,
    )
