"""Discrete-event simulator of the package network at message granularity.

Links are directed and exclusive: one chunk at a time, store-and-forward,
FIFO by ready time then flow issue order. Flows may be multicast trees, in
which case every node on the tree receives the message.
"""

from __future__ import annotations

import csv
import heapq
import io
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from .topology import Coord, GridSpec, HopStrategy, Topology, build_topology, hops

MEM = "mem"
Link = Tuple[Hashable, Hashable]


@dataclass(frozen=True)
class Flow:
    src: Hashable
    bytes: float
    route: Tuple[Link, ...]
    dst: Optional[Coord] = None
    release: float = 0.0
    chunks: int = 1

    def __post_init__(self):
        object.__setattr__(self, "route", tuple(tuple(l) for l in self.route))
        if not self.bytes > 0:
            raise ValueError("flow must carry a positive number of bytes")
        if self.chunks < 1:
            raise ValueError("chunks must be >= 1")


@dataclass
class SimResult:
    completion_s: float
    busy_s: Dict[Link, float]
    arrivals: List[Dict[Hashable, float]] = field(default_factory=list)

    @property
    def utilization(self) -> Dict[Link, float]:
        if self.completion_s <= 0:
            return {l: 0.0 for l in self.busy_s}
        return {l: min(b / self.completion_s, 1.0) for l, b in self.busy_s.items()}


def link_bandwidths(topology: Topology, bw_nop: float, bw_mem: float,
                    mem_attach: Optional[Iterable[Coord]] = None) -> Dict[Link, float]:
    links = {}
    for link in topology.links:
        u, v = sorted(link)
        links[(u, v)] = bw_nop
        links[(v, u)] = bw_nop
    for g in sorted(mem_attach if mem_attach is not None else topology.globals):
        links[(MEM, g)] = bw_mem
        links[(g, MEM)] = bw_mem
    return links


def _children(flow: Flow, links: Dict[Link, float]) -> Dict[Hashable, List[Link]]:
    reached = {flow.src}
    children = defaultdict(list)
    for u, v in flow.route:
        if (u, v) not in links:
            raise ValueError(f"route uses missing link {u}->{v}")
        if u not in reached:
            raise ValueError(f"route link {u}->{v} starts at a node the flow has not reached")
        if v in reached:
            raise ValueError(f"route reaches {v} twice")
        reached.add(v)
        children[u].append((u, v))
    if flow.dst is not None and flow.dst not in reached:
        raise ValueError(f"route does not reach destination {flow.dst}")
    return children


def simulate(topology: Topology, flows: Sequence[Flow], bw_nop: float, bw_mem: float,
             mem_attach: Optional[Iterable[Coord]] = None) -> SimResult:
    links = link_bandwidths(topology, bw_nop, bw_mem, mem_attach)
    children = [_children(f, links) for f in flows]

    busy = {l: 0.0 for l in links}
    busy_until: Dict[Link, float] = {}
    queues: Dict[Link, list] = defaultdict(list)
    arrivals: List[Dict[Hashable, float]] = [dict() for _ in flows]

    events: list = []
    seq = 0
    for fi, f in enumerate(flows):
        for ci in range(f.chunks):
            heapq.heappush(events, (f.release, 0, seq, fi, ci, f.src))
            seq += 1

    completion = 0.0
    while events:
        t = events[0][0]
        touched = set()
        while events and events[0][0] == t:
            _, kind, _, fi, ci, what = heapq.heappop(events)
            if kind == 0:
                node = what
                arr = arrivals[fi]
                arr[node] = max(arr.get(node, t), t)
                completion = max(completion, t)
                for link in children[fi].get(node, ()):
                    heapq.heappush(queues[link], (t, fi, ci))
                    touched.add(link)
            else:
                touched.add(what)
        for link in sorted(touched, key=repr):
            if busy_until.get(link, -1.0) > t or not queues[link]:
                continue
            _, fi, ci = heapq.heappop(queues[link])
            f = flows[fi]
            dur = (f.bytes / f.chunks) / links[link]
            busy[link] += dur
            busy_until[link] = t + dur
            heapq.heappush(events, (t + dur, 0, seq, fi, ci, link[1]))
            heapq.heappush(events, (t + dur, 1, seq + 1, -1, -1, link))
            seq += 2
    return SimResult(completion, busy, arrivals)


# --- routing helpers ---------------------------------------------------------

def _step(a: int, b: int) -> int:
    return (b > a) - (b < a)


def xy_path(src: Coord, dst: Coord, columns_first: bool = True) -> List[Coord]:
    path = [src]
    r, c = src
    order = ("c", "r") if columns_first else ("r", "c")
    for axis in order:
        if axis == "c":
            while c != dst[1]:
                c += _step(c, dst[1])
                path.append((r, c))
        else:
            while r != dst[0]:
                r += _step(r, dst[0])
                path.append((r, c))
    return path


def bfs_path(topology: Topology, src: Coord, dst: Coord, mesh_only: bool = True) -> List[Coord]:
    links = topology.mesh_links if mesh_only else topology.links
    adj = defaultdict(list)
    for link in links:
        u, v = sorted(link)
        adj[u].append(v)
        adj[v].append(u)
    prev = {src: None}
    dq = deque([src])
    while dq:
        u = dq.popleft()
        if u == dst:
            break
        for v in sorted(adj[u]):
            if v not in prev:
                prev[v] = u
                dq.append(v)
    path, node = [], dst
    while node is not None:
        path.append(node)
        node = prev[node]
    return path[::-1]


def path_links(path: Sequence[Hashable]) -> List[Link]:
    return list(zip(path[:-1], path[1:]))


def union_tree(paths: Iterable[Sequence[Coord]]) -> List[Link]:
    """Merge root-sharing paths into one multicast tree (links in discovery order)."""
    parent, out = {}, []
    for path in paths:
        for u, v in zip(path[:-1], path[1:]):
            if v in parent:
                if parent[v] != u:
                    raise ValueError(f"paths disagree on the parent of {v}")
                continue
            parent[v] = u
            out.append((u, v))
    return out


# --- motivation scenarios ----------------------------------------------------

SCENARIOS = {
    "dram": ("A", 60.0),
    "hbm-periph": ("A", 1024.0),
    "hbm-central": ("C", 1024.0),
}


def pull_flows(topology: Topology, nbytes: float, chunks: int = 64) -> List[Flow]:
    """Every chiplet pulls ``nbytes`` from memory along dimension-order routes."""
    flows = []
    for p in topology.chiplets:
        g = topology.owner[p]
        path = [MEM] + xy_path(g, p)
        flows.append(Flow(MEM, nbytes, tuple(path_links(path)), dst=p, chunks=chunks))
    return flows


def run_scenario(name: str, nop_gbps: float, grid: int = 4, gbytes: float = 1.0,
                 chunks: int = 64) -> Tuple[Topology, SimResult]:
    pkg, mem_gbps = SCENARIOS[name]
    topo = build_topology(GridSpec(grid, grid, pkg))
    flows = pull_flows(topo, gbytes * 1e9, chunks)
    return topo, simulate(topo, flows, nop_gbps * 1e9, mem_gbps * 1e9)


_DIRECTIONS = {(1, 0): "S", (-1, 0): "N", (0, 1): "E", (0, -1): "W",
               (1, 1): "SE", (1, -1): "SW", (-1, 1): "NE", (-1, -1): "NW"}


def heatmap(result: SimResult) -> List[Tuple[int, int, str, float]]:
    """Per-link utilization rows ``(row, col, direction, utilization)`` keyed by the sending end."""
    rows = []
    for (u, v), util in result.utilization.items():
        if u == MEM:
            rows.append((v[0], v[1], "from_mem", util))
        elif v == MEM:
            rows.append((u[0], u[1], "to_mem", util))
        else:
            rows.append((u[0], u[1], _DIRECTIONS[(v[0] - u[0], v[1] - u[1])], util))
    return sorted(rows)


def heatmap_csv(result: SimResult, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "direction", "utilization"])
    for r, c, d, u in heatmap(result):
        w.writerow([r, c, d, f"{u:.6f}"])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def cut_lower_bound(topology: Topology, flows: Sequence[Flow], bw_nop: float, bw_mem: float,
                    mem_attach: Optional[Iterable[Coord]] = None) -> float:
    """Largest single-link load over its bandwidth; no schedule can beat it."""
    links = link_bandwidths(topology, bw_nop, bw_mem, mem_attach)
    load = defaultdict(float)
    for f in flows:
        for link in f.route:
            load[link] += f.bytes
    return max((b / links[l] for l, b in load.items()), default=0.0)


# --- hop-formula oracle ------------------------------------------------------

def _members_by_row(topology: Topology) -> Dict[Tuple[Coord, int], List[Coord]]:
    groups = defaultdict(list)
    for p in topology.chiplets:
        dr, _ = topology.signed_offset(p)
        groups[(topology.owner[p], dr)].append(p)
    return groups


def _members_by_col(topology: Topology) -> Dict[Tuple[Coord, int], List[Coord]]:
    groups = defaultdict(list)
    for p in topology.chiplets:
        _, dc = topology.signed_offset(p)
        groups[(topology.owner[p], dc)].append(p)
    return groups


def _diag_path(g: Coord, p: Coord) -> List[Coord]:
    dr, dc = p[0] - g[0], p[1] - g[1]
    sr, sc = _step(0, dr), _step(0, dc)
    k = min(abs(dr), abs(dc))
    path = [(g[0] + i * sr, g[1] + i * sc) for i in range(k + 1)]
    r, c = path[-1]
    while (r, c) != p:
        if r != p[0]:
            r += sr
        else:
            c += sc
        path.append((r, c))
    return path


def strategy_flows(topology: Topology, strategy: HopStrategy, quantum_bytes: float = 1.0) -> List[Tuple[Flow, List[Coord]]]:
    """Flows that realize a shared-data strategy, each with the chiplets it serves.

    Shared data for one local row (column) is a single multicast issued
    ``X - x`` (``Y - y``) quanta late: farther rows go first.
    """
    strategy = HopStrategy(strategy)
    X, Y = topology.X, topology.Y
    out = []
    if strategy in (HopStrategy.RowShared, HopStrategy.DiagonalShared):
        groups = _members_by_row(topology)
        for (g, dr), members in sorted(groups.items()):
            members = sorted(members, key=lambda p: abs(p[1] - g[1]))
            if strategy is HopStrategy.RowShared:
                paths = [xy_path(g, p, columns_first=False) for p in members]
            else:
                paths = [_diag_path(g, p) for p in members]
            release = (X - abs(dr)) * quantum_bytes
            out.append((Flow(g, quantum_bytes, tuple(union_tree(paths)), release=release), members))
    elif strategy is HopStrategy.ColShared:
        groups = _members_by_col(topology)
        for (g, dc), members in sorted(groups.items()):
            members = sorted(members, key=lambda p: abs(p[0] - g[0]))
            paths = [xy_path(g, p, columns_first=True) for p in members]
            release = (Y - abs(dc)) * quantum_bytes
            out.append((Flow(g, quantum_bytes, tuple(union_tree(paths)), release=release), members))
    else:
        raise ValueError(f"{strategy.value} has no shared-data flow pattern")
    return out


def simulated_hops(topology: Topology, strategy: HopStrategy) -> Dict[Coord, float]:
    """Per-chiplet delivery time in quanta (chunk / bw_nop with both set to 1)."""
    strategy = HopStrategy(strategy)
    if strategy is HopStrategy.LowBw:
        # uncontended: each chiplet's data travels alone along a BFS shortest path
        out = {}
        for p in topology.chiplets:
            path = bfs_path(topology, topology.owner[p], p)
            flow = Flow(path[0], 1.0, tuple(path_links(path)), dst=p)
            res = simulate(topology, [flow], 1.0, 1.0)
            out[p] = res.arrivals[0][p]
        return out
    if strategy is HopStrategy.DiagonalShared and not topology.spec.diagonal_links:
        spec = topology.spec
        topology = build_topology(GridSpec(spec.X, spec.Y, spec.pkg_type, True), topology.globals)
    if strategy is HopStrategy.RowShared and topology.spec.diagonal_links:
        # both strategies are available; each chiplet takes the earlier delivery
        a = simulated_hops(_without_diagonals(topology), HopStrategy.RowShared)
        b = simulated_hops(topology, HopStrategy.DiagonalShared)
        return {p: min(a[p], b[p]) for p in a}
    pairs = strategy_flows(topology, strategy)
    res = simulate(topology, [f for f, _ in pairs], 1.0, 1.0)
    out = {}
    for (f, members), arr in zip(pairs, res.arrivals):
        for p in members:
            out[p] = arr[p]
    return out


def _without_diagonals(topology: Topology) -> Topology:
    spec = topology.spec
    return build_topology(GridSpec(spec.X, spec.Y, spec.pkg_type, False), topology.globals)


@dataclass
class HopReport:
    strategy: HopStrategy
    expected: Dict[Coord, int]
    simulated: Dict[Coord, float]

    @property
    def mismatches(self) -> List[Tuple[Coord, int, float]]:
        return [(p, e, self.simulated[p]) for p, e in sorted(self.expected.items())
                if abs(self.simulated[p] - e) >= 1.0]


def validate_hops(topology: Topology, strategy: HopStrategy) -> HopReport:
    strategy = HopStrategy(strategy)
    expected = {p: hops(topology, p, strategy) for p in topology.chiplets}
    return HopReport(strategy, expected, simulated_hops(topology, strategy))
