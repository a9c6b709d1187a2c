"""Closed-form latency, energy and EDP model for GEMM sequences on a chiplet grid.

Each operator runs as load -> compute -> store. Loading is an off-chip
transfer into the global chiplet(s) followed by on-package distribution;
storing is on-package collection followed by an off-chip write. Compute
follows the output-stationary systolic array cycle count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .topology import HopStrategy, Topology
from .workload import GemmOp, TaskSequence

GB = 1e9
PJ = 1e-12

MEMORY_PRESETS = {
    # bandwidth (GB/s), energy (pJ/bit)
    "HBM": (1000.0, 4.11),
    "DRAM": (60.0, 14.8),
}


@dataclass(frozen=True)
class CostParams:
    bw_nop: float = 60 * GB
    bw_mem: float = 1000 * GB
    R: int = 16
    C: int = 16
    freq_hz: float = 1e9
    e_sram: float = 0.28 * PJ
    e_mac: float = 4.6 * PJ
    e_nop: float = 1.285 * PJ
    e_offchip: float = 4.11 * PJ

    def __post_init__(self):
        for name in ("bw_nop", "bw_mem", "R", "C", "freq_hz", "e_sram", "e_mac", "e_nop", "e_offchip"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def for_memory(cls, memory: str, **overrides) -> "CostParams":
        bw, e = MEMORY_PRESETS[memory.upper()]
        kw = dict(bw_mem=bw * GB, e_offchip=e * PJ)
        kw.update(overrides)
        return cls(**kw)

    def nominal_regime(self) -> str:
        """Bandwidth-comparison regime: memory no faster than a NoP link is LowBw."""
        return "LowBw" if self.bw_mem <= self.bw_nop else "HighBw"


@dataclass(frozen=True)
class Partition:
    px: Tuple[int, ...]
    py: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "px", tuple(int(v) for v in self.px))
        object.__setattr__(self, "py", tuple(int(v) for v in self.py))

    def validate(self, op: GemmOp, R: int, C: int, X: Optional[int] = None, Y: Optional[int] = None) -> None:
        if X is not None and len(self.px) != X:
            raise ValueError(f"{op.name}: px has {len(self.px)} entries, grid has {X} rows")
        if Y is not None and len(self.py) != Y:
            raise ValueError(f"{op.name}: py has {len(self.py)} entries, grid has {Y} cols")
        if min(self.px) < 0 or min(self.py) < 0:
            raise ValueError(f"{op.name}: negative partition entry")
        if sum(self.px) != op.M or sum(self.py) != op.N:
            raise ValueError(f"{op.name}: partition sums {sum(self.px)}/{sum(self.py)} != {op.M}/{op.N}")
        for vec, dim, unit in ((self.px, op.M, R), (self.py, op.N, C)):
            if dim >= unit and any(0 < v < unit for v in vec):
                raise ValueError(f"{op.name}: nonzero entry below array size {unit}")


# --- per-step formulas -------------------------------------------------------

def compute_latency_chiplet(op: GemmOp, partition: Partition, params: CostParams, x: int, y: int) -> int:
    """Output-stationary cycles for chiplet (x, y); folds use ceiling division."""
    rows, cols = partition.px[x], partition.py[y]
    if rows == 0 or cols == 0:
        return 0
    R, C = params.R, params.C
    return (2 * R + C + op.K - 2) * (-(-rows // R)) * (-(-cols // C))


def _folds(vec, unit) -> np.ndarray:
    return -(-np.asarray(vec, dtype=np.int64) // unit)


def compute_cycles_grid(op: GemmOp, partition: Partition, params: CostParams) -> np.ndarray:
    fx = _folds(partition.px, params.R)
    fy = _folds(partition.py, params.C)
    return (2 * params.R + params.C + op.K - 2) * np.outer(fx, fy)


def combine_compute(op: GemmOp, partition: Partition, params: CostParams) -> float:
    """Step compute time: the slowest chiplet bounds the synchronized step."""
    return float(compute_cycles_grid(op, partition, params).max()) / params.freq_hz


def collect_latency(op: GemmOp, topology: Topology, params: CostParams) -> float:
    if len(topology.globals) == topology.X * topology.Y:
        return 0.0
    return op.output_bytes / (topology.entry_links * params.bw_nop)


def offchip_latency(nbytes: float, params: CostParams) -> float:
    if nbytes < 0:
        raise ValueError("byte count must be non-negative")
    return nbytes / params.bw_mem


def activation_bytes_grid(op: GemmOp, partition: Partition, Y: int) -> np.ndarray:
    col = np.asarray(partition.px, dtype=np.float64) * op.K * op.bytes_per_element
    return np.repeat(col[:, None], Y, axis=1)


def weight_bytes_grid(op: GemmOp, partition: Partition, X: int) -> np.ndarray:
    row = np.asarray(partition.py, dtype=np.float64) * op.K * op.bytes_per_element
    return np.repeat(row[None, :], X, axis=0)


def activation_strategy(op: GemmOp) -> HopStrategy:
    if op.shared_row:
        return HopStrategy.RowShared
    if op.shared_col:
        return HopStrategy.ColShared
    return HopStrategy.NonShared


WEIGHT_STRATEGY = HopStrategy.ColShared


def stream_distribute(bytes_grid: np.ndarray, topology: Topology, params: CostParams,
                      regime: str, strategy: HopStrategy) -> Tuple[float, float]:
    """On-package distribution of one operand stream -> (seconds, byte-hops).

    LowBw: the memory link paces the stream, each chiplet pays its minimal
    path. HighBw shared: waiting + path hops. HighBw non-shared: the cut
    around the global chiplets limits the total volume.
    """
    if topology.X * topology.Y == len(topology.globals):
        return 0.0, 0.0
    low = topology.hop_matrix(HopStrategy.LowBw)
    if regime == "LowBw":
        t = float((bytes_grid * low).max()) / params.bw_nop
        return t, float((bytes_grid * low).sum())
    if strategy is HopStrategy.NonShared:
        t = float(bytes_grid.sum()) / (topology.entry_links * params.bw_nop)
        return t, float((bytes_grid * low).sum())
    h = topology.hop_matrix(strategy)
    return float((bytes_grid * h).max()) / params.bw_nop, float((bytes_grid * h).sum())


def distribute_latency(op: GemmOp, partition: Partition, topology: Topology, params: CostParams,
                       regime: str) -> float:
    """Input plus weight distribution time under an explicitly chosen regime."""
    a = activation_bytes_grid(op, partition, topology.Y)
    w = weight_bytes_grid(op, partition, topology.X)
    ta, _ = stream_distribute(a, topology, params, regime, activation_strategy(op))
    tw, _ = stream_distribute(w, topology, params, regime, WEIGHT_STRATEGY)
    return ta + tw


def compute_energy(op: GemmOp, partition: Partition, params: CostParams, grid=None) -> float:
    cycles = compute_cycles_grid(op, partition, params)
    if cycles.sum() == 0:
        return 0.0
    sram = params.e_sram * 8 * (op.input_bytes + op.weight_bytes + op.output_bytes)
    return sram + params.e_mac * float(cycles.sum()) * params.R * params.C


def onchip_energy(nbytes: float, hops: float, params: CostParams) -> float:
    return params.e_nop * 8 * nbytes * hops


def offchip_energy(nbytes: float, params: CostParams) -> float:
    return params.e_offchip * 8 * nbytes


# --- composition -------------------------------------------------------------

@dataclass
class OpCost:
    name: str
    compute_s: float = 0.0
    collect_s: float = 0.0
    offchip_load_s: float = 0.0
    offchip_store_s: float = 0.0
    distribute_s: float = 0.0
    weight_load_s: float = 0.0
    redistribute_s: float = 0.0
    e_compute_J: float = 0.0
    e_onchip_J: float = 0.0
    e_offchip_J: float = 0.0
    regime: str = ""
    redistributed: bool = False

    LATENCY_FIELDS = ("compute_s", "collect_s", "offchip_load_s", "offchip_store_s",
                      "distribute_s", "weight_load_s", "redistribute_s")

    @property
    def load_s(self) -> float:
        return self.offchip_load_s + self.distribute_s + self.redistribute_s

    @property
    def store_s(self) -> float:
        return self.collect_s + self.offchip_store_s

    @property
    def latency_s(self) -> float:
        return sum(getattr(self, f) for f in self.LATENCY_FIELDS)

    @property
    def energy_J(self) -> float:
        return self.e_compute_J + self.e_onchip_J + self.e_offchip_J

    def as_dict(self) -> dict:
        d = {f: getattr(self, f) for f in ("name",) + self.LATENCY_FIELDS}
        d.update(e_compute_J=self.e_compute_J, e_onchip_J=self.e_onchip_J,
                 e_offchip_J=self.e_offchip_J, regime=self.regime,
                 redistributed=self.redistributed, latency_s=self.latency_s,
                 energy_J=self.energy_J)
        return d


@dataclass
class CostBreakdown:
    ops: List[OpCost] = field(default_factory=list)
    overlap_s: float = 0.0

    @property
    def latency_s(self) -> float:
        return sum((o.latency_s for o in self.ops), 0.0) - self.overlap_s

    @property
    def energy_J(self) -> float:
        return sum((o.energy_J for o in self.ops), 0.0)

    @property
    def edp_Js(self) -> float:
        return self.latency_s * self.energy_J

    def objective(self, name: str) -> float:
        if name == "latency":
            return self.latency_s
        if name == "edp":
            return self.edp_Js
        raise ValueError(f"unknown objective {name!r}")

    def as_dict(self) -> dict:
        return {
            "ops": [o.as_dict() for o in self.ops],
            "overlap_s": self.overlap_s,
            "latency_s": self.latency_s,
            "energy_J": self.energy_J,
            "edp_Js": self.edp_Js,
        }


def _load_stream(bytes_grid, total_bytes, topology, params, strategy):
    """Off-chip fetch plus distribution of one operand -> (offchip_s, dist_s, byte_hops, regime).

    The load time is the envelope max(offchip + paced distribution,
    congested distribution); whichever side binds names the regime.
    """
    off = offchip_latency(total_bytes, params)
    t_low, bh_low = stream_distribute(bytes_grid, topology, params, "LowBw", strategy)
    t_high, bh_high = stream_distribute(bytes_grid, topology, params, "HighBw", strategy)
    if off + t_low >= t_high:
        return off, t_low, bh_low, "LowBw"
    return off, t_high - off, bh_high, "HighBw"


def op_cost(op: GemmOp, partition: Partition, topology: Topology, params: CostParams) -> OpCost:
    """Cost of one operator with a memory round trip on both sides."""
    X, Y = topology.X, topology.Y
    a = activation_bytes_grid(op, partition, Y)
    w = weight_bytes_grid(op, partition, X)
    a_off, a_dist, a_bh, regime = _load_stream(a, op.input_bytes, topology, params, activation_strategy(op))
    w_off, w_dist, w_bh, _ = _load_stream(w, op.weight_bytes, topology, params, WEIGHT_STRATEGY)

    out_grid = np.outer(np.asarray(partition.px, float), np.asarray(partition.py, float)) * op.bytes_per_element
    collect_bh = float((out_grid * topology.hop_matrix(HopStrategy.LowBw)).sum())

    c = OpCost(op.name, regime=regime)
    c.compute_s = combine_compute(op, partition, params)
    c.offchip_load_s = a_off
    c.distribute_s = a_dist
    c.weight_load_s = w_off + w_dist
    c.collect_s = collect_latency(op, topology, params)
    c.offchip_store_s = offchip_latency(op.output_bytes, params)
    c.e_compute_J = compute_energy(op, partition, params)
    c.e_onchip_J = onchip_energy(a_bh + w_bh + collect_bh, 1, params)
    c.e_offchip_J = offchip_energy(op.input_bytes + op.weight_bytes + op.output_bytes, params)
    return c


def end_to_end(task: TaskSequence, partitions: Sequence[Partition], topology: Topology,
               params: CostParams, redistribute: bool = False, async_fuse: bool = False,
               gather_positions: Optional[dict] = None) -> CostBreakdown:
    """Total cost of running ``task`` layer-sequentially.

    ``gather_positions`` optionally pins, per chained pair index, the
    per-row gathering column used by on-package redistribution.
    """
    from .redistribute import redistribution_cost, redistributable

    if len(partitions) != len(task.ops):
        raise ValueError(f"{len(partitions)} partitions for {len(task.ops)} ops")
    for op, part in zip(task.ops, partitions):
        part.validate(op, params.R, params.C, topology.X, topology.Y)

    costs = [op_cost(op, part, topology, params) for op, part in zip(task.ops, partitions)]

    if redistribute:
        for i in task.chained_pairs():
            src, dst = task.ops[i], task.ops[i + 1]
            if not redistributable(src, dst):
                continue
            pinned = (gather_positions or {}).get(i)
            plan = redistribution_cost(src, dst, partitions[i], partitions[i + 1], topology, params,
                                       gather_positions=pinned)
            ci, cj = costs[i], costs[i + 1]
            round_trip = ci.collect_s + ci.offchip_store_s + cj.offchip_load_s + cj.distribute_s
            if plan.total_s >= round_trip:
                continue
            # swap the memory round trip for the on-package plan
            a = activation_bytes_grid(dst, partitions[i + 1], topology.Y)
            _, _, a_bh, _ = _load_stream(a, dst.input_bytes, topology, params, activation_strategy(dst))
            out_grid = np.outer(np.asarray(partitions[i].px, float),
                                np.asarray(partitions[i].py, float)) * src.bytes_per_element
            collect_bh = float((out_grid * topology.hop_matrix(HopStrategy.LowBw)).sum())
            ci.e_onchip_J -= onchip_energy(collect_bh, 1, params)
            ci.e_offchip_J -= offchip_energy(src.output_bytes, params)
            cj.e_onchip_J -= onchip_energy(a_bh, 1, params)
            cj.e_offchip_J -= offchip_energy(dst.input_bytes, params)
            cj.e_onchip_J += plan.energy_J
            ci.collect_s = ci.offchip_store_s = 0.0
            cj.offchip_load_s = cj.distribute_s = 0.0
            cj.redistribute_s = plan.total_s
            cj.redistributed = True

    overlap = 0.0
    if async_fuse:
        for i in range(len(costs) - 1):
            if task.ops[i].sync:
                continue
            nxt = costs[i + 1]
            ready = nxt.weight_load_s
            if not task.chain[i]:
                ready += nxt.offchip_load_s + nxt.distribute_s
            overlap += min(costs[i].compute_s, ready)
    return CostBreakdown(costs, overlap)
