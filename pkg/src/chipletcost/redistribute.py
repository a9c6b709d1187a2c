"""On-package redistribution between chained GEMMs.

Three steps replace the memory round trip of an intermediate result:
gather each chiplet row's output chunks at one column, broadcast the
gathered row block along the row, then move rows vertically to match the
next operator's row partition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from . import kernels
from .costmodel import CostParams, Partition, onchip_energy
from .topology import Topology
from .workload import GemmOp


@dataclass(frozen=True)
class RedistPlan:
    gather: Tuple[int, ...]
    s1: float
    s2: float
    s3: float
    energy_J: float

    @property
    def total_s(self) -> float:
        return self.s1 + self.s2 + self.s3


def gather_position(row_bytes: Sequence[float], bw_nop: float) -> Tuple[int, float]:
    """Column that balances left- and right-incoming traffic; ties go left."""
    if len(row_bytes) == 0:
        raise ValueError("row must have at least one chiplet")
    j, worst = kernels.gather_scan([float(b) for b in row_bytes])
    return j, worst / bw_nop


def gather_time(row_bytes: Sequence[float], j: int, bw_nop: float) -> float:
    return max(sum(row_bytes[:j]), sum(row_bytes[j + 1:])) / bw_nop


def row_moves(px_from: Sequence[int], px_to: Sequence[int]) -> List[Tuple[int, int, int]]:
    """(src_row, dst_row, n_rows) for output rows that change chiplet row."""
    def ranges(p):
        out, start = [], 0
        for v in p:
            out.append((start, start + v))
            start += v
        return out

    moves = []
    src_r, dst_r = ranges(px_from), ranges(px_to)
    for d, (dlo, dhi) in enumerate(dst_r):
        for s, (slo, shi) in enumerate(src_r):
            if s == d:
                continue
            n = min(dhi, shi) - max(dlo, slo)
            if n > 0:
                moves.append((s, d, n))
    return moves


def redistributable(src: GemmOp, dst: GemmOp) -> bool:
    # on-package reuse needs the same output rows to become the next input rows
    return src.N == dst.K and src.M == dst.M


def redistribution_cost(op_i: GemmOp, op_j: GemmOp, part_i: Partition, part_j: Partition,
                        topology: Topology, params: CostParams,
                        gather_positions: Optional[Sequence[int]] = None) -> RedistPlan:
    if op_i.N != op_j.K:
        raise ValueError(f"{op_i.name} -> {op_j.name} is not a chained pair")
    if op_i.M != op_j.M:
        raise ValueError(f"{op_i.name} -> {op_j.name}: row counts differ ({op_i.M} vs {op_j.M})")
    X, Y = topology.X, topology.Y
    bpe = op_i.bytes_per_element
    bw = params.bw_nop
    if gather_positions is not None and len(gather_positions) != X:
        raise ValueError("one gather position per chiplet row required")

    gather, s1, s2, byte_hops = [], 0.0, 0.0, 0.0
    for x in range(X):
        row = [part_i.px[x] * part_i.py[y] * bpe for y in range(Y)]
        if gather_positions is None:
            g, t1 = gather_position(row, bw)
        else:
            g = int(gather_positions[x])
            if not 0 <= g < Y:
                raise ValueError(f"gather position {g} outside row of {Y}")
            t1 = gather_time(row, g, bw)
        gather.append(g)
        block = part_i.px[x] * op_i.N * bpe
        s1 = max(s1, t1)
        s2 = max(s2, block / bw * max(g, Y - 1 - g))
        byte_hops += sum(b * abs(y - g) for y, b in enumerate(row))
        byte_hops += block * (Y - 1)

    # every column holds the full row blocks after broadcast, so all columns move alike
    down = up = 0.0
    for s, d, n in row_moves(part_i.px, part_j.px):
        bh = n * op_i.N * bpe * abs(d - s)
        if d > s:
            down += bh
        else:
            up += bh
        byte_hops += bh * Y
    s3 = max(down, up) / bw
    return RedistPlan(tuple(gather), s1, s2, s3, onchip_energy(byte_hops, 1, params))
