"""Reference partitions: even split and a distance-weighted heuristic."""

from __future__ import annotations

from typing import List, Sequence

from ..costmodel import Partition
from ..topology import Topology
from ..workload import GemmOp, TaskSequence
from .lattice import dim_bounds, even_units


def uniform_partition(op: GemmOp, X: int, Y: int, R: int, C: int) -> Partition:
    bx, by = dim_bounds(op.M, X, R), dim_bounds(op.N, Y, C)
    return Partition(bx.to_vec(even_units(bx)), by.to_vec(even_units(by)))


def _weighted_split(dim: int, weights: Sequence[float], unit: int) -> List[int]:
    q, rem = divmod(dim, unit)
    if q == 0:
        return [dim] + [0] * (len(weights) - 1)
    total = sum(weights)
    units = [round(q * w / total) for w in weights]
    largest = lambda: max(range(len(units)), key=lambda i: (units[i], -i))  # noqa: E731
    # repair the sum on the largest entry (first one on ties)
    k = largest()
    units[k] += q - sum(units)
    while units[k] < 0:
        # rounding overshot more than the largest entry holds: spread the excess
        excess, units[k] = -units[k], 0
        k = largest()
        units[k] -= excess
    if rem and units[0] == 0:
        # the leftover alone would sit below one array width on entry 0
        units[largest()] -= 1
        units[0] = 1
    vec = [a * unit for a in units]
    vec[0] += rem
    return vec


def simba_partition(op: GemmOp, topology: Topology, R: int, C: int) -> Partition:
    """Rows and columns get work inversely proportional to their distance to memory."""
    X, Y = topology.X, topology.Y
    wx = [1.0 / (1 + min(topology.local_index[(r, c)][0] for c in range(Y))) for r in range(X)]
    wy = [1.0 / (1 + min(topology.local_index[(r, c)][1] for r in range(X))) for c in range(Y)]
    return Partition(_weighted_split(op.M, wx, R), _weighted_split(op.N, wy, C))


def uniform_plan(task: TaskSequence, topology: Topology, R: int, C: int) -> List[Partition]:
    return [uniform_partition(op, topology.X, topology.Y, R, C) for op in task.ops]


def simba_plan(task: TaskSequence, topology: Topology, R: int, C: int) -> List[Partition]:
    return [simba_partition(op, topology, R, C) for op in task.ops]
