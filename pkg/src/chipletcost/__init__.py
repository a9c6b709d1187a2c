"""Cost modeling and workload partitioning for multi-chip-module DNN accelerators."""

from .costmodel import CostBreakdown, CostParams, Partition, end_to_end
from .topology import GridSpec, HopStrategy, Topology, build_topology, hops
from .workload import BatchSpec, GemmOp, TaskSequence, bundled_tasks, load_task

__version__ = "0.1.0"

__all__ = [
    "BatchSpec", "CostBreakdown", "CostParams", "GemmOp", "GridSpec", "HopStrategy",
    "Partition", "TaskSequence", "Topology", "build_topology", "bundled_tasks",
    "end_to_end", "hops", "load_task",
]
