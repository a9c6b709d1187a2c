"""Brute-force references over the whole bounded lattice (small instances only)."""

from __future__ import annotations

import itertools
import time
from typing import Iterator, List, Optional, Sequence, Tuple

from ..costmodel import CostParams, Partition, end_to_end
from ..topology import Topology
from ..workload import GemmOp, TaskSequence
from .lattice import DimBounds, compositions, dim_bounds
from .miqp import QuadModel
from .solve import SolveResult


def _dim_options(b: DimBounds) -> List[Tuple[int, ...]]:
    if b.fixed:
        return [(b.q,) + (0,) * (b.parts - 1)]
    return list(compositions(b))


def op_options(op: GemmOp, X: int, Y: int, R: int, C: int) -> List[Partition]:
    """Every feasible partition of one operator, lexicographic in (px, py)."""
    bx, by = dim_bounds(op.M, X, R), dim_bounds(op.N, Y, C)
    return [Partition(bx.to_vec(ux), by.to_vec(uy))
            for ux in _dim_options(bx) for uy in _dim_options(by)]


def all_plans(task: TaskSequence, X: int, Y: int, R: int, C: int) -> Iterator[Tuple[Partition, ...]]:
    return itertools.product(*(op_options(op, X, Y, R, C) for op in task.ops))


def exhaustive_model(model: QuadModel, task: TaskSequence, X: int, Y: int, R: int, C: int) -> SolveResult:
    """Minimize the model objective by full enumeration; first minimum wins ties."""
    t0 = time.perf_counter()
    best, best_plan = float("inf"), None
    for plan in all_plans(task, X, Y, R, C):
        v = model.evaluate(plan)
        if v < best:
            best, best_plan = v, list(plan)
    status = "optimal" if best_plan is not None else "infeasible"
    return SolveResult(best_plan or [], best, time.perf_counter() - t0, status, method="exhaustive-model")


def exhaustive_search(task: TaskSequence, topology: Topology, params: CostParams,
                      objective: str = "latency", redistribute: bool = False,
                      async_fuse: bool = False, limit: Optional[int] = 200_000) -> SolveResult:
    """Minimize the true end-to-end cost by full enumeration (automatic gather positions)."""
    t0 = time.perf_counter()
    X, Y = topology.X, topology.Y
    options: Sequence[List[Partition]] = [op_options(op, X, Y, params.R, params.C) for op in task.ops]
    n = 1
    for o in options:
        n *= len(o)
    if limit is not None and n > limit:
        raise ValueError(f"{n} plans exceed the enumeration limit {limit}")
    best, best_plan = float("inf"), None
    for plan in itertools.product(*options):
        v = end_to_end(task, plan, topology, params, redistribute=redistribute,
                       async_fuse=async_fuse).objective(objective)
        if v < best:
            best, best_plan = v, list(plan)
    return SolveResult(best_plan, best, time.perf_counter() - t0, "optimal", method="exhaustive")
