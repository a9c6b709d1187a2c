"""Partition search: baselines, genetic search, quadratic model and exact solvers."""

from __future__ import annotations

import time
from typing import Optional

from ..costmodel import CostParams, end_to_end
from ..topology import Topology
from ..workload import TaskSequence
from .baselines import simba_partition, simba_plan, uniform_partition, uniform_plan
from .exhaustive import exhaustive_model, exhaustive_search
from .ga import GAConfig, ga_optimize
from .lattice import DimBounds, dim_bounds
from .lpio import export_lp, read_lp, read_solution, write_solution
from .miqp import DEFAULT_SCALE, QuadModel, build_miqp, taylor_reciprocal
from .solve import SolveResult, solve

OPTIMIZERS = ("uniform", "simba", "ga", "miqp")


def run_optimizer(name: str, task: TaskSequence, topology: Topology, params: CostParams,
                  objective: str = "latency", ga_config: Optional[GAConfig] = None,
                  time_limit_s: Optional[float] = None, redistribute: bool = False,
                  async_fuse: bool = False, lp_path=None) -> SolveResult:
    """Run one optimizer; ``objective`` of the result is the true end-to-end cost.

    For ``miqp`` the model objective is kept in ``info["model_objective"]``.
    """
    t0 = time.perf_counter()
    info = {}
    gather = None
    status = "optimal"
    if name == "uniform":
        parts = uniform_plan(task, topology, params.R, params.C)
    elif name == "simba":
        parts = simba_plan(task, topology, params.R, params.C)
    elif name == "ga":
        cfg = ga_config or GAConfig()
        if time_limit_s is not None:
            cfg = GAConfig(**{**cfg.__dict__, "time_limit_s": time_limit_s})
        res = ga_optimize(task, topology, params, objective, cfg, redistribute, async_fuse)
        parts, gather, status, info = res.partitions, res.gather_positions, res.status, res.info
    elif name == "miqp":
        model = build_miqp(task, topology, params, objective)
        if lp_path is not None:
            export_lp(model, lp_path)
        res = solve(model, "exact", time_limit_s)
        if res.status == "infeasible":
            return res
        parts, status = res.partitions, res.status
        info = {"model_objective": res.objective, **res.info}
    else:
        raise ValueError(f"unknown optimizer {name!r}; choose from {OPTIMIZERS}")
    cost = end_to_end(task, parts, topology, params, redistribute=redistribute,
                      async_fuse=async_fuse, gather_positions=gather)
    info["breakdown"] = cost
    return SolveResult(parts, cost.objective(objective), time.perf_counter() - t0, status,
                       gather_positions=gather, method=name, info=info)


__all__ = [
    "DEFAULT_SCALE", "DimBounds", "GAConfig", "OPTIMIZERS", "QuadModel", "SolveResult",
    "build_miqp", "dim_bounds", "exhaustive_model", "exhaustive_search", "export_lp",
    "ga_optimize", "read_lp", "read_solution", "run_optimizer", "simba_partition", "simba_plan",
    "solve", "taylor_reciprocal", "uniform_partition", "uniform_plan", "write_solution",
]
