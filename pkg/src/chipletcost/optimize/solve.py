"""Solvers for ``QuadModel``: exact lattice search and an external LP hand-off."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .. import kernels
from ..costmodel import Partition
from .lattice import DimBounds, candidate_array, count_compositions, even_units
from .miqp import OpBlock, QuadModel

MAX_CANDIDATES = 10 ** 7
STATUSES = ("optimal", "feasible-timeout", "infeasible")


@dataclass
class SolveResult:
    partitions: List[Partition]
    objective: float
    wall_time_s: float
    status: str
    gather_positions: Optional[Dict[int, tuple]] = None
    method: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")


def _dim_candidates(b: DimBounds) -> np.ndarray:
    if b.fixed:
        return np.array([(b.q,) + (0,) * (b.parts - 1)], dtype=np.int64)
    return candidate_array(b)


def _dim_count(b: DimBounds) -> int:
    return 1 if b.fixed else count_compositions(b)


def search_space_size(model: QuadModel) -> int:
    return sum(_dim_count(blk.bx) * _dim_count(blk.by) for blk in model.blocks)


def _block_arrays(blk: OpBlock, cand: np.ndarray, b: DimBounds):
    vals = cand * b.unit
    vals[:, 0] += b.rem
    folds = cand.copy()
    if b.rem:
        folds[:, 0] += 1
    return folds, vals.astype(np.float64)


def _energy_matrix(blk: OpBlock, PX: np.ndarray, PY: np.ndarray) -> np.ndarray:
    ex = PX @ blk.alpha
    ey = PY @ blk.beta
    quad = PX @ blk.gamma @ PY.T
    return ((ex[:, None] + ey[None, :]) + quad) + blk.e0


def _block_value(model: QuadModel, blk: OpBlock, ux, uy) -> float:
    FX, PX = _block_arrays(blk, np.array([ux], dtype=np.int64), blk.bx)
    FY, PY = _block_arrays(blk, np.array([uy], dtype=np.int64), blk.by)
    return _search(model, blk, FX, PX, FY, PY, np.inf)[0]


def _search(model, blk, FX, PX, FY, PY, best):
    wl, we = model.weights
    extra = None
    if we:
        extra = we * _energy_matrix(blk, PX, PY)
    v, i, j = kernels.op_grid_search(FX, FY, PX, PY, blk.comp_coef * wl, blk.A * wl, blk.B * wl,
                                     blk.Cst * wl, best, extra)
    return v, i, j


def solve_exact(model: QuadModel, time_limit_s: Optional[float] = None, chunk: int = 512) -> SolveResult:
    """Enumerate the bounded lattice per operator with pruning.

    The model objective is a sum of per-operator terms, so each operator is
    minimized independently. Candidates are scanned in lexicographic order
    and only strict improvements are taken, which yields the
    lexicographically smallest optimal partition.
    """
    t0 = time.perf_counter()
    deadline = None if time_limit_s is None else t0 + time_limit_s
    size = search_space_size(model)
    if size > MAX_CANDIDATES:
        raise ValueError(f"search space of {size} candidates exceeds {MAX_CANDIDATES}")
    for blk in model.blocks:
        for b in (blk.bx, blk.by):
            if not b.feasible():
                return SolveResult([], float("nan"), time.perf_counter() - t0, "infeasible", method="exact")

    wl, _ = model.weights
    timed_out = time_limit_s is not None and time_limit_s <= 0
    chosen = []
    total = 0.0
    for blk in model.blocks:
        # incumbent: the even split
        ux, uy = even_units(blk.bx), even_units(blk.by)
        best_val = _block_value(model, blk, ux, uy)
        best_ux, best_uy = ux, uy
        if not timed_out:
            CX, CY = _dim_candidates(blk.bx), _dim_candidates(blk.by)
            FY, PY = _block_arrays(blk, CY, blk.by)
            # ties with the incumbent must still be found, hence the nudge
            bound = np.nextafter(best_val, np.inf)
            for s in range(0, len(CX), chunk):
                if deadline is not None and time.perf_counter() > deadline:
                    timed_out = True
                    break
                FX, PX = _block_arrays(blk, CX[s:s + chunk], blk.bx)
                v, i, j = _search(model, blk, FX, PX, FY, PY, bound)
                if i >= 0:
                    bound = best_val = v
                    best_ux, best_uy = tuple(int(a) for a in CX[s + i]), tuple(int(a) for a in CY[j])
        chosen.append(Partition(blk.bx.to_vec(best_ux), blk.by.to_vec(best_uy)))
        total += best_val + wl * blk.const

    objective = model.evaluate(chosen)
    status = "feasible-timeout" if timed_out else "optimal"
    return SolveResult(chosen, objective, time.perf_counter() - t0, status, method="exact",
                       info={"candidates": size, "block_sum": total})


def solve(model: QuadModel, backend: str = "exact", time_limit_s: Optional[float] = None,
          lp_path=None, solution_path=None) -> SolveResult:
    """Solve with the built-in exact search, or hand the model to an external solver.

    The external backend writes ``lp_path`` and reads back ``solution_path``
    (``name value`` lines) produced by any LP-format MIQP solver.
    """
    if backend == "exact":
        return solve_exact(model, time_limit_s)
    if backend == "external":
        from .lpio import export_lp, read_solution

        if lp_path is None or solution_path is None:
            raise ValueError("external backend needs lp_path and solution_path")
        t0 = time.perf_counter()
        export_lp(model, lp_path)
        if not Path(solution_path).exists():
            raise FileNotFoundError(f"no solution file at {solution_path}; run a solver on {lp_path}")
        values, status = read_solution(solution_path)
        if status == "infeasible":
            return SolveResult([], float("nan"), time.perf_counter() - t0, status, method="external")
        env = {v.name: values[v.name] for v in model.integer_vars}
        env.update(model.aux_values(env))
        if not model.feasible(env):
            raise ValueError("solution violates the model constraints")
        parts = model.partitions_from(env)
        return SolveResult(parts, model.evaluate_env(env), time.perf_counter() - t0, status,
                           method="external")
    raise ValueError(f"unknown backend {backend!r}")
