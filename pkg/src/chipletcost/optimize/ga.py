"""Genetic search over partitions and redistribution gather positions.

A genome holds, per operator, the unit vectors of the row and column
partitions and, per redistributable chained pair, one gather column per
chiplet row (``None`` means the balanced automatic choice). Fitness is the
true end-to-end objective.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..costmodel import CostParams, Partition, end_to_end
from ..redistribute import redistributable
from ..topology import Topology
from ..workload import TaskSequence
from .lattice import DimBounds, dim_bounds, even_units
from .solve import SolveResult

Units = Tuple[int, ...]
OpGene = Tuple[Units, Units]
Genome = Tuple[Tuple[OpGene, ...], Tuple[Optional[Tuple[int, ...]], ...]]


@dataclass(frozen=True)
class GAConfig:
    population: int = 64
    generations: int = 200
    mutation_rate: float = 0.2
    tournament: int = 4
    elitism: int = 2
    seed: int = 0
    time_limit_s: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation rate must lie in [0, 1]")
        if self.tournament < 1 or self.elitism < 0 or self.generations < 0:
            raise ValueError("bad GA configuration")


@dataclass
class _Problem:
    task: TaskSequence
    topology: Topology
    params: CostParams
    objective: str
    redistribute: bool
    async_fuse: bool
    bounds: List[Tuple[DimBounds, DimBounds]]
    pairs: List[int]

    def decode(self, g: Genome) -> Tuple[List[Partition], Dict[int, Tuple[int, ...]]]:
        parts = [Partition(bx.to_vec(ux), by.to_vec(uy))
                 for (bx, by), (ux, uy) in zip(self.bounds, g[0])]
        gather = {p: pos for p, pos in zip(self.pairs, g[1]) if pos is not None}
        return parts, gather

    def fitness(self, g: Genome) -> float:
        parts, gather = self.decode(g)
        return end_to_end(self.task, parts, self.topology, self.params,
                          redistribute=self.redistribute, async_fuse=self.async_fuse,
                          gather_positions=gather).objective(self.objective)


def _sort_key(g: Genome):
    return (g[0], tuple((-1,) if p is None else p for p in g[1]))


# worker-process state for concurrent fitness evaluation
_WORKER: Optional[_Problem] = None


def _init_worker(problem: _Problem) -> None:
    global _WORKER
    _WORKER = problem


def _worker_fitness(g: Genome) -> float:
    return _WORKER.fitness(g)


def _random_units(b: DimBounds, rng: random.Random, steps: int) -> Units:
    u = list(even_units(b))
    if b.fixed:
        return tuple(u)
    for _ in range(steps):
        i, j = rng.randrange(b.parts), rng.randrange(b.parts)
        if i != j and u[i] > b.lo_at(i) and u[j] < b.hi:
            u[i] -= 1
            u[j] += 1
    return tuple(u)


def _move_unit(u: Units, b: DimBounds, rng: random.Random, tries: int = 8) -> Units:
    """Shift one array-size unit between two entries, respecting bounds."""
    if b.fixed:
        return u
    for _ in range(tries):
        i, j = rng.randrange(b.parts), rng.randrange(b.parts)
        if i != j and u[i] > b.lo_at(i) and u[j] < b.hi:
            v = list(u)
            v[i] -= 1
            v[j] += 1
            return tuple(v)
    return u


def ga_optimize(task: TaskSequence, topology: Topology, params: CostParams, objective: str = "latency",
                config: Optional[GAConfig] = None, redistribute: bool = False,
                async_fuse: bool = False) -> SolveResult:
    cfg = config or GAConfig()
    t0 = time.perf_counter()
    X, Y = topology.X, topology.Y
    bounds = [(dim_bounds(op.M, X, params.R), dim_bounds(op.N, Y, params.C)) for op in task.ops]
    pairs = [i for i in task.chained_pairs() if redistributable(task.ops[i], task.ops[i + 1])] \
        if redistribute else []
    prob = _Problem(task, topology, params, objective, redistribute, async_fuse, bounds, pairs)
    rng = random.Random(cfg.seed)

    uniform: Genome = (tuple((even_units(bx), even_units(by)) for bx, by in bounds),
                       tuple(None for _ in pairs))

    def random_genome() -> Genome:
        ops = tuple((_random_units(bx, rng, 4 * bx.parts), _random_units(by, rng, 4 * by.parts))
                    for bx, by in bounds)
        gat = tuple(None if rng.random() < 0.5 else tuple(rng.randrange(Y) for _ in range(X))
                    for _ in pairs)
        return ops, gat

    def mutate(g: Genome) -> Genome:
        ops = []
        for (ux, uy), (bx, by) in zip(g[0], bounds):
            if rng.random() < cfg.mutation_rate:
                if rng.random() < 0.5:
                    ux = _move_unit(ux, bx, rng)
                else:
                    uy = _move_unit(uy, by, rng)
            ops.append((ux, uy))
        gat = []
        for pos in g[1]:
            if rng.random() < cfg.mutation_rate:
                if pos is None:
                    pos = tuple(rng.randrange(Y) for _ in range(X))
                else:
                    v = list(pos)
                    v[rng.randrange(X)] = rng.randrange(Y)
                    pos = tuple(v)
            gat.append(pos)
        return tuple(ops), tuple(gat)

    def crossover(a: Genome, b: Genome) -> Genome:
        ops = tuple(x if rng.random() < 0.5 else y for x, y in zip(a[0], b[0]))
        gat = tuple(x if rng.random() < 0.5 else y for x, y in zip(a[1], b[1]))
        return ops, gat

    cache: Dict[Genome, float] = {}
    pool = None
    if cfg.workers > 1:
        pool = ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(prob,))

    def evaluate(pop: Sequence[Genome]) -> None:
        todo = list(dict.fromkeys(g for g in pop if g not in cache))
        if pool is not None and len(todo) > 1:
            vals = list(pool.map(_worker_fitness, todo))
        else:
            vals = [prob.fitness(g) for g in todo]
        cache.update(zip(todo, vals))

    def rank(pop: Sequence[Genome]) -> List[Genome]:
        return sorted(pop, key=lambda g: (cache[g], _sort_key(g)))

    timed_out = False
    gens = 0
    try:
        pop = [uniform] + [random_genome() for _ in range(cfg.population - 1)]
        evaluate(pop)
        for gen in range(cfg.generations):
            if cfg.time_limit_s is not None and time.perf_counter() - t0 > cfg.time_limit_s:
                timed_out = True
                break
            ranked = rank(pop)
            nxt = ranked[:min(cfg.elitism, len(ranked))]

            def pick() -> Genome:
                group = [pop[rng.randrange(len(pop))] for _ in range(cfg.tournament)]
                return min(group, key=lambda g: (cache[g], _sort_key(g)))

            while len(nxt) < cfg.population:
                nxt.append(mutate(crossover(pick(), pick())))
            pop = nxt
            evaluate(pop)
            gens = gen + 1
    finally:
        if pool is not None:
            pool.shutdown()

    best = min(cache, key=lambda g: (cache[g], _sort_key(g)))
    parts, gather = prob.decode(best)
    return SolveResult(parts, cache[best], time.perf_counter() - t0,
                       "feasible-timeout" if timed_out else "optimal",
                       gather_positions=gather or None, method="ga",
                       info={"evaluations": len(cache), "generations": gens,
                             "uniform_objective": cache[uniform]})
