"""Acceptance criteria, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see
conftest.py); each test also checks its own runtime budget.
"""

import itertools
import math
import random
import statistics
import time

import pytest

from chipletcost import CostParams, GemmOp, GridSpec, HopStrategy, Partition, TaskSequence, build_topology
from chipletcost import end_to_end, pipeline
from chipletcost.netsim import MEM, run_scenario, validate_hops
from chipletcost.optimize import (GAConfig, build_miqp, ga_optimize, run_optimizer, solve,
                                  taylor_reciprocal, uniform_plan)
from chipletcost.optimize.solve import search_space_size
from chipletcost.workload import alexnet_mini, bundled_tasks, gemm_chain

pytestmark = pytest.mark.acceptance


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


def test_criterion_01_dram_congestion_invariance():
    """DRAM pulls finish in 16/60 s regardless of NoP bandwidth."""
    with Budget(1.0):
        for nop in (60, 120):
            _, r = run_scenario("dram", nop, grid=4, gbytes=1.0)
            assert r.completion_s == pytest.approx(16 / 60, rel=0.02)


def test_criterion_02_hbm_nop_scaling():
    """With HBM, doubling NoP bandwidth halves completion time."""
    with Budget(1.0):
        _, a = run_scenario("hbm-periph", 60)
        _, b = run_scenario("hbm-periph", 120)
        assert a.completion_s / b.completion_s == pytest.approx(2.0, rel=0.05)


def test_criterion_03_central_vs_peripheral_hbm():
    """Central HBM beats peripheral HBM by a factor in [1.2, 1.9]."""
    with Budget(1.0):
        _, periph = run_scenario("hbm-periph", 60)
        _, central = run_scenario("hbm-central", 60)
        ratio = periph.completion_s / central.completion_s
        assert central.completion_s < periph.completion_s
        assert 1.2 <= ratio <= 1.9, ratio


def test_criterion_04_hop_formula_oracle():
    """Closed-form hop counts match simulated transfers everywhere."""
    bad = []
    with Budget(10.0):
        for X, Y in itertools.product(range(1, 9), repeat=2):
            for pkg in "ABCD":
                for diag in (False, True):
                    topo = build_topology(GridSpec(X, Y, pkg, diag))
                    # NonShared is bandwidth-bound and has no hop count
                    for s in (x for x in HopStrategy if x is not HopStrategy.NonShared):
                        bad += validate_hops(topo, s).mismatches
    assert bad == []


def _random_chain(rng, k, max_dim):
    M = 16 * rng.randint(2, max_dim // 16)
    dims = [16 * rng.randint(2, max_dim // 16) for _ in range(k + 1)]
    return gemm_chain(k, M=M, dims=dims)


def test_criterion_05_optimizer_dominance():
    """exact <= GA under the model objective and GA <= uniform on true cost."""
    rng = random.Random(2024)
    with Budget(300.0):
        for case in range(10):
            n = 2 if case % 2 == 0 else 4
            memory = "HBM" if case % 4 < 2 else "DRAM"
            objective = "latency" if case < 5 else "edp"
            topo = build_topology(GridSpec(n, n, "A"))
            params = CostParams.for_memory(memory)
            task = _random_chain(rng, rng.randint(2, 3), 128 if n == 2 else 256)
            model = build_miqp(task, topo, params, objective)
            assert search_space_size(model) < 10 ** 6
            exact = solve(model)
            ga = ga_optimize(task, topo, params, objective, GAConfig(seed=case))
            uni = end_to_end(task, uniform_plan(task, topo, 16, 16), topo, params).objective(objective)
            assert exact.status == "optimal"
            assert exact.objective <= model.evaluate(ga.partitions)
            assert ga.objective <= uni


def _independent_options(op, X, Y, R, C):
    """Every feasible partition of one op, enumerated without the lattice helpers."""

    def vectors(dim, parts, unit):
        q, rem = divmod(dim, unit)
        if q == 0 or parts == 1:
            return [(dim,) + (0,) * (parts - 1)]
        c = math.ceil(dim / (parts * unit))
        lo = max(c - 2, 1) if q >= parts else 0
        hi = min(c + 2, q)
        out = []
        for v in itertools.product(range(0, dim + 1), repeat=parts):
            if sum(v) != dim:
                continue
            units = [(x - (rem if k == 0 else 0)) for k, x in enumerate(v)]
            if any(u < 0 or u % unit for u in units):
                continue
            units = [u // unit for u in units]
            if all(lo <= u <= hi for u in units) and all(x == 0 or x >= unit for x in v):
                out.append(v)
        return out

    return [Partition(px, py) for px in vectors(op.M, X, R) for py in vectors(op.N, Y, C)]


def _criterion6_instances():
    rng = random.Random(6)
    out = []
    for case in range(8):
        k = rng.randint(1, 3)
        M = rng.choice([16, 17, 32, 40, 48, 64])
        dims = [rng.choice([16, 24, 32, 48, 64]) for _ in range(k + 1)]
        memory = "HBM" if case % 2 else "DRAM"
        objective = "edp" if case % 4 >= 2 else "latency"
        out.append((gemm_chain(k, M=M, dims=dims), CostParams.for_memory(memory), objective))
    return out


def test_criterion_06_brute_force_equivalence():
    """The exact solver equals full enumeration on small 2x2 instances."""
    topo = build_topology(GridSpec(2, 2))
    with Budget(120.0):
        for task, params, objective in _criterion6_instances():
            model = build_miqp(task, topo, params, objective)
            got = solve(model)
            best, best_plan = math.inf, None
            options = [_independent_options(op, 2, 2, 16, 16) for op in task.ops]
            for plan in itertools.product(*options):
                v = model.evaluate(plan)
                if v < best:
                    best, best_plan = v, list(plan)
            assert got.partitions == best_plan
            assert got.objective == pytest.approx(best, rel=1e-12)


def test_criterion_07_redistribution_benefit():
    """On-package redistribution never hurts and helps at least one pair."""
    with Budget(10.0):
        task = alexnet_mini()
        topo = build_topology(GridSpec(4, 4))
        params = CostParams.for_memory("HBM")
        parts = uniform_plan(task, topo, 16, 16)
        on = end_to_end(task, parts, topo, params, redistribute=True)
        off = end_to_end(task, parts, topo, params)
        assert on.latency_s <= off.latency_s
        pair = lambda bd, i: bd.ops[i].latency_s + bd.ops[i + 1].latency_s  # noqa: E731
        assert any(pair(on, i) < pair(off, i) for i in task.chained_pairs())


def test_criterion_08_pipelining_stability():
    """Per-sample speedup is flat across batch sizes; the exact schedule hits 9."""
    with Budget(30.0):
        task = bundled_tasks()["gemm-chain-4"]
        topo = build_topology(GridSpec(4, 4))
        params = CostParams()
        bd = run_optimizer("uniform", task, topo, params).info["breakdown"]
        speedups = []
        for b in (2, 4, 8):
            tasks = pipeline.build_rcpsp(bd, b)
            sched = pipeline.list_schedule(tasks)
            pipeline.check_schedule(sched)
            serial = pipeline.serial_schedule(tasks).makespan
            speedups.append(pipeline.per_sample_speedup(sched, serial / b, b))
        cv = statistics.pstdev(speedups) / statistics.mean(speedups)
        assert cv < 0.10, (speedups, cv)
        tasks = pipeline.chain_tasks([(2.0, 3.0, 1.0)], 2)
        sched = pipeline.exact_schedule(tasks)
        assert sched.optimal and sched.makespan == 9.0
        assert pipeline.serial_schedule(tasks).makespan == 12.0


def test_criterion_09_transform_fidelity():
    """Taylor error stays under 2% for |x| <= 0.1c; scaling keeps the argmin."""
    rng = random.Random(9)
    worst = 0.0
    for _ in range(10000):
        c = 10 ** rng.uniform(-3, 6)
        x = rng.uniform(-0.1, 0.1) * c
        coef = rng.uniform(0.1, 10.0)
        exact = coef / (c + x)
        approx = coef * taylor_reciprocal(c, x)
        worst = max(worst, abs(approx - exact) / exact)
    assert worst < 0.02
    topo = build_topology(GridSpec(2, 2))
    for task, params, objective in _criterion6_instances():
        ref = solve(build_miqp(task, topo, params, objective)).partitions
        for scale in (1.0, 2.0 ** 10, 2.0 ** 30):
            assert solve(build_miqp(task, topo, params, objective, scale=scale)).partitions == ref


def test_criterion_10_invariant_suites():
    """The property suites run at least 1000 randomized cases each."""
    import test_properties as props

    names = ["test_partition_sum_and_bounds", "test_baselines_are_valid",
             "test_edp_is_latency_times_energy", "test_latency_monotone_in_bandwidth",
             "test_schedules_respect_resources"]
    for name in names:
        fn = getattr(props, name)
        assert fn.hypothesis.inner_test is not None
        assert fn._hypothesis_internal_use_settings.max_examples >= 1000
    assert props.N >= 1000
