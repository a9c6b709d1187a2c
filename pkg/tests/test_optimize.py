import math

import pytest

from chipletcost import CostParams, GemmOp, GridSpec, Partition, TaskSequence, build_topology, end_to_end
from chipletcost.optimize import (GAConfig, build_miqp, exhaustive_model, exhaustive_search, ga_optimize,
                                  run_optimizer, simba_partition, solve, taylor_reciprocal,
                                  uniform_partition, uniform_plan)
from chipletcost.optimize.lattice import compositions, count_compositions, dim_bounds, even_units
from chipletcost.optimize.miqp import Expr, reciprocal_terms
from chipletcost.workload import gemm_chain


def _op(M, N=64):
    return GemmOp("g", M, 64, N)


@pytest.mark.parametrize("M,expected", [(64, (16, 16, 16, 16)), (80, (32, 16, 16, 16)), (8, (8, 0, 0, 0))])
def test_uniform_examples(M, expected):
    assert uniform_partition(_op(M), 4, 1, 16, 16).px == expected


def test_uniform_leftover_goes_to_row_zero():
    assert uniform_partition(_op(169), 4, 1, 16, 16).px == (57, 48, 32, 32)


def test_simba_examples():
    assert simba_partition(_op(96), build_topology(GridSpec(2, 1)), 16, 16).px == (64, 32)
    assert simba_partition(_op(64), build_topology(GridSpec(4, 4)), 16, 16).px == (32, 16, 16, 0)
    tb = build_topology(GridSpec(4, 4, "B"))
    assert simba_partition(_op(64), tb, 16, 16).px == uniform_partition(_op(64), 4, 4, 16, 16).px


def test_lattice_bounds():
    b = dim_bounds(256, 4, 16)
    assert (b.q, b.lo, b.hi) == (16, 2, 6)
    assert dim_bounds(64, 8, 16).lo == 0  # fewer units than rows
    assert dim_bounds(8, 4, 16).fixed
    b = dim_bounds(169, 4, 16)
    vecs = list(compositions(b))
    assert vecs == sorted(vecs) and len(vecs) == count_compositions(b)
    assert all(b.contains(v) for v in vecs)
    assert b.to_units(b.to_vec(even_units(b))) == even_units(b)
    with pytest.raises(ValueError):
        b.to_units((50, 48, 32, 39))


def test_taylor_examples():
    assert 1 / 105 == pytest.approx(0.009524, abs=1e-6)
    assert taylor_reciprocal(100, 5) == pytest.approx(0.0095)
    assert abs(taylor_reciprocal(100, 5) * 105 - 1) == pytest.approx(0.0025, rel=1e-6)
    assert taylor_reciprocal(7.0, 0.0) == 7.0 / 49.0
    e = reciprocal_terms(100.0, "x", coef=2.0)
    assert e.value({"x": 5.0}) == pytest.approx(2 * 0.0095)


def test_expr_degree_guard():
    x = Expr.var("x")
    q = x * x
    assert q.degree == 2
    with pytest.raises(ValueError):
        q * x


def test_model_counts_2x1():
    m = build_miqp(TaskSequence([GemmOp("g", 64, 64, 64)]), build_topology(GridSpec(2, 1)), CostParams())
    assert len(m.integer_vars) == 2
    assert len(m.constraints_of("sum")) == 1
    assert len(m.aux_vars) == 1
    assert m.max_degree() <= 2


def test_model_determinism():
    t = gemm_chain(3, M=96, dims=[96, 64, 48, 80])
    topo = build_topology(GridSpec(2, 2))
    a, b = build_miqp(t, topo, CostParams()), build_miqp(t, topo, CostParams())
    assert a.variables == b.variables and a.constraints == b.constraints and a.objective == b.objective
    with pytest.raises(ValueError):
        build_miqp(t, topo, CostParams(), "power")


def test_single_feasible_point():
    m = build_miqp(gemm_chain(1), build_topology(GridSpec(4, 4)), CostParams())
    r = solve(m)
    assert r.status == "optimal" and r.partitions == [Partition([16] * 4, [16] * 4)]


def test_time_limit_zero_returns_uniform():
    t = gemm_chain(2, M=128, dims=[128, 96, 64])
    topo = build_topology(GridSpec(2, 2))
    r = solve(build_miqp(t, topo, CostParams()), time_limit_s=0)
    assert r.status == "feasible-timeout"
    assert r.partitions == uniform_plan(t, topo, 16, 16)


@pytest.mark.parametrize("objective", ["latency", "edp"])
def test_exact_matches_brute_force(objective):
    t = gemm_chain(2, M=64, dims=[64, 48, 64])
    topo = build_topology(GridSpec(2, 2))
    m = build_miqp(t, topo, CostParams.for_memory("DRAM"), objective)
    r = solve(m)
    e = exhaustive_model(m, t, 2, 2, 16, 16)
    assert r.partitions == e.partitions
    assert r.objective == pytest.approx(e.objective, rel=1e-12)


def test_scaling_does_not_move_argmin():
    t = gemm_chain(3, M=64, dims=[64, 48, 64, 32])
    topo = build_topology(GridSpec(2, 2))
    a = solve(build_miqp(t, topo, CostParams(), scale=2 ** 20))
    b = solve(build_miqp(t, topo, CostParams(), scale=2 ** 5))
    assert a.partitions == b.partitions
    assert a.objective * 2 ** 20 == b.objective * 2 ** 5


def test_ga_examples(params):
    one = build_topology(GridSpec(1, 1))
    r = ga_optimize(gemm_chain(2), one, params, config=GAConfig(generations=3))
    assert r.partitions == uniform_plan(gemm_chain(2), one, 16, 16)
    t = gemm_chain(2)
    topo = build_topology(GridSpec(2, 2))
    g = ga_optimize(t, topo, params, config=GAConfig(generations=40, seed=3))
    e = exhaustive_search(t, topo, params)
    assert g.objective == e.objective and g.partitions == e.partitions
    assert g.objective <= g.info["uniform_objective"]


def test_ga_is_seed_deterministic(params):
    t = gemm_chain(3, M=128, dims=[128, 96, 64, 80])
    topo = build_topology(GridSpec(4, 4))
    cfg = GAConfig(population=12, generations=10, seed=11)
    a = ga_optimize(t, topo, params, "edp", cfg)
    b = ga_optimize(t, topo, params, "edp", cfg)
    assert a.partitions == b.partitions and a.objective == b.objective


def test_ga_with_redistribution_genes(params):
    from chipletcost.workload import alexnet_mini
    topo = build_topology(GridSpec(2, 2))
    r = ga_optimize(alexnet_mini(), topo, params, config=GAConfig(population=8, generations=4),
                    redistribute=True)
    assert r.objective <= r.info["uniform_objective"]
    again = end_to_end(alexnet_mini(), r.partitions, topo, params, redistribute=True,
                       gather_positions=r.gather_positions)
    assert again.latency_s == r.objective


def test_ga_config_validation():
    with pytest.raises(ValueError):
        GAConfig(population=1)
    with pytest.raises(ValueError):
        GAConfig(mutation_rate=1.5)


def test_run_optimizer_dispatch(params):
    t = gemm_chain(2, M=96, dims=[96, 64, 48])
    topo = build_topology(GridSpec(2, 2))
    res = {n: run_optimizer(n, t, topo, params, ga_config=GAConfig(generations=5))
           for n in ("uniform", "simba", "ga", "miqp")}
    assert res["ga"].objective <= res["uniform"].objective
    assert not math.isnan(res["miqp"].info["model_objective"])
    with pytest.raises(ValueError):
        run_optimizer("anneal", t, topo, params)


def test_search_space_guard():
    from chipletcost.optimize.solve import MAX_CANDIDATES, search_space_size
    t = gemm_chain(1, M=4096, dims=[4096, 4096])
    m = build_miqp(t, build_topology(GridSpec(8, 8)), CostParams())
    assert search_space_size(m) > MAX_CANDIDATES
    with pytest.raises(ValueError, match="exceeds"):
        solve(m)


def test_leftover_row_keeps_a_whole_unit():
    b = dim_bounds(17, 2, 16)
    assert (b.lo, b.lo0) == (0, 1)
    assert list(compositions(b)) == [(1, 0)]
    assert not b.contains((0, 1))
    tb = build_topology(GridSpec(2, 1, "B"))
    assert simba_partition(_op(17), tb, 16, 16).px == (17, 0)
    assert simba_partition(_op(33), build_topology(GridSpec(4, 1)), 16, 16).px == (33, 0, 0, 0)
