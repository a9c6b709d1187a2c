import numpy as np
import pytest

from chipletcost import CostParams, GemmOp, GridSpec, Partition, TaskSequence, build_topology, end_to_end
from chipletcost.costmodel import (GB, PJ, activation_bytes_grid, collect_latency, combine_compute,
                                   compute_energy, compute_latency_chiplet, distribute_latency,
                                   offchip_energy, offchip_latency, onchip_energy, op_cost,
                                   stream_distribute)
from chipletcost.topology import HopStrategy
from chipletcost.workload import alexnet_mini, gemm_chain

OP16 = GemmOp("g", 16, 16, 16)


def test_compute_latency_examples(params):
    assert compute_latency_chiplet(OP16, Partition([16], [16]), params, 0, 0) == 62
    assert compute_latency_chiplet(GemmOp("g", 32, 16, 16), Partition([32], [16]), params, 0, 0) == 124
    assert compute_latency_chiplet(OP16, Partition([0, 16], [16]), params, 0, 0) == 0


def test_combine_compute(params):
    op = GemmOp("g", 48, 16, 32)
    assert combine_compute(op, Partition([32, 16], [16, 16]), params) == pytest.approx(124e-9)
    uni = Partition([16, 16], [16, 16])
    op2 = GemmOp("g", 32, 16, 32)
    assert combine_compute(op2, uni, params) == compute_latency_chiplet(op2, uni, params, 1, 1) / 1e9
    # one non-empty row only
    assert combine_compute(GemmOp("g", 16, 16, 16), Partition([0, 16], [16]), params) == 62e-9


def test_collect_latency(params):
    op = GemmOp("g", 64, 64, 64)
    t = build_topology(GridSpec(4, 4))
    assert collect_latency(op, t, params) == pytest.approx(4096 / 120e9)
    assert collect_latency(op, t, params) == pytest.approx(3.41e-8, rel=1e-3)
    td = build_topology(GridSpec(4, 4, "A", True))
    assert collect_latency(op, td, params) == pytest.approx(collect_latency(op, t, params) * 2 / 3)
    one_link = build_topology(GridSpec(2, 1))
    assert collect_latency(op, one_link, params) == pytest.approx(4096 / 60e9)
    assert collect_latency(op, build_topology(GridSpec(1, 1)), params) == 0.0


def test_offchip_latency():
    p = CostParams.for_memory("DRAM")
    assert offchip_latency(0, p) == 0
    assert offchip_latency(16 * GB, p) == pytest.approx(0.26667, rel=1e-4)
    assert offchip_latency(16 * GB, CostParams()) == pytest.approx(0.016)
    with pytest.raises(ValueError):
        offchip_latency(-1, p)


def test_distribution_examples(params):
    t = build_topology(GridSpec(5, 5))
    grid = np.zeros((5, 5))
    grid[3, 2] = 1024
    s, _ = stream_distribute(grid, t, params, "HighBw", HopStrategy.RowShared)
    assert s == pytest.approx(1024 / 60e9 * 7)
    td = build_topology(GridSpec(5, 5, "A", True))
    s, _ = stream_distribute(grid, td, params, "HighBw", HopStrategy.RowShared)
    assert s == pytest.approx(1024 / 60e9 * 5)
    one = build_topology(GridSpec(1, 1))
    assert stream_distribute(np.full((1, 1), 1e6), one, params, "HighBw", HopStrategy.RowShared) == (0, 0)
    op = GemmOp("g", 16, 16, 16)
    assert distribute_latency(op, Partition([16], [16]), one, params, "LowBw") == 0


def test_lowbw_uses_minimal_paths(params):
    t = build_topology(GridSpec(5, 5))
    grid = np.zeros((5, 5))
    grid[3, 2] = 1024
    s, bh = stream_distribute(grid, t, params, "LowBw", HopStrategy.RowShared)
    assert s == pytest.approx(1024 * 5 / 60e9) and bh == 1024 * 5


def test_energy_examples():
    p = CostParams()
    part = Partition([16], [16])
    mac = compute_energy(OP16, part, p) - p.e_sram * 8 * (256 * 3)
    assert mac == pytest.approx(4.6e-12 * 62 * 256)
    assert mac == pytest.approx(7.30e-8, rel=1e-3)
    assert compute_energy(OP16, Partition([0], [0]), p) == 0
    assert onchip_energy(1024, 0, p) == 0
    assert onchip_energy(1024, 3, p) == pytest.approx(3.16e-8, rel=1e-3)
    assert offchip_energy(1024, CostParams.for_memory("DRAM")) == pytest.approx(1.212e-7, rel=1e-3)


def test_mac_energy_is_linear_in_rows():
    p = CostParams()
    op1, op2 = GemmOp("a", 16, 16, 16), GemmOp("a", 32, 16, 16)
    sram = lambda op: p.e_sram * 8 * (op.input_bytes + op.weight_bytes + op.output_bytes)  # noqa: E731
    e1 = compute_energy(op1, Partition([16], [16]), p) - sram(op1)
    e2 = compute_energy(op2, Partition([32], [16]), p) - sram(op2)
    assert e2 == pytest.approx(2 * e1)


def test_empty_task(params, topo4):
    bd = end_to_end(TaskSequence(()), [], topo4, params)
    assert bd.latency_s == 0 and bd.energy_J == 0 and bd.edp_Js == 0


def test_single_chiplet_composition(params):
    t = build_topology(GridSpec(1, 1))
    bd = end_to_end(TaskSequence([OP16]), [Partition([16], [16])], t, params)
    c = bd.ops[0]
    assert c.collect_s == 0 and c.distribute_s == 0
    # weights come from memory as well; they sit in their own field
    assert c.weight_load_s == pytest.approx(256 / 1000e9)
    expected = 256 / 1000e9 + 62e-9 + 256 / 1000e9
    assert bd.latency_s - c.weight_load_s == pytest.approx(expected)


def test_redistribution_drops_round_trip(params):
    t = build_topology(GridSpec(1, 1))
    task = gemm_chain(2)
    parts = [Partition([64], [64])] * 2
    bd = end_to_end(task, parts, t, params, redistribute=True)
    assert bd.ops[0].offchip_store_s == 0 and bd.ops[1].offchip_load_s == 0
    assert bd.ops[1].redistributed
    base = end_to_end(task, parts, t, params)
    assert bd.latency_s < base.latency_s and bd.energy_J < base.energy_J


def test_partition_validation(params, topo4):
    op = GemmOp("g", 64, 16, 64)
    with pytest.raises(ValueError, match="sums"):
        Partition([16, 16, 16, 0], [16] * 4).validate(op, 16, 16, 4, 4)
    with pytest.raises(ValueError, match="below array size"):
        Partition([8, 24, 16, 16], [16] * 4).validate(op, 16, 16, 4, 4)
    with pytest.raises(ValueError, match="rows"):
        Partition([32, 32], [16] * 4).validate(op, 16, 16, 4, 4)
    with pytest.raises(ValueError):
        CostParams(bw_nop=0)


def test_breakdown_dict_and_objectives(params, topo4):
    task = gemm_chain(2)
    parts = [Partition([16] * 4, [16] * 4)] * 2
    bd = end_to_end(task, parts, topo4, params)
    d = bd.as_dict()
    assert d["edp_Js"] == bd.latency_s * bd.energy_J
    assert bd.objective("latency") == bd.latency_s and bd.objective("edp") == bd.edp_Js
    with pytest.raises(ValueError):
        bd.objective("power")
    assert len(d["ops"]) == 2 and d["ops"][0]["regime"] in ("LowBw", "HighBw")


def test_regime_label_follows_bandwidth(topo4):
    op = GemmOp("g", 64, 64, 64, shared_row=True)
    part = Partition([16] * 4, [16] * 4)
    assert op_cost(op, part, topo4, CostParams.for_memory("DRAM", bw_nop=120 * GB)).regime == "LowBw"
    assert op_cost(op, part, topo4, CostParams(bw_nop=1 * GB)).regime == "HighBw"
    assert CostParams.for_memory("DRAM").nominal_regime() == "LowBw"
    assert CostParams().nominal_regime() == "HighBw"


def test_async_fuse_only_at_non_sync_boundaries(params, topo4):
    ops = [GemmOp("a", 64, 64, 64), GemmOp("b", 64, 64, 64, sync=True), GemmOp("c", 64, 64, 64)]
    task = TaskSequence(ops, [True, True])
    parts = [Partition([16] * 4, [16] * 4)] * 3
    fused = end_to_end(task, parts, topo4, params, async_fuse=True)
    plain = end_to_end(task, parts, topo4, params)
    c = plain.ops
    assert fused.overlap_s == pytest.approx(min(c[0].compute_s, c[1].weight_load_s))
    assert fused.latency_s <= plain.latency_s


def test_activation_grid_shape():
    g = activation_bytes_grid(GemmOp("g", 48, 8, 16), Partition([32, 16], [16]), 3)
    assert g.shape == (2, 3) and g[0, 0] == 256 and g[1, 2] == 128


def test_alexnet_runs(params, topo4):
    from chipletcost.optimize import uniform_plan
    task = alexnet_mini()
    bd = end_to_end(task, uniform_plan(task, topo4, 16, 16), topo4, params)
    assert bd.latency_s > 0 and np.isfinite(bd.energy_J)
    assert PJ == 1e-12
