import pytest

from chipletcost import GridSpec, HopStrategy, build_topology
from chipletcost.netsim import (MEM, Flow, bfs_path, cut_lower_bound, heatmap, heatmap_csv, path_links,
                                pull_flows, run_scenario, simulate, union_tree, validate_hops, xy_path)


def test_single_flow_single_hop():
    t = build_topology(GridSpec(1, 2))
    f = Flow((0, 0), 60e9, (((0, 0), (0, 1)),), dst=(0, 1))
    r = simulate(t, [f], 60e9, 60e9)
    assert r.completion_s == pytest.approx(1.0)


def test_store_and_forward_pipelines_chunks():
    t = build_topology(GridSpec(1, 3))
    route = tuple(path_links([(0, 0), (0, 1), (0, 2)]))
    one = simulate(t, [Flow((0, 0), 4.0, route, chunks=1)], 1.0, 1.0).completion_s
    four = simulate(t, [Flow((0, 0), 4.0, route, chunks=4)], 1.0, 1.0).completion_s
    assert one == 8.0 and four == 5.0


def test_link_is_exclusive():
    t = build_topology(GridSpec(1, 2))
    link = (((0, 0), (0, 1)),)
    r = simulate(t, [Flow((0, 0), 1.0, link), Flow((0, 0), 1.0, link)], 1.0, 1.0)
    assert r.completion_s == 2.0


def test_bad_routes():
    t = build_topology(GridSpec(2, 2))
    with pytest.raises(ValueError, match="missing link"):
        simulate(t, [Flow((0, 0), 1.0, (((0, 0), (1, 1)),))], 1.0, 1.0)
    with pytest.raises(ValueError, match="not reached"):
        simulate(t, [Flow((0, 0), 1.0, (((0, 1), (1, 1)),))], 1.0, 1.0)
    with pytest.raises(ValueError):
        Flow((0, 0), 0.0, ())


def test_routing_helpers():
    assert xy_path((0, 0), (2, 1)) == [(0, 0), (0, 1), (1, 1), (2, 1)]
    t = build_topology(GridSpec(3, 3))
    assert len(bfs_path(t, (0, 0), (2, 2))) == 5
    tree = union_tree([[(0, 0), (0, 1)], [(0, 0), (0, 1), (0, 2)]])
    assert tree == [((0, 0), (0, 1)), ((0, 1), (0, 2))]


def test_scenarios():
    _, dram = run_scenario("dram", 60)
    assert dram.completion_s == pytest.approx(16 / 60, rel=0.02)
    _, p60 = run_scenario("hbm-periph", 60)
    _, p120 = run_scenario("hbm-periph", 120)
    assert p60.completion_s / p120.completion_s == pytest.approx(2.0, rel=0.05)
    _, central = run_scenario("hbm-central", 60)
    assert 1.2 <= p60.completion_s / central.completion_s <= 1.9


def test_heatmap_rows():
    _, r = run_scenario("dram", 60)
    rows = heatmap(r)
    assert any(d == "from_mem" for _, _, d, _ in rows)
    assert all(0 <= u <= 1 for *_, u in rows)
    csv = heatmap_csv(r)
    assert csv.splitlines()[0] == "row,col,direction,utilization"


def test_central_memory_relieves_the_hot_link():
    # peak busy time of any single link shrinks with the central placement
    _, periph = run_scenario("hbm-periph", 60)
    _, central = run_scenario("hbm-central", 60)
    nop = lambda r: max(b for (u, v), b in r.busy_s.items() if MEM not in (u, v))  # noqa: E731
    assert nop(central) < nop(periph)


def test_cut_bound_is_a_lower_bound():
    t = build_topology(GridSpec(4, 4))
    flows = pull_flows(t, 1e9, chunks=8)
    r = simulate(t, flows, 60e9, 1024e9)
    assert cut_lower_bound(t, flows, 60e9, 1024e9) <= r.completion_s * (1 + 1e-9)


@pytest.mark.parametrize("pkg", ["A", "B", "C", "D"])
@pytest.mark.parametrize("diag", [False, True])
def test_hop_oracle_5x5(pkg, diag):
    t = build_topology(GridSpec(5, 5, pkg, diag))
    for s in (HopStrategy.LowBw, HopStrategy.RowShared, HopStrategy.ColShared, HopStrategy.DiagonalShared):
        assert validate_hops(t, s).mismatches == []
