import pytest

from chipletcost import GemmOp, TaskSequence, load_task
from chipletcost.workload import (WorkloadError, alexnet_mini, bundled_tasks, conv_to_gemm,
                                  dump_task, gemm_chain, parse_task, resolve_task, vit_block)


def test_single_op():
    assert len(TaskSequence([GemmOp("a", 64, 64, 64)])) == 1


def test_chain_rule():
    TaskSequence([GemmOp("a", 64, 64, 128), GemmOp("b", 64, 128, 32)], [True])
    with pytest.raises(WorkloadError, match="chain dimension mismatch at op 1"):
        TaskSequence([GemmOp("a", 64, 64, 128), GemmOp("b", 64, 64, 32)], [True])


@pytest.mark.parametrize("args,mkn", [
    ((1, 1, 1, 1, 1, 1), (1, 1, 1)),
    ((96, 3, 11, 11, 55, 55), (3025, 363, 96)),
    ((16, 8, 3, 3, 8, 8), (64, 72, 16)),
])
def test_conv_lowering(args, mkn):
    op = conv_to_gemm(*args)
    assert (op.M, op.K, op.N) == mkn


def test_bundled():
    g = bundled_tasks()["gemm-chain-2"]
    assert len(g) == 2 and g.chain == (True,)
    assert all((o.M, o.K, o.N) == (64, 64, 64) for o in g.ops)
    a = alexnet_mini()
    assert all(a.chain)
    v = vit_block()
    names = [o.name for o in v.ops]
    i = names.index("mlp1")
    assert v.chain[i] and sum(v.chain) == 1
    assert all(o.sync for o in v.ops if o.name.startswith(("score", "context")))
    assert resolve_task("gemm-chain-7").ops[6].name == "g6"


def test_bad_dims():
    with pytest.raises(WorkloadError):
        GemmOp("x", 0, 1, 1)
    with pytest.raises(WorkloadError):
        GemmOp("x", 1, 1, 1, shared_row=True, shared_col=True)
    with pytest.raises(WorkloadError):
        gemm_chain(2, dims=[1, 2])


TOML = """
bytes_per_element = 2

[[op]]
name = "a"
m = 64
k = 32
n = 128

[[op]]
name = "b"
chain_prev = true
m = 64
k = 128
n = 16
sync = true

[[op]]
name = "c"
conv = { cout = 16, cin = 8, kh = 3, kw = 3, hout = 8, wout = 8 }
shared_row = true
"""


def test_parse_and_roundtrip(tmp_path):
    t = parse_task(TOML)
    assert [o.name for o in t.ops] == ["a", "b", "c"]
    assert t.chain == (True, False)
    assert t.ops[0].bytes_per_element == 2 and t.ops[1].sync
    assert (t.ops[2].M, t.ops[2].K, t.ops[2].N) == (64, 72, 16) and t.ops[2].shared_row
    p = tmp_path / "w.toml"
    p.write_text(dump_task(t))
    assert load_task(p) == t


def test_errors_carry_line_numbers():
    bad = TOML.replace("k = 128", "k = 64")
    with pytest.raises(WorkloadError, match=r":10: chain dimension mismatch at op 1"):
        parse_task(bad, "w.toml")
    with pytest.raises(WorkloadError, match=r"w.toml:4: unknown key"):
        parse_task("\n\n\n[[op]]\nm = 1\nk = 1\nn = 1\nbogus = 1\n", "w.toml")
    with pytest.raises(WorkloadError, match="line 1"):
        parse_task("[[op]\n", "w.toml")
    with pytest.raises(WorkloadError, match="no \\[\\[op\\]\\]"):
        parse_task("x = 1\n")
