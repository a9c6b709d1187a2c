import pytest

from chipletcost.config import ConfigError, key_line, load_config, parse_config

GOOD = """\
workload = "gemm-chain-2"
memory = "dram"
seed = 5

[grid]
x = 2
y = 2
type = "C"

[ga]
population = 8
generations = 3

[flags]
redistribute = true
"""


def test_parse_good():
    cfg = parse_config(GOOD)
    assert (cfg.grid.X, cfg.grid.Y, cfg.grid.pkg_type) == (2, 2, "C")
    assert cfg.memory == "DRAM" and cfg.params.bw_mem == 60e9
    assert cfg.ga.population == 8 and cfg.ga.seed == 5
    assert cfg.redistribute and not cfg.async_fuse
    assert len(cfg.load_workload().ops) == 2


def test_defaults():
    cfg = parse_config("")
    assert cfg.grid.X == 4 and cfg.objective == "latency" and cfg.memory == "HBM"


@pytest.mark.parametrize("text,line,fragment", [
    ("seed = 1\n[grid]\nx = 0\n", 3, "grid.x must be >= 1"),
    ("\n\n[grid]\ntype = \"Z\"\n", 4, "grid.type"),
    ("memory = \"SRAM\"\n", 1, "memory must be"),
    ("[bw]\nnop_gbps = -1\n", 2, "positive"),
    ("[bw]\nnop_gbps = \"fast\"\n", 2, "must be int/float"),
    ("[grid]\nx = true\n", 2, "must be int"),
    ("optimizers = [\"anneal\"]\n", 1, "unknown optimizer"),
    ("\n[ga]\npopulation = 1\n", 3, "population"),
    ("[pipeline]\nmethod = \"cp\"\n", 2, "pipeline.method"),
    ("\n[grid]\ncolour = 1\n", 3, "unknown key grid.colour"),
    ("\n\n[extra]\na = 1\n", 3, "unknown section"),
    ("grid.x = 0\n", 1, "grid.x must be >= 1"),
])
def test_line_precise_errors(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "exp.toml")
    msg = str(err.value)
    assert msg.startswith(f"exp.toml:{line}: ") and fragment in msg


def test_toml_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError, match=r"^exp.toml:2:\d+: "):
        parse_config("seed = 1\nx = = 2\n", "exp.toml")


def test_key_line():
    text = "a = 1\n[grid] # c\nx = 2\n[bw]\nx = 3\n"
    assert key_line(text, "grid", "x") == 3
    assert key_line(text, "bw", "x") == 5
    assert key_line(text, "bw", None) == 4
    assert key_line(text, "array", "r") is None


def test_load_config_file_and_workload_path(tmp_path):
    (tmp_path / "w.toml").write_text('name = "w"\n[[op]]\nname = "a"\nm = 32\nk = 32\nn = 32\n')
    p = tmp_path / "exp.toml"
    p.write_text('workload = "w.toml"\n')
    cfg = load_config(p)
    assert cfg.load_workload().ops[0].name == "a"
    with pytest.raises(ConfigError, match="missing.toml"):
        load_config(tmp_path / "missing.toml")
    p.write_text('workload = "nope.toml"\n')
    with pytest.raises(ConfigError, match="neither bundled"):
        load_config(p).load_workload()
