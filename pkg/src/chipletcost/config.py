"""Experiment configuration files (TOML) with line-precise error messages."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .costmodel import GB, MEMORY_PRESETS, PJ, CostParams
from .optimize import OPTIMIZERS, GAConfig
from .topology import PKG_TYPES, GridSpec
from .workload import TaskSequence, WorkloadError, resolve_task


class ConfigError(ValueError):
    pass


_NUM = (int, float)

# section -> key -> accepted python types
SCHEMA: Dict[Optional[str], Dict[str, tuple]] = {
    None: {"workload": (str,), "memory": (str,), "freq_ghz": _NUM, "seed": (int,),
           "output_dir": (str,), "optimizers": (list,), "objective": (str,),
           "time_limit_s": _NUM, "workers": (int,)},
    "grid": {"x": (int,), "y": (int,), "type": (str,), "diagonal_links": (bool,)},
    "bw": {"nop_gbps": _NUM, "mem_gbps": _NUM},
    "array": {"r": (int,), "c": (int,)},
    "energy": {"sram": _NUM, "mac": _NUM, "nop": _NUM, "offchip": _NUM},
    "flags": {"redistribute": (bool,), "async_fuse": (bool,)},
    "ga": {"population": (int,), "generations": (int,), "mutation_rate": _NUM,
           "tournament": (int,), "elitism": (int,)},
    "pipeline": {"batch": (int,), "method": (str,), "resident_weights": (bool,)},
}


@dataclass
class ExperimentConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(4, 4, "A"))
    params: CostParams = field(default_factory=CostParams)
    memory: str = "HBM"
    workload: str = "gemm-chain-4"
    optimizers: Tuple[str, ...] = OPTIMIZERS
    objective: str = "latency"
    redistribute: bool = False
    async_fuse: bool = False
    seed: int = 0
    time_limit_s: Optional[float] = None
    workers: int = 1
    ga: GAConfig = field(default_factory=GAConfig)
    batch: int = 4
    pipeline_method: str = "list"
    resident_weights: bool = False
    output_dir: str = "results"
    base_dir: Path = field(default_factory=Path.cwd)

    def load_workload(self) -> TaskSequence:
        name = self.workload
        candidate = self.base_dir / name
        if candidate.is_file():
            name = str(candidate)
        try:
            return resolve_task(name)
        except FileNotFoundError:
            raise ConfigError(f"workload {self.workload!r} is neither bundled nor a file") from None
        except WorkloadError as exc:
            raise ConfigError(str(exc)) from None


def key_line(text: str, section: Optional[str], key: Optional[str]) -> Optional[int]:
    """1-based line of ``key`` inside ``[section]`` (or of the header when key is None)."""
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_.-]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is None:
            continue
        m = re.match(r"([A-Za-z0-9_.-]+)\s*=", s)
        if not m:
            continue
        name = m.group(1)
        if current == section and name == key:
            return no
        if current is None and section is not None and name == f"{section}.{key}":
            return no
    return None


def _toml_error(source: str, exc: Exception) -> ConfigError:
    msg = str(exc)
    m = re.search(r"\(at line (\d+), column (\d+)\)", msg)
    if m:
        msg = msg[:m.start()].strip()
        return ConfigError(f"{source}:{m.group(1)}:{m.group(2)}: {msg}")
    return ConfigError(f"{source}: {msg}")


def parse_config(text: str, source: str = "<config>", base_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise _toml_error(source, exc) from None

    def fail(section, key, msg):
        line = key_line(text, section, key)
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {msg}")

    values: Dict[Tuple[Optional[str], str], Any] = {}
    for k, v in doc.items():
        if isinstance(v, dict):
            if k not in SCHEMA or k is None:
                fail(k, None, f"unknown section [{k}]")
            for kk, vv in v.items():
                if kk not in SCHEMA[k]:
                    fail(k, kk, f"unknown key {k}.{kk}")
                values[(k, kk)] = vv
        else:
            if k not in SCHEMA[None]:
                fail(None, k, f"unknown key {k}")
            values[(None, k)] = v
    for (sec, key), v in values.items():
        types = SCHEMA[sec][key]
        ok = isinstance(v, types) and not (isinstance(v, bool) and bool not in types)
        if not ok:
            name = key if sec is None else f"{sec}.{key}"
            fail(sec, key, f"{name} must be {'/'.join(t.__name__ for t in types)}, got {v!r}")

    get = lambda sec, key, default: values.get((sec, key), default)  # noqa: E731

    def check(cond, sec, key, msg):
        if not cond:
            fail(sec, key, msg)

    cfg = ExperimentConfig(base_dir=base_dir or Path.cwd())
    gtype = get("grid", "type", "A")
    check(gtype in PKG_TYPES, "grid", "type", f"grid.type must be one of {PKG_TYPES}")
    for k in ("x", "y"):
        check(get("grid", k, 4) >= 1, "grid", k, f"grid.{k} must be >= 1")
    cfg.grid = GridSpec(get("grid", "x", 4), get("grid", "y", 4), gtype, get("grid", "diagonal_links", False))

    memory = get(None, "memory", "HBM").upper()
    check(memory in MEMORY_PRESETS, None, "memory", f"memory must be one of {sorted(MEMORY_PRESETS)}")
    mem_bw, mem_e = MEMORY_PRESETS[memory]
    numbers = {
        ("bw", "nop_gbps"): 60.0, ("bw", "mem_gbps"): mem_bw, (None, "freq_ghz"): 1.0,
        ("energy", "sram"): 0.28, ("energy", "mac"): 4.6, ("energy", "nop"): 1.285,
        ("energy", "offchip"): mem_e, ("array", "r"): 16, ("array", "c"): 16,
    }
    got = {}
    for (sec, key), default in numbers.items():
        v = get(sec, key, default)
        check(v > 0, sec, key, f"{key if sec is None else sec + '.' + key} must be positive")
        got[(sec, key)] = v
    cfg.memory = memory
    cfg.params = CostParams(
        bw_nop=got[("bw", "nop_gbps")] * GB, bw_mem=got[("bw", "mem_gbps")] * GB,
        R=got[("array", "r")], C=got[("array", "c")], freq_hz=got[(None, "freq_ghz")] * 1e9,
        e_sram=got[("energy", "sram")] * PJ, e_mac=got[("energy", "mac")] * PJ,
        e_nop=got[("energy", "nop")] * PJ, e_offchip=got[("energy", "offchip")] * PJ)

    cfg.workload = get(None, "workload", cfg.workload)
    opts = tuple(get(None, "optimizers", list(OPTIMIZERS)))
    for o in opts:
        check(o in OPTIMIZERS, None, "optimizers", f"unknown optimizer {o!r}; choose from {OPTIMIZERS}")
    cfg.optimizers = opts
    cfg.objective = get(None, "objective", "latency")
    check(cfg.objective in ("latency", "edp"), None, "objective", "objective must be latency or edp")
    cfg.seed = get(None, "seed", 0)
    tl = get(None, "time_limit_s", None)
    check(tl is None or tl >= 0, None, "time_limit_s", "time_limit_s must be >= 0")
    cfg.time_limit_s = tl
    cfg.workers = get(None, "workers", 1)
    check(cfg.workers >= 1, None, "workers", "workers must be >= 1")
    cfg.output_dir = get(None, "output_dir", cfg.output_dir)
    cfg.redistribute = get("flags", "redistribute", False)
    cfg.async_fuse = get("flags", "async_fuse", False)

    ga_kw = {k: get("ga", k, getattr(GAConfig, k)) for k in SCHEMA["ga"]}
    try:
        cfg.ga = GAConfig(seed=cfg.seed, **ga_kw)
    except ValueError as exc:
        bad = next((k for k in SCHEMA["ga"] if ("ga", k) in values), None)
        fail("ga", bad, str(exc))

    cfg.batch = get("pipeline", "batch", 4)
    check(cfg.batch >= 1, "pipeline", "batch", "pipeline.batch must be >= 1")
    cfg.pipeline_method = get("pipeline", "method", "list")
    check(cfg.pipeline_method in ("list", "exact", "serial"), "pipeline", "method",
          "pipeline.method must be list, exact or serial")
    cfg.resident_weights = get("pipeline", "resident_weights", False)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)
