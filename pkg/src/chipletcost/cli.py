"""Command-line harness: model, optimize, sweep, pipeline and simulate."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import netsim, pipeline
from .config import ConfigError, ExperimentConfig, load_config
from .costmodel import GB, MEMORY_PRESETS, PJ, CostParams, Partition, end_to_end
from .optimize import OPTIMIZERS, GAConfig, run_optimizer, uniform_plan
from .topology import GridSpec, build_topology
from .workload import TaskSequence, WorkloadError

CSV_COLUMNS = ["workload", "grid", "type", "memory", "optimizer", "objective", "latency_s",
               "energy_J", "edp", "normalized_vs_baseline", "solve_time_s", "status"]
SWEEP_GRIDS = ((4, 4), (8, 8))
SWEEP_TYPES = ("A", "B", "C", "D")
SWEEP_MEMORIES = ("DRAM", "HBM")

EXIT_CONFIG = 1
EXIT_TIMEOUT = 2


def _fmt(v: float) -> str:
    return repr(float(v))


def _params_for(base: CostParams, memory: str) -> CostParams:
    bw, e = MEMORY_PRESETS[memory]
    return replace(base, bw_mem=bw * GB, e_offchip=e * PJ)


def run_cell(task: TaskSequence, workload: str, grid: GridSpec, params: CostParams, memory: str,
             optimizers: Sequence[str], objective: str, ga: GAConfig, time_limit_s: Optional[float],
             redistribute: bool, async_fuse: bool, lp_path=None):
    """One configuration of the comparison matrix -> (csv rows, json records)."""
    topo = build_topology(grid)
    baseline = run_optimizer("uniform", task, topo, params, objective,
                             redistribute=redistribute, async_fuse=async_fuse)
    rows, records = [], []
    for name in optimizers:
        try:
            res = baseline if name == "uniform" else run_optimizer(
                name, task, topo, params, objective, ga_config=ga, time_limit_s=time_limit_s,
                redistribute=redistribute, async_fuse=async_fuse, lp_path=lp_path)
        except ValueError as exc:
            rows.append({"workload": workload, "grid": f"{grid.X}x{grid.Y}", "type": grid.pkg_type,
                         "memory": memory, "optimizer": name, "objective": objective,
                         "status": "skipped"})
            records.append({"optimizer": name, "error": str(exc)})
            continue
        bd = res.info.get("breakdown")
        rows.append({
            "workload": workload, "grid": f"{grid.X}x{grid.Y}", "type": grid.pkg_type,
            "memory": memory, "optimizer": name, "objective": objective,
            "latency_s": _fmt(bd.latency_s), "energy_J": _fmt(bd.energy_J), "edp": _fmt(bd.edp_Js),
            "normalized_vs_baseline": _fmt(res.objective / baseline.objective),
            "solve_time_s": res.wall_time_s, "status": res.status,
        })
        records.append({
            "optimizer": name, "grid": f"{grid.X}x{grid.Y}", "type": grid.pkg_type, "memory": memory,
            "status": res.status, "solve_time_s": res.wall_time_s, "objective_value": res.objective,
            "model_objective": res.info.get("model_objective"),
            "partitions": [{"px": list(p.px), "py": list(p.py)} for p in res.partitions],
            "gather_positions": {str(k): list(v) for k, v in (res.gather_positions or {}).items()},
            "cost": bd.as_dict(),
        })
    return rows, records


def _cell_star(args):
    return run_cell(*args)


def _write_csv(rows: List[dict], timings: bool) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        t = r.get("solve_time_s")
        # wall time is not reproducible; keep it out of the CSV unless asked
        r["solve_time_s"] = _fmt(t) if (timings and t is not None) else ""
        w.writerow(r)
    return buf.getvalue()


def _outputs(cfg: ExperimentConfig, args) -> Path:
    out = Path(args.out) if args.out else cfg.base_dir / cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "workload", None):
        cfg.workload = args.workload
        cfg.base_dir = Path.cwd()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    cfg.ga = replace(cfg.ga, seed=cfg.seed)
    if getattr(args, "optimizer", None):
        cfg.optimizers = tuple(args.optimizer)
    if getattr(args, "objective", None):
        cfg.objective = args.objective
    if getattr(args, "time_limit", None) is not None:
        if args.time_limit < 0:
            raise ConfigError("--time-limit must be >= 0")
        cfg.time_limit_s = args.time_limit
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.workers = args.workers
    if getattr(args, "redistribute", False):
        cfg.redistribute = True
    if getattr(args, "async_fuse", False):
        cfg.async_fuse = True
    if getattr(args, "memory", None):
        cfg.memory = args.memory.upper()
        cfg.params = _params_for(cfg.params, cfg.memory)
    return cfg


def _load_partitions(path, task: TaskSequence) -> List[Partition]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if len(data) != len(task.ops):
        raise ConfigError(f"{path}: {len(data)} partitions for {len(task.ops)} ops")
    return [Partition(d["px"], d["py"]) for d in data]


# --- subcommands -------------------------------------------------------------

def cmd_model(cfg: ExperimentConfig, args) -> int:
    task = cfg.load_workload()
    topo = build_topology(cfg.grid)
    parts = (_load_partitions(args.partitions, task) if args.partitions
             else uniform_plan(task, topo, cfg.params.R, cfg.params.C))
    try:
        bd = end_to_end(task, parts, topo, cfg.params, redistribute=cfg.redistribute,
                        async_fuse=cfg.async_fuse)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(json.dumps(bd.as_dict(), indent=2))
    return 0


def _finish(rows, records, cfg, args, stem: str) -> int:
    out = _outputs(cfg, args)
    text = _write_csv(rows, args.timings)
    (out / f"{stem}.csv").write_text(text)
    (out / f"{stem}.json").write_text(json.dumps(records, indent=2, default=str))
    sys.stdout.write(text)
    if args.strict and any(r.get("status") == "feasible-timeout" for r in rows):
        print("error: solver hit the time limit (--strict)", file=sys.stderr)
        return EXIT_TIMEOUT
    return 0


def cmd_optimize(cfg: ExperimentConfig, args) -> int:
    task = cfg.load_workload()
    rows, records = run_cell(task, cfg.workload, cfg.grid, cfg.params, cfg.memory, cfg.optimizers,
                             cfg.objective, cfg.ga, cfg.time_limit_s, cfg.redistribute,
                             cfg.async_fuse, args.lp)
    return _finish(rows, records, cfg, args, "optimize")


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    task = cfg.load_workload()
    cells = []
    for (x, y) in SWEEP_GRIDS:
        for t in SWEEP_TYPES:
            for mem in SWEEP_MEMORIES:
                grid = GridSpec(x, y, t, cfg.grid.diagonal_links)
                cells.append((task, cfg.workload, grid, _params_for(cfg.params, mem), mem,
                              cfg.optimizers, cfg.objective, cfg.ga, cfg.time_limit_s,
                              cfg.redistribute, cfg.async_fuse))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_cell_star, cells))
    else:
        results = [run_cell(*c) for c in cells]
    rows = [r for rs, _ in results for r in rs]
    records = [r for _, rs in results for r in rs]
    return _finish(rows, records, cfg, args, "sweep")


def cmd_pipeline(cfg: ExperimentConfig, args) -> int:
    task = cfg.load_workload()
    topo = build_topology(cfg.grid)
    batch = args.batch if args.batch is not None else cfg.batch
    method = args.method or cfg.pipeline_method
    source = args.optimizer[0] if args.optimizer else "uniform"
    res = run_optimizer(source, task, topo, cfg.params, cfg.objective, ga_config=cfg.ga,
                        time_limit_s=cfg.time_limit_s, redistribute=cfg.redistribute,
                        async_fuse=cfg.async_fuse)
    bd = res.info["breakdown"]
    tasks = pipeline.build_rcpsp(bd, batch, resident_weights=args.resident_weights or cfg.resident_weights)
    try:
        sched = pipeline.schedule(tasks, method, cfg.time_limit_s)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    pipeline.check_schedule(sched)
    text = sched.to_csv()
    serial = pipeline.serial_schedule(tasks).makespan
    summary = {"batch": batch, "method": method, "makespan_s": sched.makespan,
               "serial_makespan_s": serial, "optimal": sched.optimal,
               "per_sample_speedup": pipeline.per_sample_speedup(sched, serial / batch, batch)}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "schedule.csv").write_text(text)
        (out / "schedule.json").write_text(json.dumps(summary, indent=2))
    sys.stdout.write(text)
    print(json.dumps(summary), file=sys.stderr)
    if args.strict and method == "exact" and not sched.optimal:
        print("error: exact scheduler hit the time limit (--strict)", file=sys.stderr)
        return EXIT_TIMEOUT
    return 0


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    topo, result = netsim.run_scenario(args.scenario, args.nop_gbps, grid=args.grid,
                                       gbytes=args.gbytes, chunks=args.chunks)
    text = netsim.heatmap_csv(result)
    summary = {"scenario": args.scenario, "nop_gbps": args.nop_gbps, "grid": args.grid,
               "completion_s": result.completion_s,
               "max_utilization": max(result.utilization.values(), default=0.0)}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "heatmap.csv").write_text(text)
        (out / "simulate.json").write_text(json.dumps(summary, indent=2))
    sys.stdout.write(text)
    print(json.dumps(summary), file=sys.stderr)
    return 0


COMMANDS = {"model": cmd_model, "optimize": cmd_optimize, "sweep": cmd_sweep,
            "pipeline": cmd_pipeline, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chipletcost",
                                description="Cost model and partition optimizer for chiplet accelerators.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="experiment TOML file")
    common.add_argument("--workload", help="bundled workload name or workload TOML path")
    common.add_argument("--memory", choices=sorted(MEMORY_PRESETS), type=str.upper)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--objective", choices=("latency", "edp"))
    common.add_argument("--time-limit", type=float, help="solver time limit in seconds")
    common.add_argument("--redistribute", action="store_true", help="on-package redistribution")
    common.add_argument("--async-fuse", action="store_true", help="overlap non-sync operator boundaries")
    common.add_argument("--strict", action="store_true", help="exit 2 when a solver times out")

    sub = p.add_subparsers(dest="command", required=True)
    m = sub.add_parser("model", parents=[common], help="cost breakdown JSON for given partitions")
    m.add_argument("--partitions", help='JSON list of {"px": [...], "py": [...]} (default: uniform)')

    for name, helptext in (("optimize", "compare optimizers on one configuration"),
                           ("sweep", "comparison matrix over grids, types and memories")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--optimizer", action="append", choices=OPTIMIZERS,
                       help="repeatable; default from config (all four)")
        s.add_argument("--workers", type=int)
        s.add_argument("--timings", action="store_true", help="fill solve_time_s in the CSV")
        if name == "optimize":
            s.add_argument("--lp", help="write the quadratic model in LP format here")

    pp = sub.add_parser("pipeline", parents=[common], help="batched two-resource schedule CSV")
    pp.add_argument("--batch", type=int)
    pp.add_argument("--method", choices=("list", "exact", "serial"))
    pp.add_argument("--optimizer", action="append", choices=OPTIMIZERS,
                    help="partition source (default uniform)")
    pp.add_argument("--resident-weights", action="store_true")

    sm = sub.add_parser("simulate", parents=[common], help="link simulator heatmap CSV")
    sm.add_argument("--scenario", choices=sorted(netsim.SCENARIOS), default="dram")
    sm.add_argument("--nop-gbps", type=float, default=60.0)
    sm.add_argument("--grid", type=int, default=4)
    sm.add_argument("--gbytes", type=float, default=1.0)
    sm.add_argument("--chunks", type=int, default=64)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = _apply_overrides(cfg, args)
        if getattr(args, "batch", None) is not None and args.batch < 1:
            raise ConfigError("--batch must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, WorkloadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
