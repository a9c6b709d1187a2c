"""Batched execution as a two-resource RCPSP (communication and compute).

Samples are independent chains load -> compute -> store per operator; the
scheduler overlaps one sample's transfers with another sample's compute.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .costmodel import CostBreakdown
from .workload import BatchSpec

COMM, COMPUTE = "comm", "compute"


@dataclass(frozen=True)
class PipeTask:
    id: int
    sample: int
    kind: str
    duration: float
    preds: Tuple[int, ...] = ()
    label: str = ""
    pos: int = 0  # position within the sample chain

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("task duration must be non-negative")
        if self.kind not in (COMM, COMPUTE):
            raise ValueError(f"unknown resource {self.kind!r}")


@dataclass
class PipeSchedule:
    tasks: List[PipeTask]
    start: Dict[int, float]
    optimal: bool = False

    @property
    def makespan(self) -> float:
        return max((self.start[t.id] + t.duration for t in self.tasks), default=0.0)

    def finish(self, tid: int) -> float:
        return self.start[tid] + self._by_id[tid].duration

    @property
    def _by_id(self):
        return {t.id: t for t in self.tasks}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "resource", "start", "end"])
        for t in sorted(self.tasks, key=lambda t: (self.start[t.id], t.id)):
            s = self.start[t.id]
            w.writerow([t.label or t.id, t.kind, f"{s:.9e}", f"{s + t.duration:.9e}"])
        return buf.getvalue()


def chain_tasks(steps: Sequence[Tuple[float, float, float]], batch, weights: Optional[Sequence[float]] = None) -> List[PipeTask]:
    """Tasks for ``batch`` samples of a chain of (load, compute, store) steps.

    With ``weights`` given, each operator's weight transfer is emitted once
    and gates that operator's compute in every sample.
    """
    b = batch.batch_size if isinstance(batch, BatchSpec) else int(batch)
    if b < 1:
        raise ValueError("batch must be >= 1")
    tasks: List[PipeTask] = []
    w_ids = []
    if weights is not None:
        for i, d in enumerate(weights):
            tid = len(tasks)
            tasks.append(PipeTask(tid, -1, COMM, d, (), f"W{i}", i))
            w_ids.append(tid)
    for s in range(b):
        prev = None
        pos = 0
        for i, (load, comp, store) in enumerate(steps):
            for kind, dur, name in ((COMM, load, "Inp"), (COMPUTE, comp, "Comp"), (COMM, store, "Out")):
                preds = () if prev is None else (prev,)
                if name == "Comp" and w_ids:
                    preds = preds + (w_ids[i],)
                tid = len(tasks)
                tasks.append(PipeTask(tid, s, kind, dur, preds, f"s{s}.{name}{i}", pos))
                prev, pos = tid, pos + 1
    return tasks


def build_rcpsp(breakdown: CostBreakdown, batch, resident_weights: bool = False) -> List[PipeTask]:
    if resident_weights:
        steps = [(o.load_s, o.compute_s, o.store_s) for o in breakdown.ops]
        weights = [o.weight_load_s for o in breakdown.ops]
    else:
        steps = [(o.load_s + o.weight_load_s, o.compute_s, o.store_s) for o in breakdown.ops]
        weights = None
    return chain_tasks(steps, batch, weights)


def _tails(tasks: List[PipeTask]) -> Dict[int, float]:
    succ = {t.id: [] for t in tasks}
    for t in tasks:
        for p in t.preds:
            succ[p].append(t.id)
    tail: Dict[int, float] = {}
    for t in reversed(_topo_order(tasks)):
        tail[t.id] = t.duration + max((tail[s] for s in succ[t.id]), default=0.0)
    return tail


def _topo_order(tasks: List[PipeTask]) -> List[PipeTask]:
    by_id = {t.id: t for t in tasks}
    indeg = {t.id: len(t.preds) for t in tasks}
    succ = {t.id: [] for t in tasks}
    for t in tasks:
        for p in t.preds:
            if p not in by_id:
                raise ValueError(f"task {t.id} depends on unknown task {p}")
            succ[p].append(t.id)
    ready = sorted(i for i, d in indeg.items() if d == 0)
    order = []
    while ready:
        i = ready.pop(0)
        order.append(by_id[i])
        for s in succ[i]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort()
    if len(order) != len(tasks):
        raise ValueError("precedence graph has a cycle")
    return order


def list_schedule(tasks: List[PipeTask]) -> PipeSchedule:
    """Serial schedule generation: earliest start first, longest tail on ties."""
    tail = _tails(tasks)
    remaining = {t.id: t for t in tasks}
    finish: Dict[int, float] = {}
    free = {COMM: 0.0, COMPUTE: 0.0}
    start = {}
    while remaining:
        best = None
        for t in remaining.values():
            if any(p not in finish for p in t.preds):
                continue
            est = max([free[t.kind]] + [finish[p] for p in t.preds])
            key = (est, -tail[t.id], t.sample, t.pos, t.id)
            if best is None or key < best[0]:
                best = (key, t, est)
        _, t, est = best
        start[t.id] = est
        finish[t.id] = est + t.duration
        free[t.kind] = finish[t.id]
        del remaining[t.id]
    return PipeSchedule(list(tasks), start)


def serial_schedule(tasks: List[PipeTask]) -> PipeSchedule:
    """No overlap at all: tasks run one after another in topological order."""
    start, t_now = {}, 0.0
    for t in _topo_order(tasks):
        start[t.id] = t_now
        t_now += t.duration
    return PipeSchedule(list(tasks), start)


def exact_schedule(tasks: List[PipeTask], time_limit: Optional[float] = None) -> PipeSchedule:
    """Branch and bound over precedence-feasible task lists.

    Identical samples are symmetry-broken (sample a's k-th task is listed
    before sample b's for a < b), and states with equal progress are pruned
    when another visit had every resource and chain free no later.
    """
    if len(tasks) > 24:
        raise ValueError("exact scheduling is limited to 24 tasks")
    deadline = None if time_limit is None else time.monotonic() + time_limit
    incumbent = list_schedule(tasks)
    best = [incumbent.makespan, dict(incumbent.start)]
    if not tasks:
        return PipeSchedule([], {}, optimal=True)

    by_id = {t.id: t for t in tasks}
    tail = _tails(tasks)
    total = {COMM: sum(t.duration for t in tasks if t.kind == COMM),
             COMPUTE: sum(t.duration for t in tasks if t.kind == COMPUTE)}

    sig = {}
    for t in tasks:
        if t.sample >= 0:
            sig.setdefault(t.sample, []).append((t.pos, t.kind, t.duration, tuple(
                by_id[p].pos if by_id[p].sample == t.sample else ("w", p) for p in t.preds)))
    samples = sorted(sig)
    twin_of = {}
    for i, s in enumerate(samples):
        for prev in reversed(samples[:i]):
            if sorted(sig[prev]) == sorted(sig[s]):
                twin_of[s] = prev
                break
    slot = {(t.sample, t.pos): t.id for t in tasks if t.sample >= 0}

    succ = {t.id: [] for t in tasks}
    for t in tasks:
        for p in t.preds:
            succ[p].append(t.id)
    seen: Dict[frozenset, List[tuple]] = {}
    timed_out = [False]

    def dfs(done: Dict[int, float], free, used, cur_max):
        if deadline is not None and time.monotonic() > deadline:
            timed_out[0] = True
            return
        if len(done) == len(tasks):
            if cur_max < best[0] - 1e-15:
                best[0] = cur_max
                best[1] = {tid: f - by_id[tid].duration for tid, f in done.items()}
            return
        lb = cur_max
        for kind in (COMM, COMPUTE):
            lb = max(lb, free[kind] + total[kind] - used[kind])
        cands = []
        for t in tasks:
            if t.id in done or any(p not in done for p in t.preds):
                continue
            twin = twin_of.get(t.sample)
            if twin is not None and slot[(twin, t.pos)] not in done:
                continue
            est = max([free[t.kind]] + [done[p] for p in t.preds])
            lb = max(lb, est + tail[t.id])
            cands.append((est, -tail[t.id], t.id, t))
        if lb >= best[0] - 1e-15:
            return
        # only finishes that still gate unscheduled work matter for dominance
        key = frozenset(done)
        times = (cur_max, free[COMM], free[COMPUTE]) + tuple(
            f for tid, f in sorted(done.items()) if any(s not in done for s in succ[tid]))
        bucket = seen.setdefault(key, [])
        for other in bucket:
            if all(a <= b + 1e-15 for a, b in zip(other, times)):
                return
        bucket.append(times)
        for est, _, _, t in sorted(cands, key=lambda c: c[:3]):
            fin = est + t.duration
            done[t.id] = fin
            old = free[t.kind]
            free[t.kind] = fin
            used[t.kind] += t.duration
            dfs(done, free, used, max(cur_max, fin))
            used[t.kind] -= t.duration
            free[t.kind] = old
            del done[t.id]

    dfs({}, {COMM: 0.0, COMPUTE: 0.0}, {COMM: 0.0, COMPUTE: 0.0}, 0.0)
    return PipeSchedule(list(tasks), best[1], optimal=not timed_out[0])


def schedule(tasks: List[PipeTask], method: str = "list", time_limit: Optional[float] = None) -> PipeSchedule:
    if method == "list":
        return list_schedule(tasks)
    if method == "exact":
        return exact_schedule(tasks, time_limit)
    if method == "serial":
        return serial_schedule(tasks)
    raise ValueError(f"unknown scheduling method {method!r}")


def per_sample_speedup(sched: PipeSchedule, serial_latency: float, batch) -> float:
    b = batch.batch_size if isinstance(batch, BatchSpec) else int(batch)
    if sched.makespan == 0:
        return 1.0
    return b * serial_latency / sched.makespan


def check_schedule(sched: PipeSchedule, eps: float = 1e-12) -> None:
    """Raise if precedence or unary-resource exclusivity is violated."""
    by_id = {t.id: t for t in sched.tasks}
    for t in sched.tasks:
        s = sched.start[t.id]
        if s < -eps:
            raise AssertionError(f"task {t.id} starts before zero")
        for p in t.preds:
            if sched.start[p] + by_id[p].duration > s + eps:
                raise AssertionError(f"task {t.id} starts before predecessor {p} finishes")
    for kind in (COMM, COMPUTE):
        iv = sorted((sched.start[t.id], sched.start[t.id] + t.duration) for t in sched.tasks
                    if t.kind == kind and t.duration > 0)
        busy = -float("inf")
        for s1, e1 in iv:
            if min(busy, e1) - s1 > eps:
                raise AssertionError(f"{kind} resource double-booked at {s1}")
            busy = max(busy, e1)
