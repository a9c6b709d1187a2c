"""Chiplet grid construction for the four packaging types.

Every chiplet is attached to its nearest global chiplet (the ones wired to
main memory) and carries a local index ``(x, y)``: the row and column
offsets toward that global chiplet. Hop counts for the fixed communication
strategies are closed-form functions of the local index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

Coord = Tuple[int, int]

PKG_TYPES = ("A", "B", "C", "D")


class HopStrategy(str, Enum):
    LowBw = "LowBw"
    RowShared = "RowShared"
    ColShared = "ColShared"
    DiagonalShared = "DiagonalShared"
    NonShared = "NonShared"


@dataclass(frozen=True)
class GridSpec:
    X: int
    Y: int
    pkg_type: str = "A"
    diagonal_links: bool = False

    def __post_init__(self):
        if self.X < 1 or self.Y < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.X}x{self.Y}")
        if self.pkg_type not in PKG_TYPES:
            raise ValueError(f"unknown packaging type {self.pkg_type!r}")


def default_globals(spec: GridSpec) -> FrozenSet[Coord]:
    """Global-chiplet placement per packaging type."""
    center = (spec.X // 2, spec.Y // 2)
    periphery = {(r, 0) for r in range(spec.X)}
    if spec.pkg_type == "A":
        return frozenset({(0, 0)})
    if spec.pkg_type == "B":
        return frozenset(periphery)
    if spec.pkg_type == "C":
        return frozenset({center})
    return frozenset(periphery | {center})


def _signs(d: int) -> Tuple[int, ...]:
    if d > 0:
        return (1,)
    if d < 0:
        return (-1,)
    return (1, -1)


@dataclass(frozen=True)
class Topology:
    spec: GridSpec
    globals: FrozenSet[Coord]
    owner: Dict[Coord, Coord]
    local_index: Dict[Coord, Coord]
    mesh_links: FrozenSet[FrozenSet[Coord]]
    diag_links: FrozenSet[FrozenSet[Coord]] = field(default_factory=frozenset)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def X(self) -> int:
        return self.spec.X

    @property
    def Y(self) -> int:
        return self.spec.Y

    @property
    def chiplets(self) -> List[Coord]:
        return [(r, c) for r in range(self.X) for c in range(self.Y)]

    @property
    def links(self) -> FrozenSet[FrozenSet[Coord]]:
        return self.mesh_links | self.diag_links

    @property
    def entry_links(self) -> int:
        """Links crossing the cut around the global set (at least 1)."""
        n = sum(1 for link in self.links if len(link & self.globals) == 1)
        return max(n, 1)

    def region(self, g: Coord) -> List[Coord]:
        return [p for p in self.chiplets if self.owner[p] == g]

    def signed_offset(self, p: Coord) -> Coord:
        g = self.owner[p]
        return (p[0] - g[0], p[1] - g[1])

    def neighbors(self, p: Coord) -> List[Coord]:
        out = []
        for link in self.links:
            if p in link:
                (q,) = link - {p}
                out.append(q)
        return sorted(out)

    def hop_matrix(self, strategy: "HopStrategy") -> np.ndarray:
        """X-by-Y array of ``hops`` for every chiplet (cached)."""
        strategy = HopStrategy(strategy)
        if strategy not in self._cache:
            m = np.array([[hops(self, (r, c), strategy) for c in range(self.Y)]
                          for r in range(self.X)], dtype=np.int64)
            m.setflags(write=False)
            self._cache[strategy] = m
        return self._cache[strategy]

    def check(self, p: Coord) -> None:
        r, c = p
        if not (0 <= r < self.X and 0 <= c < self.Y):
            raise ValueError(f"chiplet {p} outside {self.X}x{self.Y} grid")


def _nearest_global(p: Coord, globals_: Iterable[Coord]) -> Coord:
    # ties: lowest row, then lowest column
    return min(globals_, key=lambda g: (abs(p[0] - g[0]) + abs(p[1] - g[1]), g[0], g[1]))


def build_topology(spec: GridSpec, globals_: Optional[Iterable[Coord]] = None) -> Topology:
    gset = frozenset(globals_) if globals_ is not None else default_globals(spec)
    for g in gset:
        if not (0 <= g[0] < spec.X and 0 <= g[1] < spec.Y):
            raise ValueError(f"global chiplet {g} outside grid")
    owner, local = {}, {}
    for r in range(spec.X):
        for c in range(spec.Y):
            g = _nearest_global((r, c), gset)
            owner[(r, c)] = g
            local[(r, c)] = (abs(r - g[0]), abs(c - g[1]))

    mesh = set()
    for r in range(spec.X):
        for c in range(spec.Y):
            if r + 1 < spec.X:
                mesh.add(frozenset({(r, c), (r + 1, c)}))
            if c + 1 < spec.Y:
                mesh.add(frozenset({(r, c), (r, c + 1)}))

    diag = set()
    if spec.diagonal_links:
        # diagonals point away from the owning global chiplet
        for p, g in owner.items():
            dr, dc = p[0] - g[0], p[1] - g[1]
            for sr in _signs(dr):
                for sc in _signs(dc):
                    q = (p[0] + sr, p[1] + sc)
                    if 0 <= q[0] < spec.X and 0 <= q[1] < spec.Y:
                        diag.add(frozenset({p, q}))

    return Topology(spec, gset, owner, local, frozenset(mesh), frozenset(diag))


def hops(topology: Topology, chiplet: Coord, strategy: HopStrategy) -> int:
    """Congestion-aware hop count for one chiplet under a fixed strategy.

    Waiting hops model the farthest-first issue order of shared data:
    row-shared data for local row x waits ``X - x`` quanta behind farther rows.
    """
    topology.check(chiplet)
    strategy = HopStrategy(strategy)
    x, y = topology.local_index[chiplet]
    X, Y = topology.X, topology.Y
    if strategy is HopStrategy.LowBw:
        return x + y
    if strategy is HopStrategy.RowShared:
        base = X + y
        if topology.spec.diagonal_links:
            return min(base, X - x + max(x, y))
        return base
    if strategy is HopStrategy.ColShared:
        return Y + x
    if strategy is HopStrategy.DiagonalShared:
        return X - x + max(x, y)
    raise ValueError("NonShared transfers are bandwidth-bound; no hop count")
