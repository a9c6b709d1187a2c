"""The multiples-of-array-size lattice that partitions live on.

A partition vector of ``dim`` over ``parts`` entries is stored as integer
unit counts ``a`` with ``vec = a * unit`` plus the ``dim % unit`` leftover
pinned on entry 0. Dimensions smaller than one unit sit entirely on entry 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class DimBounds:
    dim: int
    parts: int
    unit: int
    q: int    # whole units to place
    rem: int  # leftover elements pinned on entry 0
    lo: int   # per-entry unit bounds
    hi: int

    @property
    def fixed(self) -> bool:
        """True when only one vector is feasible (no decision variable needed)."""
        return self.parts == 1 or self.q == 0

    def to_vec(self, units: Sequence[int]) -> Tuple[int, ...]:
        vec = [int(a) * self.unit for a in units]
        vec[0] += self.rem
        return tuple(vec)

    def to_units(self, vec: Sequence[int]) -> Tuple[int, ...]:
        if len(vec) != self.parts:
            raise ValueError(f"expected {self.parts} entries, got {len(vec)}")
        v = list(vec)
        v[0] -= self.rem
        if any(x < 0 or x % self.unit for x in v):
            raise ValueError(f"{tuple(vec)} is not on the {self.unit}-lattice")
        return tuple(x // self.unit for x in v)

    def folds(self, units: Sequence[int]) -> Tuple[int, ...]:
        f = [int(a) for a in units]
        if self.rem:
            f[0] += 1
        return tuple(f)

    @property
    def lo0(self) -> int:
        """Lower bound of entry 0: the leftover alone would sit below one unit."""
        return max(self.lo, 1) if self.rem and self.q and not self.fixed else self.lo

    def lo_at(self, k: int) -> int:
        return self.lo0 if k == 0 else self.lo

    def contains(self, units: Sequence[int]) -> bool:
        return (len(units) == self.parts and sum(units) == self.q
                and all(self.lo_at(k) <= a <= self.hi for k, a in enumerate(units)))

    def feasible(self) -> bool:
        return self.fixed or self.lo0 + self.lo * (self.parts - 1) <= self.q <= self.hi * self.parts


def dim_bounds(dim: int, parts: int, unit: int) -> DimBounds:
    """Per-entry bounds ``[max(ceil(dim/(parts*unit)) - 2, 1), ceil(...) + 2]`` in units.

    The lower bound drops to 0 when there are fewer whole units than entries,
    otherwise some entry would be forced below one array width.
    """
    if dim < 0 or parts < 1 or unit < 1:
        raise ValueError("bad lattice dimensions")
    q, rem = divmod(dim, unit)
    if q == 0:
        return DimBounds(dim, parts, unit, 0, rem, 0, 0)
    c = -(-dim // (parts * unit))
    lo = max(c - 2, 1) if q >= parts else 0
    hi = min(c + 2, q)
    if parts == 1:
        lo = hi = q
    return DimBounds(dim, parts, unit, q, rem, lo, hi)


def compositions(b: DimBounds) -> Iterator[Tuple[int, ...]]:
    """All unit vectors in bounds summing to q, in lexicographic order."""
    n = b.parts

    def rec(prefix, left, k):
        if k == 1:
            if b.lo <= left <= b.hi:
                yield prefix + (left,)
            return
        lo = max(b.lo_at(n - k), left - b.hi * (k - 1))
        hi = min(b.hi, left - b.lo * (k - 1))
        for a in range(lo, hi + 1):
            yield from rec(prefix + (a,), left - a, k - 1)

    yield from rec((), b.q, n)


def candidate_array(b: DimBounds) -> np.ndarray:
    rows = list(compositions(b))
    return np.array(rows, dtype=np.int64).reshape(len(rows), b.parts)


def count_compositions(b: DimBounds) -> int:
    # bounded compositions by dynamic programming
    ways = np.zeros(b.q + 1, dtype=object)
    ways[0] = 1
    for k in range(b.parts):
        nxt = np.zeros(b.q + 1, dtype=object)
        for s in range(b.q + 1):
            if ways[s]:
                for a in range(b.lo_at(k), min(b.hi, b.q - s) + 1):
                    nxt[s + a] += ways[s]
        ways = nxt
    return int(ways[b.q])


def even_units(b: DimBounds) -> Tuple[int, ...]:
    """Most even split; leftover units go to the lowest entries first."""
    base, extra = divmod(b.q, b.parts)
    return tuple(base + (1 if i < extra else 0) for i in range(b.parts))
