"""Division-free mixed-integer quadratic model of the partition problem.

Decision variables count array-size units per chiplet row (``px``) and
column (``py``); the leftover ``dim % unit`` is pinned on entry 0. Per
operator, one auxiliary variable ``z`` carries the synchronization max of
compute and distribution time over every chiplet. Memory traffic and
collection are partition independent and land in the objective constant.

Constant denominators (clock, link and memory bandwidths) are cleared by
multiplying through by their least common multiple ``D`` and the result is
rescaled by ``1/S``. With ``S`` a power of two the rescaling is exact in
floating point, so the argmin does not depend on ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..costmodel import (CostParams, Partition, WEIGHT_STRATEGY, _load_stream, activation_bytes_grid,
                         activation_strategy, compute_energy, offchip_energy,
                         weight_bytes_grid)
from ..topology import HopStrategy, Topology
from ..workload import GemmOp, TaskSequence
from .baselines import uniform_partition
from .lattice import DimBounds, dim_bounds

DEFAULT_SCALE = 2 ** 20
OBJECTIVES = ("latency", "edp")


def taylor_reciprocal(c: float, x: float) -> float:
    """First-order replacement 1/(c+x) ~ (c-x)/c**2, accurate for |x| << c."""
    if c == 0:
        raise ZeroDivisionError("expansion point must be nonzero")
    return (c - x) / (c * c)


def reciprocal_terms(c: float, var: str, coef: float = 1.0) -> "Expr":
    """``coef/(c + var)`` as a linear expression via ``taylor_reciprocal``."""
    return Expr({(var, None): -coef / (c * c)}, coef / c)


# --- expressions ---------------------------------------------------------------

Key = Tuple[str, Optional[str]]


class Expr:
    """Polynomial of degree <= 2 over named variables (quadratic keys sorted)."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Optional[Dict[Key, object]] = None, const=0):
        self.terms: Dict[Key, object] = {}
        self.const = const
        for k, v in (terms or {}).items():
            self._add(k, v)

    @staticmethod
    def var(name: str) -> "Expr":
        return Expr({(name, None): 1})

    def _add(self, key: Key, coef) -> None:
        a, b = key
        if b is not None and b < a:
            key = (b, a)
        self.terms[key] = self.terms.get(key, 0) + coef

    def __add__(self, other) -> "Expr":
        out = Expr(self.terms, self.const)
        if isinstance(other, Expr):
            for k, v in other.terms.items():
                out._add(k, v)
            out.const = out.const + other.const
        else:
            out.const = out.const + other
        return out

    __radd__ = __add__

    def __mul__(self, other) -> "Expr":
        if not isinstance(other, Expr):
            return Expr({k: v * other for k, v in self.terms.items()}, self.const * other)
        if self.degree + other.degree > 2:
            raise ValueError("product exceeds degree 2")
        out = Expr(const=self.const * other.const)
        for (a, b), v in self.terms.items():
            out._add((a, b), v * other.const)
        for (a, b), v in other.terms.items():
            out._add((a, b), v * self.const)
        for (a, _), v in self.terms.items():
            for (c, _), w in other.terms.items():
                out._add((a, c), v * w)
        return out

    __rmul__ = __mul__

    def __sub__(self, other) -> "Expr":
        return self + other * -1

    @property
    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(1 if b is None else 2 for (_, b) in self.terms)

    def mapped(self, f) -> "Expr":
        return Expr({k: f(v) for k, v in self.terms.items()}, f(self.const))

    def value(self, env: Dict[str, float]) -> float:
        s = 0.0
        for (a, b), v in self.terms.items():
            s += v * env[a] * (1.0 if b is None else env[b])
        return s + self.const


# --- model containers --------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str
    lo: float
    hi: float
    integer: bool = True


@dataclass(frozen=True)
class Term:
    coef: float
    a: str
    b: Optional[str] = None


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: Tuple[Term, ...]
    sense: str  # "=" or ">="
    rhs: float
    kind: str = "sum"  # "sum" or "max"

    def lhs(self, env: Dict[str, float]) -> float:
        s = 0.0
        for t in self.terms:
            s += t.coef * env[t.a] * (1.0 if t.b is None else env[t.b])
        return s


@dataclass
class OpBlock:
    """Per-operator data in model units, shared by the exact solver."""
    index: int
    op: GemmOp
    bx: DimBounds
    by: DimBounds
    xvars: Tuple[str, ...]
    yvars: Tuple[str, ...]
    zvar: str
    comp_coef: float
    A: np.ndarray          # per output-row element, X x Y
    B: np.ndarray          # per output-col element, X x Y
    Cst: np.ndarray
    const: float           # latency outside the max
    alpha: np.ndarray      # energy per px element by row
    beta: np.ndarray
    gamma: np.ndarray      # energy per px*py element
    e0: float


@dataclass
class QuadModel:
    variables: List[Var]
    constraints: List[Constraint]
    objective: List[Term]
    constant: float
    blocks: List[OpBlock] = field(default_factory=list)
    objective_name: str = "latency"
    scale: float = DEFAULT_SCALE
    denom: int = 1
    weights: Tuple[float, float] = (1.0, 0.0)  # multipliers on (latency, energy)

    @property
    def integer_vars(self) -> List[Var]:
        return [v for v in self.variables if v.integer]

    @property
    def aux_vars(self) -> List[Var]:
        return [v for v in self.variables if not v.integer]

    def constraints_of(self, kind: str) -> List[Constraint]:
        return [c for c in self.constraints if c.kind == kind]

    def max_degree(self) -> int:
        d = [1 if t.b is None else 2 for t in self.objective]
        for c in self.constraints:
            d += [1 if t.b is None else 2 for t in c.terms]
        return max(d, default=0)

    # evaluation straight from the term lists (independent of the solver path)
    def env_for(self, partitions: Sequence[Partition]) -> Dict[str, float]:
        if len(partitions) != len(self.blocks):
            raise ValueError("one partition per operator required")
        env: Dict[str, float] = {}
        for blk, part in zip(self.blocks, partitions):
            for names, b, vec in ((blk.xvars, blk.bx, part.px), (blk.yvars, blk.by, part.py)):
                units = b.to_units(vec)
                for n, u in zip(names, units):
                    env[n] = float(u)
        env.update(self.aux_values(env))
        return env

    def aux_values(self, env: Dict[str, float]) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for c in self.constraints_of("max"):
            z = c.terms[0].a
            # z - rest >= rhs  ->  z >= rhs + rest
            rest = -Constraint(c.name, c.terms[1:], c.sense, 0.0).lhs(env)
            out[z] = max(out.get(z, -math.inf), c.rhs + rest)
        for v in self.aux_vars:
            out.setdefault(v.name, 0.0)
        return out

    def evaluate(self, partitions: Sequence[Partition]) -> float:
        return self.evaluate_env(self.env_for(partitions))

    def evaluate_env(self, env: Dict[str, float]) -> float:
        s = 0.0
        for t in self.objective:
            s += t.coef * env[t.a] * (1.0 if t.b is None else env[t.b])
        return s + self.constant

    def feasible(self, env: Dict[str, float], tol: float = 1e-9) -> bool:
        for v in self.variables:
            x = env[v.name]
            if x < v.lo - tol or x > v.hi + tol or (v.integer and x != round(x)):
                return False
        for c in self.constraints:
            lhs = c.lhs(env)
            scale = max(1.0, abs(c.rhs))
            if c.sense == "=" and abs(lhs - c.rhs) > tol * scale:
                return False
            if c.sense == ">=" and lhs < c.rhs - tol * scale:
                return False
        return True

    def partitions_from(self, env: Dict[str, float]) -> List[Partition]:
        parts = []
        for blk in self.blocks:
            ux = _units(blk.bx, blk.xvars, env)
            uy = _units(blk.by, blk.yvars, env)
            parts.append(Partition(blk.bx.to_vec(ux), blk.by.to_vec(uy)))
        return parts


def _units(b: DimBounds, names: Sequence[str], env: Dict[str, float]) -> Tuple[int, ...]:
    if not names:
        return (b.q,) + (0,) * (b.parts - 1)
    return tuple(int(round(env[n])) for n in names)


# --- construction --------------------------------------------------------------

def _frac(v) -> Fraction:
    return Fraction(v)


def clearing_denominator(topology: Topology, params: CostParams) -> int:
    """LCM of the integer-valued constant denominators of the latency terms."""
    dens = [params.freq_hz, params.bw_nop, params.bw_mem, topology.entry_links * params.bw_nop]
    out = 1
    for d in dens:
        f = _frac(d)
        if f.denominator == 1:
            out = math.lcm(out, f.numerator)
    return out


def _dim_affine(b: DimBounds, names: Sequence[str]) -> Tuple[List[Expr], List[Expr]]:
    """(element count, fold count) expressions per entry of one dimension."""
    vals, folds = [], []
    for k in range(b.parts):
        rem = b.rem if k == 0 else 0
        fold_off = 1 if (k == 0 and b.rem) else 0
        if names:
            v = Expr.var(names[k])
            vals.append(v * b.unit + rem)
            folds.append(v + fold_off)
        else:
            u = b.q if k == 0 else 0
            vals.append(Expr(const=u * b.unit + rem))
            folds.append(Expr(const=u + fold_off))
    return vals, folds


def _stream_coeffs(op: GemmOp, grid: np.ndarray, total_bytes: int, topology: Topology,
                   params: CostParams, strategy: HopStrategy):
    """Linear-in-bytes distribution coefficients under the uniform regime label.

    Returns (per-byte seconds matrix, constant seconds, hop matrix for energy).
    """
    X, Y = topology.X, topology.Y
    low = topology.hop_matrix(HopStrategy.LowBw)
    zero = np.zeros((X, Y), dtype=object)
    off = _frac(total_bytes) / _frac(params.bw_mem)
    if X * Y == len(topology.globals):
        return zero, off, np.zeros((X, Y))
    _, _, _, regime = _load_stream(grid, total_bytes, topology, params, strategy)
    bw = _frac(params.bw_nop)
    if regime == "LowBw":
        return np.vectorize(lambda h: Fraction(int(h)) / bw, otypes=[object])(low), off, low
    if strategy is HopStrategy.NonShared:
        return zero, _frac(total_bytes) / (topology.entry_links * bw), low
    h = topology.hop_matrix(strategy)
    return np.vectorize(lambda v: Fraction(int(v)) / bw, otypes=[object])(h), Fraction(0), h


def build_miqp(task: TaskSequence, topology: Topology, params: CostParams,
               objective: str = "latency", scale: float = DEFAULT_SCALE) -> QuadModel:
    """Assemble the quadratic model; deterministic in variable and term order."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unsupported objective {objective!r}")
    if not scale > 0:
        raise ValueError("scaling factor must be positive")
    X, Y = topology.X, topology.Y
    R, C = params.R, params.C
    D = clearing_denominator(topology, params)
    conv = lambda v: float(_frac(v) * D) / scale  # noqa: E731
    low = topology.hop_matrix(HopStrategy.LowBw).astype(float)

    variables: List[Var] = []
    constraints: List[Constraint] = []
    lat_obj = Expr()
    en_obj = Expr()
    blocks: List[OpBlock] = []

    for i, op in enumerate(task.ops):
        bx, by = dim_bounds(op.M, X, R), dim_bounds(op.N, Y, C)
        xvars = () if bx.fixed else tuple(f"px_{i}_{x}" for x in range(X))
        yvars = () if by.fixed else tuple(f"py_{i}_{y}" for y in range(Y))
        for names, b in ((xvars, bx), (yvars, by)):
            for k, n in enumerate(names):
                variables.append(Var(n, b.lo_at(k), b.hi, True))
        z = f"z_{i}"
        variables.append(Var(z, 0.0, math.inf, False))
        for names, b, tag in ((xvars, bx, "px"), (yvars, by, "py")):
            if names:
                constraints.append(Constraint(
                    f"sum_{tag}_{i}", tuple(Term(1.0, n) for n in names), "=", float(b.q), "sum"))

        uni = uniform_partition(op, X, Y, R, C)
        bpe = op.bytes_per_element
        A, ca, Ha = _stream_coeffs(op, activation_bytes_grid(op, uni, Y), op.input_bytes,
                                   topology, params, activation_strategy(op))
        B, cw, Hw = _stream_coeffs(op, weight_bytes_grid(op, uni, X), op.weight_bytes,
                                   topology, params, WEIGHT_STRATEGY)
        A = A * (op.K * bpe)
        B = B * (op.K * bpe)
        comp_coef = Fraction(2 * R + C + op.K - 2) / _frac(params.freq_hz)
        # collection over the entry links plus the off-chip write
        const = _frac(op.output_bytes) / _frac(params.bw_mem)
        if X * Y != len(topology.globals):
            const += _frac(op.output_bytes) / (topology.entry_links * _frac(params.bw_nop))

        pxv, fxv = _dim_affine(bx, xvars)
        pyv, fyv = _dim_affine(by, yvars)
        zexp = Expr.var(z)
        seen: Dict[tuple, int] = {}
        for x in range(X):
            for y in range(Y):
                for tag, rhs_expr in (("comp", fxv[x] * fyv[y] * comp_coef),
                                      ("comm", pxv[x] * A[x, y] + pyv[y] * B[x, y] + (ca + cw))):
                    e = zexp - rhs_expr.mapped(conv)
                    terms = tuple(Term(float(v), a, b) for (a, b), v in e.terms.items() if v != 0)
                    # z first so evaluation can peel it off
                    terms = tuple(sorted(terms, key=lambda t: t.a != z))
                    rhs = -float(e.const) + 0.0  # no negative zero
                    sig = tuple((t.coef, t.a, t.b) for t in terms)
                    if sig in seen:
                        k = seen[sig]
                        if rhs > constraints[k].rhs:
                            c = constraints[k]
                            constraints[k] = Constraint(c.name, c.terms, c.sense, rhs, c.kind)
                        continue
                    seen[sig] = len(constraints)
                    constraints.append(Constraint(f"{tag}_{i}_{x}_{y}", terms, ">=", rhs, "max"))
        lat_obj = lat_obj + zexp + float(_frac(const) * D) / scale

        # energy (picojoules): partition-dependent NoP byte-hops plus constants
        k8 = params.e_nop * 8 / 1e-12
        alpha = k8 * op.K * bpe * np.asarray(Ha, float).sum(axis=1)
        beta = k8 * op.K * bpe * np.asarray(Hw, float).sum(axis=0)
        gamma = k8 * bpe * low
        e0 = (compute_energy(op, uni, params)
              + offchip_energy(op.input_bytes + op.weight_bytes + op.output_bytes, params)) / 1e-12
        en = Expr(const=e0)
        for x in range(X):
            en = en + pxv[x] * float(alpha[x])
            for y in range(Y):
                en = en + pxv[x] * pyv[y] * float(gamma[x, y])
        for y in range(Y):
            en = en + pyv[y] * float(beta[y])
        en_obj = en_obj + en

        blocks.append(OpBlock(
            i, op, bx, by, xvars, yvars, z, conv(comp_coef),
            np.vectorize(conv, otypes=[float])(A).reshape(X, Y),
            np.vectorize(conv, otypes=[float])(B).reshape(X, Y),
            np.full((X, Y), conv(ca + cw)), float(_frac(const) * D) / scale,
            alpha, beta, gamma, e0))

    if objective == "latency":
        wl, we = 1.0, 0.0
        obj = lat_obj
    else:
        # degree-2 surrogate for latency*energy, linearized around the uniform plan
        model0 = QuadModel(variables, constraints, [], 0.0, blocks, "latency", scale, D)
        env = model0.env_for([uniform_partition(op, X, Y, R, C) for op in task.ops])
        l_u, e_u = lat_obj.value(env), en_obj.value(env)
        wl, we = e_u, l_u
        obj = lat_obj * e_u + en_obj * l_u

    terms = [Term(float(v), a, b) for (a, b), v in obj.terms.items() if v != 0]
    terms.sort(key=lambda t: t.b is not None)  # linear part first, stable otherwise
    return QuadModel(variables, constraints, terms, float(obj.const), blocks, objective,
                     scale, D, (wl, we))
