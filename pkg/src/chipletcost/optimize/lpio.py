"""LP-format export/import of ``QuadModel`` and solution-file reading.

The writer emits the common algebraic LP text format: quadratic parts sit in
``[ ... ]`` blocks (halved in the objective), integers are listed under
``Generals``, and the objective constant rides on a variable ``ONE`` fixed
to 1 because not every reader accepts bare constants.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

from .miqp import Constraint, QuadModel, Term, Var

ONE = "ONE"


def _num(v: float) -> str:
    return repr(float(v))


def _signed(coef: float, body: str) -> str:
    sign = "-" if coef < 0 else "+"
    return f"{sign} {_num(abs(coef))} {body}"


def _render(terms, double_quad: bool) -> str:
    lin = [_signed(t.coef, t.a) for t in terms if t.b is None]
    quad = []
    for t in terms:
        if t.b is None:
            continue
        body = f"{t.a} ^ 2" if t.a == t.b else f"{t.a} * {t.b}"
        quad.append(_signed(t.coef * (2 if double_quad else 1), body))
    out = " ".join(lin)
    if quad:
        out += (" " if out else "") + "+ [ " + " ".join(quad) + " ]"
        if double_quad:
            out += " / 2"
    return out or "0 " + ONE


def lp_text(model: QuadModel) -> str:
    lines = [f"\\ objective={model.objective_name} scale={_num(model.scale)} denom={model.denom}",
             "Minimize"]
    obj = list(model.objective)
    if model.constant:
        obj = [t for t in obj if t.b is None] + [Term(model.constant, ONE)] + [t for t in obj if t.b is not None]
    lines.append(" obj: " + _render(obj, True))
    lines.append("Subject To")
    for c in model.constraints:
        lines.append(f" {c.name}: {_render(c.terms, False)} {c.sense} {_num(c.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if math.isinf(v.hi):
            lines.append(f" {v.name} >= {_num(v.lo)}")
        else:
            lines.append(f" {_num(v.lo)} <= {v.name} <= {_num(v.hi)}")
    lines.append(f" {ONE} = 1")
    ints = [v.name for v in model.integer_vars]
    if ints:
        lines.append("Generals")
        for k in range(0, len(ints), 8):
            lines.append(" " + " ".join(ints[k:k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: QuadModel, path) -> Path:
    path = Path(path)
    path.write_text(lp_text(model))
    return path


# --- reading -----------------------------------------------------------------

@dataclass
class LPModel:
    variables: List[Var]
    constraints: List[Constraint]
    objective: List[Term]
    constant: float


def model_core(model: QuadModel) -> LPModel:
    return LPModel(list(model.variables), list(model.constraints), list(model.objective), model.constant)


_TOKEN = re.compile(r"\[|\]|\^|\*|/|[+-]|[^\s\[\]\^\*/+-]+")


def _parse_expr(text: str, halved: bool) -> List[Term]:
    toks = _TOKEN.findall(text)
    terms: List[Term] = []
    k, sign, in_quad = 0, 1.0, False
    while k < len(toks):
        tok = toks[k]
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            k += 1
            continue
        if tok == "[":
            in_quad, sign = True, 1.0
            k += 1
            continue
        if tok == "]":
            in_quad = False
            k += 1
            if k < len(toks) and toks[k] == "/":
                k += 2  # "/ 2"
            continue
        coef = sign * float(tok)
        name = toks[k + 1]
        k += 2
        if in_quad:
            if toks[k] == "^":
                other = name
                k += 2
            else:
                other = toks[k + 1]
                k += 2
            terms.append(Term(coef / 2 if halved else coef, name, other))
        else:
            terms.append(Term(coef, name))
        sign = 1.0
    return terms


def read_lp(path_or_text) -> LPModel:
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    section = None
    objective: List[Term] = []
    constraints: List[Constraint] = []
    bounds: Dict[str, Tuple[float, float]] = {}
    order: List[str] = []
    ints = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "generals", "end"):
            section = low
            continue
        if section == "minimize":
            objective = _parse_expr(line.split(":", 1)[1], halved=True)
        elif section == "subject to":
            name, body = line.split(":", 1)
            m = re.match(r"(.*)\s(>=|<=|=)\s(\S+)$", body.strip())
            if not m:
                raise ValueError(f"cannot parse constraint line: {line}")
            kind = "sum" if name.startswith("sum_") else "max"
            constraints.append(Constraint(name.strip(), tuple(_parse_expr(m.group(1), False)),
                                          m.group(2), float(m.group(3)), kind))
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 5:
                bounds[parts[2]] = (float(parts[0]), float(parts[4]))
                order.append(parts[2])
            elif len(parts) == 3 and parts[1] == ">=":
                bounds[parts[0]] = (float(parts[2]), math.inf)
                order.append(parts[0])
            elif len(parts) == 3 and parts[1] == "=":
                bounds[parts[0]] = (float(parts[2]), float(parts[2]))
                order.append(parts[0])
            else:
                raise ValueError(f"cannot parse bound line: {line}")
        elif section == "generals":
            ints.update(line.split())
    constant = 0.0
    obj_terms = []
    for t in objective:
        if t.a == ONE and t.b is None:
            constant += t.coef
        else:
            obj_terms.append(t)
    variables = [Var(n, *bounds[n], n in ints) for n in order if n != ONE]
    return LPModel(variables, constraints, obj_terms, constant)


def read_solution(path) -> Tuple[Dict[str, float], str]:
    """``name value`` per line; an optional ``status <word>`` line sets the status."""
    values: Dict[str, float] = {}
    status = "optimal"
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0].lower() == "status":
            status = parts[1]
            continue
        if len(parts) != 2:
            raise ValueError(f"bad solution line: {raw!r}")
        values[parts[0]] = float(parts[1])
    return values, status


def write_solution(path, values: Dict[str, float], status: str = "optimal") -> Path:
    path = Path(path)
    lines = [f"status {status}"] + [f"{k} {_num(v)}" for k, v in values.items()]
    path.write_text("\n".join(lines) + "\n")
    return path
